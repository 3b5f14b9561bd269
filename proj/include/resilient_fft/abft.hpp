// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Two-sided checksums for batched FFTs.
//
// Left side (per signal): the row L = e^T W is precomputed, so L.x can be
// accumulated while a signal is loaded and e^T y while it is stored. A
// divergence between the two flags the signal.
//
// Right side (across signals): every transaction also accumulates
// s_in = sum_j w_j x_j and s_out = sum_j w_j y_j with w_j = j + 1 over global
// signal indices. With one faulty signal k, s_out - FFT(s_in) is w_k times
// that signal's error column, which both locates and repairs it using one
// extra FFT of length n.
//
// Partial sums are kept per transaction. A group of T transactions shares one
// verification: pending repairs are applied, then FFT(sum s_in) is compared
// with sum s_out. Only when that group test fails are the transactions
// examined one by one, so decisions do not depend on T.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "resilient_fft/common.hpp"
#include "resilient_fft/dft_oracle.hpp"
#include "resilient_fft/fft_core.hpp"
#include "resilient_fft/plan.hpp"

namespace rfft::abft {

template <RealScalar Real>
inline constexpr double default_delta = std::same_as<Real, float> ? 1e-4 : 1e-10;

inline double default_delta_for(Precision p) { return p == Precision::fp32 ? 1e-4 : 1e-10; }

// Largest batch whose location weights are exact integers in `Real`.
template <RealScalar Real>
inline constexpr std::size_t kMaxLocationLength = std::size_t{1} << std::numeric_limits<Real>::digits;

struct ConstructionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Encoding vectors
// ---------------------------------------------------------------------------

enum class EncodingKind { ones, jou, wang, location };

inline const char* to_string(EncodingKind k) noexcept {
  switch (k) {
    case EncodingKind::ones: return "ones";
    case EncodingKind::jou: return "jou";
    case EncodingKind::wang: return "wang";
    case EncodingKind::location: return "location";
  }
  return "?";
}

inline std::optional<EncodingKind> parse_encoding(std::string_view s) {
  if (s == "ones") return EncodingKind::ones;
  if (s == "jou") return EncodingKind::jou;
  if (s == "wang") return EncodingKind::wang;
  if (s == "location") return EncodingKind::location;
  return std::nullopt;
}

template <RealScalar Real>
struct EncodingVector {
  EncodingKind kind = EncodingKind::ones;
  std::vector<Complex<Real>> values;

  std::size_t length() const noexcept { return values.size(); }
};

/// ones: 1. jou: omega_N^j. wang: omega_3^j. location: j + 1.
template <RealScalar Real>
EncodingVector<Real> make_encoding_vector(EncodingKind kind, std::size_t length) {
  if (length == 0) throw InvalidArgument("encoding vector length must be at least 1");
  if (kind == EncodingKind::location && length > kMaxLocationLength<Real>)
    throw InvalidArgument("location vector too long for exact integer weights in " +
                          std::string(to_string(precision_of<Real>)) + " precision");
  EncodingVector<Real> e{kind, std::vector<Complex<Real>>(length)};
  for (std::size_t j = 0; j < length; ++j) {
    switch (kind) {
      case EncodingKind::ones: e.values[j] = {Real(1), Real(0)}; break;
      case EncodingKind::jou: e.values[j] = unit_root<Real>(j, length); break;
      case EncodingKind::wang: e.values[j] = unit_root<Real>(j % 3, 3); break;
      case EncodingKind::location: e.values[j] = {static_cast<Real>(j + 1), Real(0)}; break;
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Left checksum row
// ---------------------------------------------------------------------------

inline constexpr std::size_t kOracleCrossCheckLimit = 4096;

template <RealScalar Real>
struct LeftChecksumRow {
  std::size_t n = 0;
  std::vector<Complex<Real>> values;  // e^T W
  EncodingVector<Real> encoding;
  // Jou only: the transform of x'_j = 2 x_j + x_{j+1} is (2 + omega^-k) X_k.
  std::vector<Complex<Real>> jou_factor;
  std::vector<Complex<Real>> jou_restore;  // 1 / jou_factor

  std::size_t size() const noexcept { return values.size(); }
  EncodingKind kind() const noexcept { return encoding.kind; }
};

/// Computes e^T W as DFT(e) in double precision with fft_core and rounds it
/// once; rows up to 4096 are cross-checked against the dense GEMV.
template <RealScalar Real>
LeftChecksumRow<Real> precompute_left(const EncodingVector<Real>& e, std::size_t n) {
  if (e.length() != n) throw InvalidArgument("precompute_left: encoding length does not match n");
  require_supported_length(n);

  const auto exact = make_encoding_vector<double>(e.kind, n);
  const auto plan = build_plan<double>(fallback_params(n, Precision::fp64));
  Workspace<double> ws;
  const auto row_d = transform_vector<double>(plan, exact.values, ws);

  LeftChecksumRow<Real> row;
  row.n = n;
  row.encoding = e;
  row.values.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    row.values[k] = {static_cast<Real>(row_d[k].real()), static_cast<Real>(row_d[k].imag())};

  if (n <= kOracleCrossCheckLimit) {
    const auto reference = oracle::gemv_checksum<double>(exact.values, n);
    std::vector<std::complex<double>> rounded(row.values.begin(), row.values.end());
    const double err = relative_inf_error<double>(rounded, reference);
    if (!(err <= 8.0 * machine_epsilon<Real>))
      throw ConstructionFailure("left checksum row disagrees with the GEMV oracle (relative error " +
                                std::to_string(err) + ")");
  }

  if (e.kind == EncodingKind::jou) {
    row.jou_factor.resize(n);
    row.jou_restore.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::complex<long double> w(std::cos(6.283185307179586476925286766559005768L * k / n),
                                        std::sin(6.283185307179586476925286766559005768L * k / n));
      const auto f = 2.0L + w;  // omega_N^-k = e^{+2 pi i k / N}
      const auto g = 1.0L / f;
      row.jou_factor[k] = {static_cast<Real>(f.real()), static_cast<Real>(f.imag())};
      row.jou_restore[k] = {static_cast<Real>(g.real()), static_cast<Real>(g.imag())};
    }
  }
  return row;
}

template <RealScalar Real>
LeftChecksumRow<Real> precompute_left(EncodingKind kind, std::size_t n) {
  return precompute_left<Real>(make_encoding_vector<Real>(kind, n), n);
}

// ---------------------------------------------------------------------------
// Detection and location
// ---------------------------------------------------------------------------

struct Detection {
  bool triggered = false;
  double divergence = 0;
};

/// |reference - observed| / max(|reference|, floor, 1e-30) against delta;
/// non-finite values always trigger.
inline Detection detect(std::complex<double> r, std::complex<double> o, double delta, double floor = 0) {
  if (!(delta > 0)) throw InvalidArgument("detection threshold must be positive");
  if (!is_finite(o) || !is_finite(r)) return {true, std::numeric_limits<double>::infinity()};
  const double denom = std::max({std::abs(r), floor, 1e-30});
  const double divergence = std::abs(r - o) / denom;
  if (!std::isfinite(divergence)) return {true, std::numeric_limits<double>::infinity()};
  return {divergence > delta, divergence};
}

template <RealScalar Real>
Detection detect(Complex<Real> reference, Complex<Real> observed, double delta, double floor = 0) {
  return detect(std::complex<double>(reference.real(), reference.imag()),
                std::complex<double>(observed.real(), observed.imag()), delta, floor);
}

inline constexpr double kLocateImagTolerance = 0.25;

/// 1-based signal id decoded from the weighted/unweighted residual ratio, or
/// nullopt when the ratio is not a usable integer in [1, batch].
inline std::optional<std::size_t> locate(std::complex<double> weighted, std::complex<double> unweighted,
                                         std::size_t batch, double floor = 1e-30) {
  if (!(std::abs(unweighted) > floor)) return std::nullopt;
  const auto ratio = weighted / unweighted;
  if (!std::isfinite(ratio.real()) || !std::isfinite(ratio.imag())) return std::nullopt;
  if (std::abs(ratio.imag()) > kLocateImagTolerance) return std::nullopt;
  const double id = std::round(ratio.real());
  if (id < 1 || id > static_cast<double>(batch)) return std::nullopt;
  return static_cast<std::size_t>(id);
}

// ---------------------------------------------------------------------------
// Per-signal accumulation (shared by the fused and offline paths so both see
// bit-identical checksums). Sums are carried in double: a length-N running
// sum in single precision drifts by about eps*sqrt(N), which at 2^17 is
// already within an order of magnitude of the default threshold.
// ---------------------------------------------------------------------------

using Accum = std::complex<double>;

template <RealScalar Real>
struct SignalCheck {
  Accum reference{};
  Accum observed{};
  double input_norm2 = 0;
  std::size_t n = 0;
  Detection detection;

  /// ||y||_2 / sqrt(N) = ||x||_2, the size of one typical output entry.
  /// Guards the relative divergence when |reference| is near zero.
  double floor() const { return std::sqrt(input_norm2); }
};

namespace detail {

// Fills the working buffer with the values the transform consumes (Jou's
// variant input x'_i = 2 x_i + x_{i+1}, else x itself).
template <RealScalar Real>
inline void encode_input(EncodingKind kind, std::span<const Complex<Real>> x, std::span<Complex<Real>> dst) {
  const std::size_t n = x.size();
  if (kind != EncodingKind::jou) {
    std::copy(x.begin(), x.end(), dst.begin());
    return;
  }
  for (std::size_t i = 0; i < n; ++i) dst[i] = Real(2) * x[i] + x[(i + 1) & (n - 1)];
}

// The reductions below keep four interleaved partial sums so the double
// precision add chains stay short; fused and separate sweeps share them.

template <RealScalar Real>
inline void accumulate_reference(SignalCheck<Real>& c, std::span<const Complex<Real>> row,
                                 std::span<const Complex<Real>> v) {
  double re[4] = {}, im[4] = {}, sq[4] = {};
  const std::size_t n = v.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (std::size_t l = 0; l < 4; ++l) {
      const double ar = row[i + l].real(), ai = row[i + l].imag();
      const double br = v[i + l].real(), bi = v[i + l].imag();
      re[l] += ar * br - ai * bi;
      im[l] += ar * bi + ai * br;
      sq[l] += br * br + bi * bi;
    }
  for (std::size_t l = 0; i < n; ++i, ++l) {
    const double ar = row[i].real(), ai = row[i].imag(), br = v[i].real(), bi = v[i].imag();
    re[l] += ar * br - ai * bi;
    im[l] += ar * bi + ai * br;
    sq[l] += br * br + bi * bi;
  }
  c.reference = {(re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])};
  c.input_norm2 = (sq[0] + sq[1]) + (sq[2] + sq[3]);
}

// e^T y for the row's encoding. Wang sums the three phases of omega_3 apart
// and combines them with exact roots.
template <RealScalar Real>
inline Accum observed_sum(const LeftChecksumRow<Real>& left, std::span<const Complex<Real>> y) {
  const std::size_t n = y.size();
  double re[4] = {}, im[4] = {};
  std::size_t i = 0;
  switch (left.kind()) {
    case EncodingKind::ones:
      for (; i + 4 <= n; i += 4)
        for (std::size_t l = 0; l < 4; ++l) {
          re[l] += y[i + l].real();
          im[l] += y[i + l].imag();
        }
      for (std::size_t l = 0; i < n; ++i, ++l) {
        re[l] += y[i].real();
        im[l] += y[i].imag();
      }
      return {(re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])};
    case EncodingKind::wang: {
      for (; i + 3 <= n; i += 3)
        for (std::size_t l = 0; l < 3; ++l) {
          re[l] += y[i + l].real();
          im[l] += y[i + l].imag();
        }
      for (std::size_t l = 0; i < n; ++i, ++l) {
        re[l] += y[i].real();
        im[l] += y[i].imag();
      }
      const Accum p0(re[0], im[0]), p1(re[1], im[1]), p2(re[2], im[2]);
      return p0 + cmul(unit_root<double>(1, 3), p1) + cmul(unit_root<double>(2, 3), p2);
    }
    default: {
      const auto& e = left.encoding.values;
      for (; i + 4 <= n; i += 4)
        for (std::size_t l = 0; l < 4; ++l) {
          const double ar = e[i + l].real(), ai = e[i + l].imag(), br = y[i + l].real(), bi = y[i + l].imag();
          re[l] += ar * br - ai * bi;
          im[l] += ar * bi + ai * br;
        }
      for (std::size_t l = 0; i < n; ++i, ++l) {
        const double ar = e[i].real(), ai = e[i].imag(), br = y[i].real(), bi = y[i].imag();
        re[l] += ar * br - ai * bi;
        im[l] += ar * bi + ai * br;
      }
      return {(re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])};
    }
  }
}

// The transform of x' seen from the stored output: y * (2 + omega^-k).
template <RealScalar Real>
std::vector<Complex<Real>> jou_unrestore(const LeftChecksumRow<Real>& left, std::span<const Complex<Real>> y) {
  std::vector<Complex<Real>> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = cmul(y[i], left.jou_factor[i]);
  return out;
}

template <RealScalar Real>
inline void scale(std::span<Complex<Real>> acc, Real w, std::span<const Complex<Real>> v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = Complex<Real>(w * v[i].real(), w * v[i].imag());
}

template <RealScalar Real>
inline void axpy(std::span<Complex<Real>> acc, Real w, std::span<const Complex<Real>> v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += Complex<Real>(w * v[i].real(), w * v[i].imag());
}

template <RealScalar Real>
double diff_norm2(std::span<const Complex<Real>> a, std::span<const Complex<Real>> b) {
  double s[4] = {};
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = double(a[i].real()) - double(b[i].real()), di = double(a[i].imag()) - double(b[i].imag());
    s[i & 3] += dr * dr + di * di;
  }
  return std::sqrt((s[0] + s[1]) + (s[2] + s[3]));
}

template <RealScalar Real>
double norm2(std::span<const Complex<Real>> v) {
  double s[4] = {};
  for (std::size_t i = 0; i < v.size(); ++i) s[i & 3] += double(v[i].real()) * v[i].real() + double(v[i].imag()) * v[i].imag();
  return std::sqrt((s[0] + s[1]) + (s[2] + s[3]));
}

}  // namespace detail

/// Left checksum of one stored signal, computed by a separate sweep over x
/// and y (the offline path and post-correction re-checks).
template <RealScalar Real>
SignalCheck<Real> check_signal(const LeftChecksumRow<Real>& left, std::span<const Complex<Real>> x,
                               std::span<const Complex<Real>> y, double delta) {
  SignalCheck<Real> c;
  c.n = left.n;
  if (left.kind() == EncodingKind::jou) {
    std::vector<Complex<Real>> v(x.size());
    detail::encode_input<Real>(left.kind(), x, v);
    detail::accumulate_reference<Real>(c, left.values, v);
    c.observed = detail::observed_sum<Real>(left, detail::jou_unrestore<Real>(left, y));
  } else {
    detail::accumulate_reference<Real>(c, left.values, x);
    c.observed = detail::observed_sum<Real>(left, y);
  }
  c.detection = detect(c.reference, c.observed, delta, c.floor());
  return c;
}

// ---------------------------------------------------------------------------
// Fused transaction sweep
// ---------------------------------------------------------------------------

template <RealScalar Real>
struct TransactionRecord {
  Transaction txn;
  std::vector<SignalCheck<Real>> checks;  // one per signal of the transaction
  std::vector<Complex<Real>> s_in;        // sum over the transaction of w_j x_j
  std::vector<Complex<Real>> s_out;       // sum over the transaction of w_j y_j
  double s_in_norm = 0;                   // ||s_in||_2

  std::vector<std::size_t> triggered() const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < checks.size(); ++l)
      if (checks[l].detection.triggered) out.push_back(l);
    return out;
  }
};

inline std::size_t location_weight_index(std::size_t signal) noexcept { return signal + 1; }

/// One transaction with every checksum folded into its load and store
/// sweeps, computed while each signal sits in the workspace. `rec` is
/// overwritten; its buffers are reused.
template <RealScalar Real>
void fused_transaction(const FftPlan<Real>& plan, const LeftChecksumRow<Real>& left, const Transaction& txn,
                       std::span<const Complex<Real>> input, std::span<Complex<Real>> output, Workspace<Real>& ws,
                       double delta, TransactionRecord<Real>& rec, const StrikeSite<Real>* strike = nullptr,
                       TrafficCounter* traffic = nullptr) {
  const std::size_t n = plan.length();
  rec.txn = txn;
  rec.checks.assign(txn.signals, SignalCheck<Real>{});
  rec.s_in.resize(n);
  rec.s_out.resize(n);
  const EncodingKind kind = left.kind();
  const bool jou = kind == EncodingKind::jou;
  auto weight = [&](std::size_t local) { return static_cast<Real>(location_weight_index(txn.first_signal + local)); };

  auto load = [&](std::size_t local, std::span<const Complex<Real>> x, std::span<Complex<Real>> dst) {
    detail::encode_input<Real>(kind, x, dst);
    const std::span<const Complex<Real>> v(dst);
    detail::accumulate_reference<Real>(rec.checks[local], left.values, v);
    if (local == 0)
      detail::scale<Real>(rec.s_in, weight(local), v);
    else
      detail::axpy<Real>(rec.s_in, weight(local), v);
    if (local + 1 == txn.signals)
      rec.s_in_norm = txn.signals == 1 ? double(weight(0)) * std::sqrt(rec.checks[0].input_norm2)
                                       : detail::norm2<Real>(rec.s_in);
  };
  auto store = [&](std::size_t local, std::span<const Complex<Real>> src, std::span<Complex<Real>> y) {
    rec.checks[local].observed = detail::observed_sum<Real>(left, src);
    if (local == 0)
      detail::scale<Real>(rec.s_out, weight(local), src);
    else
      detail::axpy<Real>(rec.s_out, weight(local), src);
    if (jou)
      for (std::size_t i = 0; i < n; ++i) y[i] = cmul(src[i], left.jou_restore[i]);
    else
      std::copy(src.begin(), src.end(), y.begin());
  };
  run_transaction<Real>(plan, Direction::forward, txn, input, output, ws, load, store, strike, traffic);

  for (auto& c : rec.checks) {
    c.n = n;
    c.detection = detect(c.reference, c.observed, delta, c.floor());
  }
}

template <RealScalar Real>
TransactionRecord<Real> fused_transaction(const FftPlan<Real>& plan, const LeftChecksumRow<Real>& left,
                                          const Transaction& txn, std::span<const Complex<Real>> input,
                                          std::span<Complex<Real>> output, Workspace<Real>& ws, double delta,
                                          const StrikeSite<Real>* strike = nullptr,
                                          TrafficCounter* traffic = nullptr) {
  TransactionRecord<Real> rec;
  fused_transaction<Real>(plan, left, txn, input, output, ws, delta, rec, strike, traffic);
  return rec;
}

// ---------------------------------------------------------------------------
// Reports and counters
// ---------------------------------------------------------------------------

// Why a detected error was recomputed instead of repaired from checksums.
enum class Fallback { none, multiple_signals, undecodable, non_finite, conditioning, recheck, right_side };

inline const char* to_string(Fallback f) noexcept {
  switch (f) {
    case Fallback::none: return "none";
    case Fallback::multiple_signals: return "multiple_signals";
    case Fallback::undecodable: return "undecodable";
    case Fallback::non_finite: return "non_finite";
    case Fallback::conditioning: return "conditioning";
    case Fallback::recheck: return "recheck";
    case Fallback::right_side: return "right_side";
  }
  return "?";
}

struct DetectionReport {
  bool triggered = false;
  double divergence = 0;                 // left-side divergence of the event, or the group residual
  std::optional<std::size_t> located;    // 0-based global signal index
  bool corrected = false;                // repaired from the checksums
  bool uncorrectable = false;            // checksum repair impossible
  bool recomputed = false;               // transaction recomputed from preserved input
  std::size_t verification = 0;
  std::optional<std::size_t> transaction;
  double right_divergence = 0;           // ||FFT(s_in) - s_out|| / ||FFT(s_in)|| for the group
  Fallback fallback = Fallback::none;
};

struct RunCounters {
  std::size_t n = 0;
  std::size_t signals = 0;
  std::uint64_t traffic_samples = 0;
  std::size_t transactions = 0;
  std::size_t verifications = 0;
  std::size_t corrections = 0;
  std::size_t recomputations = 0;
  std::size_t checksum_transforms = 0;  // length-n FFTs of accumulators

  /// Sweeps over the batch data, counting one read plus one write of every
  /// sample as one pass.
  double data_passes() const {
    return signals == 0 ? 0.0 : static_cast<double>(traffic_samples) / (2.0 * double(n) * double(signals));
  }
};

enum class Mode { fused, per_transaction };

inline const char* to_string(Mode m) noexcept { return m == Mode::fused ? "fused" : "per_transaction"; }

struct ProtectOptions {
  double delta = 0;  // 0 selects the precision default
  std::size_t group = 1;
  Mode mode = Mode::fused;
  std::size_t workers = 1;
};

template <RealScalar Real>
struct ProtectedResult {
  SignalBatch<Real> output;
  std::vector<DetectionReport> reports;
  RunCounters counters;
  std::vector<Detection> decisions;  // first-sweep left-side decision per signal

  std::size_t triggered_count() const {
    return static_cast<std::size_t>(
        std::count_if(reports.begin(), reports.end(), [](const DetectionReport& r) { return r.triggered; }));
  }
};

inline constexpr std::size_t kMaxRecomputeAttempts = 3;

// ---------------------------------------------------------------------------
// Checksum state: the right-side accumulators of the open group, the pending
// error and the verification logic.
// ---------------------------------------------------------------------------

template <RealScalar Real>
class ChecksumState {
 public:
  struct Pending {
    std::size_t slot = 0;    // index into the open group
    std::size_t signal = 0;  // global signal index
    DetectionReport report;
  };

  ChecksumState(const FftPlan<Real>& plan, const LeftChecksumRow<Real>& left, const SignalBatch<Real>& input,
                double delta, std::size_t group, const StrikeSite<Real>* strike = nullptr)
      : plan_(&plan), left_(&left), input_(&input), delta_(delta), group_(group), strike_(strike) {
    if (group == 0) throw InvalidArgument("group size T must be at least 1");
    if (!(delta > 0)) throw InvalidArgument("detection threshold must be positive");
    if (input.count() > kMaxLocationLength<Real>)
      throw InvalidArgument("batch too large for exact location weights");
    counters_.n = plan.length();
    counters_.signals = input.count();
  }

  std::size_t group_size() const noexcept { return group_; }
  double delta() const noexcept { return delta_; }
  const std::optional<Pending>& pending() const noexcept { return pending_; }
  const std::vector<TransactionRecord<Real>>& group_records() const noexcept { return window_; }
  const std::vector<DetectionReport>& reports() const noexcept { return reports_; }
  std::vector<DetectionReport> take_reports() { return std::move(reports_); }
  RunCounters counters() const {
    RunCounters c = counters_;
    c.traffic_samples = traffic_.value();
    return c;
  }
  TrafficCounter& traffic() noexcept { return traffic_; }

  Real weight(std::size_t signal) const noexcept { return static_cast<Real>(location_weight_index(signal)); }

  /// Runs transactions [first, first + count) of `txns` as one group: fused
  /// sweeps (in parallel), then detection handling in transaction order and
  /// the group verification.
  void run_group(std::span<const Transaction> txns, std::span<Complex<Real>> output, std::size_t workers,
                 std::vector<Detection>* decisions = nullptr) {
    if (txns.size() > group_) throw InvalidArgument("group holds more transactions than T");
    window_.resize(txns.size());
    const std::size_t nworkers = std::max<std::size_t>(1, std::min(workers, txns.size()));
    if (spaces_.size() < nworkers) spaces_.resize(nworkers);
    parallel_for(txns.size(), nworkers, [&](std::size_t t, std::size_t w) {
      fused_transaction<Real>(*plan_, *left_, txns[t], input_->data(), output, spaces_[w], delta_, window_[t], strike_,
                              &traffic_);
    });
    counters_.transactions += txns.size();
    if (decisions)
      for (const auto& rec : window_)
        for (std::size_t l = 0; l < rec.checks.size(); ++l)
          (*decisions)[rec.txn.first_signal + l] = rec.checks[l].detection;

    for (std::size_t slot = 0; slot < window_.size(); ++slot) scan(slot, output);
    verify(output);
  }

  /// Applies the pending repair, if any, from the snapshot of its own
  /// transaction. Falls back to recomputing that transaction when the repair
  /// does not re-verify.
  DetectionReport correct_pending(std::span<Complex<Real>> output) {
    if (!pending_) {
      DetectionReport none;
      none.verification = counters_.verifications;
      return none;
    }
    Pending p = std::move(*pending_);
    pending_.reset();
    DetectionReport report = p.report;
    report.verification = counters_.verifications;

    if (const auto why = repair_column(p.slot, p.signal, output); why == Fallback::none) {
      report.corrected = true;
      ++counters_.corrections;
    } else {
      report.fallback = why;
      report.uncorrectable = true;
      report.recomputed = true;
      recompute(p.slot, output);
    }
    reports_.push_back(report);
    return report;
  }

 private:
  // Left-side decisions of one transaction, in order.
  void scan(std::size_t slot, std::span<Complex<Real>> output) {
    auto& rec = window_[slot];
    const auto hits = rec.triggered();
    if (hits.empty()) return;
    if (pending_) correct_pending(output);

    DetectionReport report;
    report.triggered = true;
    report.transaction = rec.txn.index;
    for (auto l : hits) report.divergence = std::max(report.divergence, rec.checks[l].detection.divergence);

    std::optional<std::size_t> decoded;
    if (hits.size() == 1) {
      std::complex<double> weighted{}, unweighted{};
      double floor = 0;
      for (std::size_t l = 0; l < rec.checks.size(); ++l) {
        const auto& c = rec.checks[l];
        const std::complex<double> r = c.observed - c.reference;
        weighted += double(weight(rec.txn.first_signal + l)) * r;
        unweighted += r;
        if (l == hits[0]) floor = 0.5 * std::abs(r);
      }
      decoded = locate(weighted, unweighted, counters_.signals, floor);
    }
    const std::size_t expected = rec.txn.first_signal + (hits.empty() ? 0 : hits[0]);
    if (hits.size() == 1 && decoded && *decoded == location_weight_index(expected)) {
      report.located = expected;
      pending_ = Pending{slot, expected, report};
      return;
    }
    // More than one signal diverged in this snapshot, or location failed.
    if (decoded) report.located = *decoded - 1;
    report.fallback = hits.size() > 1 ? Fallback::multiple_signals : Fallback::undecodable;
    report.uncorrectable = true;
    report.recomputed = true;
    report.verification = counters_.verifications;
    recompute(slot, output);
    reports_.push_back(report);
  }

  void verify(std::span<Complex<Real>> output) {
    if (pending_) correct_pending(output);
    const std::size_t n = plan_->length();
    const std::size_t reports_before = reports_.size();
    auto& ws = spaces_.front();
    double group_rel = 0;

    auto check_one = [&](std::size_t slot, const std::vector<Complex<Real>>& f) {
      const auto& rec = window_[slot];
      const double num = detail::diff_norm2<Real>(rec.s_out, f);
      const double den = detail::norm2<Real>(f);
      const double rel = den > 0 ? num / den : (num > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      return std::pair{!(num <= delta_ * den), rel};
    };
    auto fail_one = [&](std::size_t slot, double rel) {
      DetectionReport r;
      r.triggered = true;
      r.divergence = rel;
      r.uncorrectable = true;
      r.recomputed = true;
      r.verification = counters_.verifications;
      r.transaction = window_[slot].txn.index;
      r.right_divergence = rel;
      r.fallback = Fallback::right_side;
      recompute(slot, output);
      reports_.push_back(r);
    };

    if (window_.size() == 1) {
      const auto f = transform_vector<Real>(*plan_, window_[0].s_in, ws);
      ++counters_.checksum_transforms;
      const auto [bad, rel] = check_one(0, f);
      group_rel = rel;
      if (bad) fail_one(0, rel);
    } else if (!window_.empty()) {
      auto& s_in = group_in_;
      auto& s_out = group_out_;
      s_in = window_[0].s_in;
      s_out = window_[0].s_out;
      double min_scale = window_[0].s_in_norm;
      for (std::size_t slot = 1; slot < window_.size(); ++slot) {
        const auto& rec = window_[slot];
        for (std::size_t i = 0; i < n; ++i) {
          s_in[i] += rec.s_in[i];
          s_out[i] += rec.s_out[i];
        }
        min_scale = std::min(min_scale, rec.s_in_norm);
      }
      min_scale *= std::sqrt(double(n));
      const auto f = transform_vector<Real>(*plan_, s_in, ws);
      ++counters_.checksum_transforms;
      const double num = detail::diff_norm2<Real>(s_out, f);
      const double den = detail::norm2<Real>(f);
      group_rel = den > 0 ? num / den : (num > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (!(num <= 0.5 * delta_ * min_scale)) {
        for (std::size_t slot = 0; slot < window_.size(); ++slot) {
          const auto ft = transform_vector<Real>(*plan_, window_[slot].s_in, ws);
          ++counters_.checksum_transforms;
          const auto [bad, rel] = check_one(slot, ft);
          if (bad) fail_one(slot, rel);
        }
      }
    }

    for (std::size_t i = reports_before; i < reports_.size(); ++i) reports_[i].right_divergence = group_rel;
    bool any = false;
    for (const auto& r : reports_)
      if (r.verification == counters_.verifications) any = true;
    if (!any) {
      DetectionReport quiet;
      quiet.verification = counters_.verifications;
      quiet.right_divergence = group_rel;
      reports_.push_back(quiet);
    }
    ++counters_.verifications;
  }

  // delta-column repair of one signal, or the reason it cannot be trusted.
  Fallback repair_column(std::size_t slot, std::size_t signal, std::span<Complex<Real>> output) {
    auto& rec = window_[slot];
    const std::size_t n = plan_->length();
    const std::size_t local = signal - rec.txn.first_signal;
    const Real wk = weight(signal);
    const bool jou = left_->kind() == EncodingKind::jou;
    auto& ws = spaces_.front();

    const auto f = transform_vector<Real>(*plan_, rec.s_in, ws);
    ++counters_.checksum_transforms;
    traffic_.add(2 * n);

    auto column = output.subspan(signal * n, n);
    std::vector<Complex<Real>> delta_col(n), fixed(n);
    double faulty_inf = 0, delta_inf = 0, f_rms = 0, out_rms = 0, fixed_inf = 0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      delta_col[i] = (rec.s_out[i] - f[i]) / wk;
      const Complex<Real> dy = jou ? cmul(delta_col[i], left_->jou_restore[i]) : delta_col[i];
      fixed[i] = column[i] - dy;
      finite = finite && is_finite(fixed[i]);
      faulty_inf = std::max(faulty_inf, double(std::abs(column[i])));
      delta_inf = std::max(delta_inf, double(std::abs(dy)));
      fixed_inf = std::max(fixed_inf, double(std::abs(fixed[i])));
      f_rms += double(abs2(f[i]));
      out_rms += double(abs2(rec.s_out[i]));
    }
    if (!finite) return Fallback::non_finite;

    // Rounding left behind by the subtraction, against the plain-transform budget.
    const double eps = machine_epsilon<Real>;
    const double lg = std::max(1.0, double(log2_exact(n)));
    f_rms = std::sqrt(f_rms / double(n));
    out_rms = std::sqrt(out_rms / double(n));
    const double estimate = eps * (faulty_inf + delta_inf) + kGuardSafety * eps * std::sqrt(lg) * (f_rms + out_rms) / double(wk);
    if (!(estimate <= kGuardBudget * eps * lg * fixed_inf)) return Fallback::conditioning;

    const Accum observed =
        jou ? detail::observed_sum<Real>(*left_, detail::jou_unrestore<Real>(*left_, fixed))
            : detail::observed_sum<Real>(*left_, fixed);
    auto& c = rec.checks[local];
    const auto recheck = detect(c.reference, observed, delta_, c.floor());
    if (recheck.triggered) return Fallback::recheck;

    std::copy(fixed.begin(), fixed.end(), column.begin());
    for (std::size_t i = 0; i < n; ++i) rec.s_out[i] -= Complex<Real>(wk * delta_col[i].real(), wk * delta_col[i].imag());
    c.observed = observed;
    c.detection = recheck;
    return Fallback::none;
  }

  // Re-executes one transaction from the preserved input until it verifies.
  void recompute(std::size_t slot, std::span<Complex<Real>> output) {
    const Transaction txn = window_[slot].txn;
    auto& ws = spaces_.front();
    for (std::size_t attempt = 0; attempt < kMaxRecomputeAttempts; ++attempt) {
      auto rec = fused_transaction<Real>(*plan_, *left_, txn, input_->data(), output, ws, delta_, strike_, &traffic_);
      ++counters_.recomputations;
      const auto f = transform_vector<Real>(*plan_, rec.s_in, ws);
      ++counters_.checksum_transforms;
      const bool right_ok = detail::diff_norm2<Real>(rec.s_out, f) <= delta_ * detail::norm2<Real>(f);
      if (rec.triggered().empty() && right_ok) {
        window_[slot] = std::move(rec);
        return;
      }
    }
    throw PersistentFault("transaction " + std::to_string(txn.index) + " failed verification after " +
                          std::to_string(kMaxRecomputeAttempts) + " recomputations");
  }

  static constexpr double kGuardSafety = 4.0;
  static constexpr double kGuardBudget = 16.0;

  const FftPlan<Real>* plan_;
  const LeftChecksumRow<Real>* left_;
  const SignalBatch<Real>* input_;
  double delta_;
  std::size_t group_;
  const StrikeSite<Real>* strike_;
  std::vector<TransactionRecord<Real>> window_;
  std::vector<Complex<Real>> group_in_, group_out_;
  std::optional<Pending> pending_;
  std::vector<Workspace<Real>> spaces_ = std::vector<Workspace<Real>>(1);
  std::vector<DetectionReport> reports_;
  RunCounters counters_;
  TrafficCounter traffic_;
};

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

template <RealScalar Real>
void require_protectable(const FftPlan<Real>& plan, const SignalBatch<Real>& batch, const LeftChecksumRow<Real>& left) {
  require_compatible(plan, batch);
  require_finite<Real>(batch.data());
  if (left.n != plan.length()) throw InvalidArgument("left checksum row length does not match the plan");
  if (left.kind() == EncodingKind::location)
    throw InvalidArgument("the left-side encoding must be ones, jou or wang");
}

/// Forward transform with fused two-sided protection.
template <RealScalar Real>
ProtectedResult<Real> run_protected(const FftPlan<Real>& plan, const SignalBatch<Real>& batch,
                                    const LeftChecksumRow<Real>& left, const ProtectOptions& options = {},
                                    const StrikeSite<Real>* strike = nullptr) {
  require_protectable(plan, batch, left);
  const double delta = options.delta > 0 ? options.delta : default_delta<Real>;
  if (options.delta < 0 || std::isnan(options.delta)) throw InvalidArgument("detection threshold must be positive");
  const std::size_t group = options.mode == Mode::per_transaction ? 1 : options.group;

  ChecksumState<Real> state(plan, left, batch, delta, group, strike);
  ProtectedResult<Real> result{SignalBatch<Real>(batch.length(), batch.count()), {}, {},
                               std::vector<Detection>(batch.count())};
  const auto txns = transaction_partition(plan, batch);
  for (std::size_t first = 0; first < txns.size(); first += group) {
    const std::size_t count = std::min(group, txns.size() - first);
    state.run_group(std::span<const Transaction>(txns).subspan(first, count), result.output.data(), options.workers,
                    &result.decisions);
  }
  result.reports = state.take_reports();
  result.counters = state.counters();
  return result;
}

template <RealScalar Real>
ProtectedResult<Real> run_protected(const FftPlan<Real>& plan, const SignalBatch<Real>& batch, EncodingKind kind,
                                    const ProtectOptions& options = {}, const StrikeSite<Real>* strike = nullptr) {
  return run_protected(plan, batch, precompute_left<Real>(kind, plan.length()), options, strike);
}

/// Baseline: plain transform, then a separate checksum sweep over inputs and
/// outputs. Flagged signals are recomputed from input and re-checked.
template <RealScalar Real>
ProtectedResult<Real> run_offline(const FftPlan<Real>& plan, const SignalBatch<Real>& batch,
                                  const LeftChecksumRow<Real>& left, double delta = 0, std::size_t workers = 1,
                                  const StrikeSite<Real>* strike = nullptr) {
  require_protectable(plan, batch, left);
  if (delta < 0 || std::isnan(delta)) throw InvalidArgument("detection threshold must be positive");
  if (delta == 0) delta = default_delta<Real>;
  const std::size_t n = plan.length();
  TrafficCounter traffic;
  ProtectedResult<Real> result{execute_plan(plan, batch, Direction::forward, {workers}, strike, &traffic), {}, {},
                               std::vector<Detection>(batch.count())};
  result.counters.n = n;
  result.counters.signals = batch.count();
  result.counters.transactions = transaction_partition(plan, batch).size();

  Workspace<Real> ws;
  const std::size_t bs = plan.batch_granularity();
  for (std::size_t j = 0; j < batch.count(); ++j) {
    auto chk = check_signal<Real>(left, batch.signal(j), result.output.signal(j), delta);
    traffic.add(2 * n);
    result.decisions[j] = chk.detection;
    if (!chk.detection.triggered) continue;

    DetectionReport report;
    report.triggered = true;
    report.divergence = chk.detection.divergence;
    report.located = j;
    report.transaction = j / bs;
    report.recomputed = true;
    std::size_t attempt = 0;
    for (; attempt < kMaxRecomputeAttempts && chk.detection.triggered; ++attempt) {
      run_transaction<Real>(plan, Direction::forward, Transaction{j / bs, j, 1}, batch.data(), result.output.data(),
                            ws, PlainLoad{}, PlainStore{}, strike, &traffic);
      ++result.counters.recomputations;
      chk = check_signal<Real>(left, batch.signal(j), result.output.signal(j), delta);
      traffic.add(2 * n);
    }
    if (chk.detection.triggered)
      throw PersistentFault("signal " + std::to_string(j) + " failed verification after " +
                            std::to_string(kMaxRecomputeAttempts) + " recomputations");
    result.reports.push_back(report);
  }
  if (result.reports.empty()) result.reports.push_back(DetectionReport{});
  result.counters.verifications = 1;
  result.counters.traffic_samples = traffic.value();
  return result;
}

template <RealScalar Real>
ProtectedResult<Real> run_offline(const FftPlan<Real>& plan, const SignalBatch<Real>& batch, EncodingKind kind,
                                  double delta = 0, std::size_t workers = 1, const StrikeSite<Real>* strike = nullptr) {
  return run_offline(plan, batch, precompute_left<Real>(kind, plan.length()), delta, workers, strike);
}

}  // namespace rfft::abft
