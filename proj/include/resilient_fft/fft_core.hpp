// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Plan-driven batched FFT. A plan factors N into 1..3 stages; each stage is
// a run of Stockham autosort passes whose radices are the stage's micro radix
// followed by one smaller remainder radix when needed. Output lands in
// natural order without a permutation pass.
//
// The unit of execution is a transaction: load bs signals, run every stage,
// store. Loaders and storers see each sample exactly once, which is where
// abft fuses its checksums.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "resilient_fft/common.hpp"

namespace rfft {

inline constexpr std::size_t kMinLength = std::size_t{1} << 1;
inline constexpr std::size_t kMaxLength = std::size_t{1} << 29;

inline void require_supported_length(std::size_t n) {
  if (n < kMinLength || n > kMaxLength || !is_power_of_two(n))
    throw UnsupportedLength("signal length " + std::to_string(n) + " is not a power of two in [2, 2^29]");
}

inline constexpr bool is_supported_radix(std::size_t r) noexcept {
  return r == 2 || r == 4 || r == 8 || r == 16 || r == 32;
}

// ---------------------------------------------------------------------------
// SignalBatch
// ---------------------------------------------------------------------------

/// b signals of length n, signal-major: signal j occupies [j*n, (j+1)*n).
template <RealScalar Real>
class SignalBatch {
 public:
  using value_type = Real;

  SignalBatch(std::size_t n, std::size_t b) : n_(n), b_(b) {
    require_supported_length(n);
    if (b == 0) throw InvalidArgument("batch count must be at least 1");
    data_.assign(n * b, Complex<Real>{});
  }

  SignalBatch(std::size_t n, std::size_t b, std::vector<Complex<Real>> data) : n_(n), b_(b), data_(std::move(data)) {
    require_supported_length(n);
    if (b == 0) throw InvalidArgument("batch count must be at least 1");
    if (data_.size() != n * b) throw InvalidArgument("batch data length does not equal n*b");
  }

  std::size_t length() const noexcept { return n_; }
  std::size_t count() const noexcept { return b_; }

  std::span<Complex<Real>> data() noexcept { return data_; }
  std::span<const Complex<Real>> data() const noexcept { return data_; }

  std::span<Complex<Real>> signal(std::size_t j) { return std::span(data_).subspan(j * n_, n_); }
  std::span<const Complex<Real>> signal(std::size_t j) const { return std::span(data_).subspan(j * n_, n_); }

  bool operator==(const SignalBatch& other) const = default;

 private:
  std::size_t n_;
  std::size_t b_;
  std::vector<Complex<Real>> data_;
};

// Bitwise comparison; distinguishes -0 from +0 and treats identical NaNs as equal.
template <RealScalar Real>
bool bitwise_equal(std::span<const Complex<Real>> a, std::span<const Complex<Real>> b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

// ---------------------------------------------------------------------------
// Plan skeletons and twiddle tables
// ---------------------------------------------------------------------------

struct StageSpec {
  std::size_t span = 0;
  std::size_t micro_radix = 0;
  bool operator==(const StageSpec&) const = default;
};

/// A plan before twiddle tables are attached.
struct PlanSkeleton {
  std::size_t n = 0;
  std::vector<StageSpec> stages;
  std::size_t bs = 1;
};

template <RealScalar Real>
class FftPlan;

/// omega_L^k for k in [0, size()), where L is the sub-transform length the
/// owning stage starts from.
template <RealScalar Real>
class TwiddleTable {
 public:
  TwiddleTable() = default;
  TwiddleTable(std::size_t root_order, std::size_t entries) : root_order_(root_order) {
    values_.reserve(entries);
    for (std::size_t k = 0; k < entries; ++k) values_.push_back(unit_root<Real>(k, root_order));
  }

  std::size_t root_order() const noexcept { return root_order_; }
  std::size_t size() const noexcept { return values_.size(); }
  const Complex<Real>& operator[](std::size_t k) const noexcept { return values_[k]; }
  std::span<const Complex<Real>> values() const noexcept { return values_; }

 private:
  template <RealScalar R>
  friend void debug_perturb_twiddle(FftPlan<R>&, std::size_t, std::size_t, Complex<R>);

  std::size_t root_order_ = 1;
  std::vector<Complex<Real>> values_;
};

struct PassSpec {
  std::size_t radix;
  std::size_t length;        // sub-transform length consumed by this pass
  std::size_t stride;        // Stockham stride s, with s * length == n
  std::size_t twiddle_step;  // stage root order / length
};

template <RealScalar Real>
struct PlanStage {
  StageSpec spec;
  std::vector<PassSpec> passes;
  TwiddleTable<Real> twiddles;
};

template <RealScalar Real>
class FftPlan {
 public:
  std::size_t length() const noexcept { return n_; }
  std::size_t batch_granularity() const noexcept { return bs_; }
  std::size_t stage_count() const noexcept { return stages_.size(); }
  const std::vector<PlanStage<Real>>& stages() const noexcept { return stages_; }
  std::size_t pass_count() const noexcept {
    std::size_t c = 0;
    for (const auto& s : stages_) c += s.passes.size();
    return c;
  }
  PlanSkeleton skeleton() const {
    PlanSkeleton sk{n_, {}, bs_};
    for (const auto& s : stages_) sk.stages.push_back(s.spec);
    return sk;
  }

 private:
  template <RealScalar R>
  friend FftPlan<R> make_twiddles(const PlanSkeleton&);
  template <RealScalar R>
  friend void debug_perturb_twiddle(FftPlan<R>&, std::size_t, std::size_t, Complex<R>);

  std::size_t n_ = 0;
  std::size_t bs_ = 1;
  std::vector<PlanStage<Real>> stages_;
};

inline void validate_skeleton(const PlanSkeleton& sk) {
  require_supported_length(sk.n);
  if (sk.stages.empty() || sk.stages.size() > 3) throw InvalidArgument("a plan needs 1 to 3 stages");
  if (sk.bs == 0) throw InvalidArgument("batch granularity bs must be at least 1");
  std::size_t product = 1;
  for (const auto& st : sk.stages) {
    if (st.span < 2 || !is_power_of_two(st.span)) throw InvalidArgument("stage span must be a power of two >= 2");
    if (!is_supported_radix(st.micro_radix)) throw InvalidArgument("micro radix must be one of 2, 4, 8, 16, 32");
    if (st.micro_radix > st.span || st.span % st.micro_radix != 0)
      throw InvalidArgument("micro radix must divide its stage span");
    product *= st.span;
  }
  if (product != sk.n) throw InvalidArgument("product of stage spans does not equal n");
}

/// Micro-radix passes for one stage, largest radix first.
inline std::vector<std::size_t> stage_radices(const StageSpec& st) {
  const unsigned total = log2_exact(st.span);
  const unsigned per = log2_exact(st.micro_radix);
  std::vector<std::size_t> radices(total / per, st.micro_radix);
  if (total % per != 0) radices.push_back(std::size_t{1} << (total % per));
  return radices;
}

template <RealScalar Real>
FftPlan<Real> make_twiddles(const PlanSkeleton& sk) {
  validate_skeleton(sk);
  FftPlan<Real> plan;
  plan.n_ = sk.n;
  plan.bs_ = sk.bs;
  std::size_t length = sk.n;
  std::size_t stride = 1;
  for (const auto& st : sk.stages) {
    PlanStage<Real> stage;
    stage.spec = st;
    const std::size_t root_order = length;
    std::size_t max_index = 0;
    for (std::size_t r : stage_radices(st)) {
      const PassSpec pass{r, length, stride, root_order / length};
      max_index = std::max(max_index, (r - 1) * (length / r - 1) * pass.twiddle_step);
      stage.passes.push_back(pass);
      length /= r;
      stride *= r;
    }
    stage.twiddles = TwiddleTable<Real>(root_order, max_index + 1);
    plan.stages_.push_back(std::move(stage));
  }
  return plan;
}

// Debug-only mutation hook used by the self-test to prove it can fail.
template <RealScalar Real>
void debug_perturb_twiddle(FftPlan<Real>& plan, std::size_t stage, std::size_t k, Complex<Real> delta) {
  auto& table = plan.stages_.at(stage).twiddles;
  table.values_.at(k) += delta;
}

// ---------------------------------------------------------------------------
// Butterflies
// ---------------------------------------------------------------------------

namespace detail {

template <RealScalar Real, std::size_t R>
struct SmallDft {
  static std::array<Complex<Real>, R / 2> make_roots() {
    std::array<Complex<Real>, R / 2> r{};
    for (std::size_t k = 0; k < R / 2; ++k) r[k] = unit_root<Real>(k, R);
    return r;
  }
  static inline const std::array<Complex<Real>, R / 2> kRoots = make_roots();

  static void apply(Complex<Real>* v) noexcept {
    if constexpr (R == 2) {
      const auto a = v[0], b = v[1];
      v[0] = a + b;
      v[1] = a - b;
    } else if constexpr (R == 4) {
      const auto t0 = v[0] + v[2], t1 = v[0] - v[2];
      const auto t2 = v[1] + v[3], d = v[1] - v[3];
      const Complex<Real> t3{d.imag(), -d.real()};  // -i * d
      v[0] = t0 + t2;
      v[1] = t1 + t3;
      v[2] = t0 - t2;
      v[3] = t1 - t3;
    } else {
      constexpr std::size_t H = R / 2;
      Complex<Real> even[H], odd[H];
      for (std::size_t i = 0; i < H; ++i) {
        even[i] = v[2 * i];
        odd[i] = v[2 * i + 1];
      }
      SmallDft<Real, H>::apply(even);
      SmallDft<Real, H>::apply(odd);
      for (std::size_t k = 0; k < H; ++k) {
        const auto t = cmul(kRoots[k], odd[k]);
        v[k] = even[k] + t;
        v[k + H] = even[k] - t;
      }
    }
  }
};

template <RealScalar Real, std::size_t R>
void stockham_pass(const Complex<Real>* src, Complex<Real>* dst, const PassSpec& pass, const TwiddleTable<Real>& tw) {
  const std::size_t m = pass.length / R;
  const std::size_t s = pass.stride;
  Complex<Real> w[R];
  Complex<Real> v[R];
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t j = 1; j < R; ++j) w[j] = tw[j * p * pass.twiddle_step];
    const Complex<Real>* in = src + s * p;
    Complex<Real>* out = dst + s * R * p;
    for (std::size_t q = 0; q < s; ++q) {
      for (std::size_t k = 0; k < R; ++k) v[k] = in[q + s * k * m];
      SmallDft<Real, R>::apply(v);
      out[q] = v[0];
      if (p == 0) {
        for (std::size_t j = 1; j < R; ++j) out[q + s * j] = v[j];
      } else {
        for (std::size_t j = 1; j < R; ++j) out[q + s * j] = cmul(v[j], w[j]);
      }
    }
  }
}

template <RealScalar Real>
void run_pass(const Complex<Real>* src, Complex<Real>* dst, const PassSpec& pass, const TwiddleTable<Real>& tw) {
  switch (pass.radix) {
    case 2: return stockham_pass<Real, 2>(src, dst, pass, tw);
    case 4: return stockham_pass<Real, 4>(src, dst, pass, tw);
    case 8: return stockham_pass<Real, 8>(src, dst, pass, tw);
    case 16: return stockham_pass<Real, 16>(src, dst, pass, tw);
    case 32: return stockham_pass<Real, 32>(src, dst, pass, tw);
    default: throw InvalidArgument("unsupported radix");
  }
}

}  // namespace detail

/// r-point DFT of `values`, then output j multiplied by twiddles[j] when a
/// twiddle context is supplied (the Stockham post-multiply of one pass).
template <RealScalar Real>
std::vector<Complex<Real>> butterfly_radix(std::span<const Complex<Real>> values, std::size_t radix,
                                           std::span<const Complex<Real>> twiddles = {}) {
  if (!is_supported_radix(radix)) throw InvalidArgument("unsupported radix");
  if (values.size() != radix) throw InvalidArgument("butterfly needs exactly radix values");
  if (!twiddles.empty() && twiddles.size() != radix) throw InvalidArgument("twiddle context must hold radix values");
  std::vector<Complex<Real>> v(values.begin(), values.end());
  switch (radix) {
    case 2: detail::SmallDft<Real, 2>::apply(v.data()); break;
    case 4: detail::SmallDft<Real, 4>::apply(v.data()); break;
    case 8: detail::SmallDft<Real, 8>::apply(v.data()); break;
    case 16: detail::SmallDft<Real, 16>::apply(v.data()); break;
    case 32: detail::SmallDft<Real, 32>::apply(v.data()); break;
  }
  if (!twiddles.empty())
    for (std::size_t j = 0; j < radix; ++j) v[j] = cmul(v[j], twiddles[j]);
  return v;
}

// ---------------------------------------------------------------------------
// Transactions
// ---------------------------------------------------------------------------

struct Transaction {
  std::size_t index = 0;
  std::size_t first_signal = 0;
  std::size_t signals = 0;
  bool operator==(const Transaction&) const = default;
};

/// Work units of bs signals in ascending signal order; the last may be short.
inline std::vector<Transaction> transaction_partition(std::size_t batch_count, std::size_t bs) {
  if (bs == 0) throw InvalidArgument("bs must be at least 1");
  std::vector<Transaction> out;
  for (std::size_t first = 0, t = 0; first < batch_count; first += bs, ++t)
    out.push_back({t, first, std::min(bs, batch_count - first)});
  return out;
}

template <RealScalar Real>
std::vector<Transaction> transaction_partition(const FftPlan<Real>& plan, const SignalBatch<Real>& batch) {
  return transaction_partition(batch.count(), plan.batch_granularity());
}

/// Hook invoked at the entry of every stage with the transaction's working
/// buffer (signals back to back). Implemented by the fault injector.
template <RealScalar Real>
class StrikeSite {
 public:
  virtual ~StrikeSite() = default;
  virtual void strike(const Transaction& txn, std::size_t stage, std::span<Complex<Real>> work,
                      std::size_t n) const = 0;
};

/// Sample traffic between signal storage and the transform, in samples.
struct TrafficCounter {
  std::atomic<std::uint64_t> samples{0};
  void add(std::uint64_t s) noexcept { samples.fetch_add(s, std::memory_order_relaxed); }
  std::uint64_t value() const noexcept { return samples.load(std::memory_order_relaxed); }
};

template <RealScalar Real>
struct Workspace {
  std::vector<Complex<Real>> ping;
  std::vector<Complex<Real>> pong;
  void reserve(std::size_t samples) {
    if (ping.size() < samples) {
      ping.resize(samples);
      pong.resize(samples);
    }
  }
};

struct PlainLoad {
  template <RealScalar Real>
  void operator()(std::size_t, std::span<const Complex<Real>> x, std::span<Complex<Real>> dst) const noexcept {
    std::copy(x.begin(), x.end(), dst.begin());
  }
};

struct PlainStore {
  template <RealScalar Real>
  void operator()(std::size_t, std::span<const Complex<Real>> src, std::span<Complex<Real>> y) const noexcept {
    std::copy(src.begin(), src.end(), y.begin());
  }
};

/// One transaction: read -> all stages -> write. Per signal of the
/// transaction, Loader(local, signal, work) fills the working buffer and
/// Storer(local, work, destination) writes the result; both run while the
/// signal is resident in the workspace.
template <RealScalar Real, typename Loader = PlainLoad, typename Storer = PlainStore>
void run_transaction(const FftPlan<Real>& plan, Direction direction, const Transaction& txn,
                     std::span<const Complex<Real>> input, std::span<Complex<Real>> output, Workspace<Real>& ws,
                     Loader&& load = {}, Storer&& store = {}, const StrikeSite<Real>* strike = nullptr,
                     TrafficCounter* traffic = nullptr) {
  const std::size_t n = plan.length();
  const std::size_t samples = n * txn.signals;
  ws.reserve(samples);
  Complex<Real>* cur = ws.ping.data();
  Complex<Real>* nxt = ws.pong.data();
  const bool inverse = direction == Direction::inverse;

  for (std::size_t local = 0; local < txn.signals; ++local) {
    const auto x = input.subspan((txn.first_signal + local) * n, n);
    const std::span<Complex<Real>> dst(cur + local * n, n);
    load(local, x, dst);
    if (inverse)
      for (auto& v : dst) v = std::conj(v);
  }

  for (std::size_t s = 0; s < plan.stage_count(); ++s) {
    const auto& stage = plan.stages()[s];
    if (strike) strike->strike(txn, s, std::span<Complex<Real>>(cur, samples), n);
    for (const auto& pass : stage.passes) {
      for (std::size_t local = 0; local < txn.signals; ++local)
        detail::run_pass<Real>(cur + local * n, nxt + local * n, pass, stage.twiddles);
      std::swap(cur, nxt);
    }
  }

  const Real scale = Real(1) / static_cast<Real>(n);
  for (std::size_t local = 0; local < txn.signals; ++local) {
    const std::span<Complex<Real>> src(cur + local * n, n);
    if (inverse)
      for (auto& v : src) v = std::conj(v) * scale;
    store(local, std::span<const Complex<Real>>(src), output.subspan((txn.first_signal + local) * n, n));
  }
  if (traffic) traffic->add(2 * samples);
}

struct ExecOptions {
  std::size_t workers = 1;
};

template <RealScalar Real>
void require_finite(std::span<const Complex<Real>> data) {
  for (const auto& v : data)
    if (!is_finite(v)) throw InvalidArgument("input contains non-finite values");
}

template <RealScalar Real>
void require_compatible(const FftPlan<Real>& plan, const SignalBatch<Real>& batch) {
  if (plan.length() != batch.length())
    throw InvalidArgument("plan length " + std::to_string(plan.length()) + " does not match batch length " +
                          std::to_string(batch.length()));
}

/// Out-of-place batched transform; inverse includes the 1/N factor.
template <RealScalar Real>
SignalBatch<Real> execute_plan(const FftPlan<Real>& plan, const SignalBatch<Real>& batch,
                               Direction direction = Direction::forward, const ExecOptions& options = {},
                               const std::type_identity_t<StrikeSite<Real>>* strike = nullptr,
                               TrafficCounter* traffic = nullptr) {
  require_compatible(plan, batch);
  require_finite<Real>(batch.data());
  SignalBatch<Real> out(batch.length(), batch.count());
  const auto txns = transaction_partition(plan, batch);
  std::vector<Workspace<Real>> spaces(std::max<std::size_t>(1, std::min(options.workers, txns.size())));
  parallel_for(txns.size(), spaces.size(), [&](std::size_t t, std::size_t w) {
    run_transaction<Real>(plan, direction, txns[t], batch.data(), out.data(), spaces[w], PlainLoad{}, PlainStore{},
                          strike, traffic);
  });
  return out;
}

/// Forward transform of one length-n vector with a single-signal transaction.
template <RealScalar Real>
std::vector<Complex<Real>> transform_vector(const FftPlan<Real>& plan, std::span<const Complex<Real>> x,
                                            Workspace<Real>& ws, Direction direction = Direction::forward) {
  if (x.size() != plan.length()) throw InvalidArgument("vector length does not match plan");
  std::vector<Complex<Real>> y(x.size());
  run_transaction<Real>(plan, direction, Transaction{0, 0, 1}, x, y, ws);
  return y;
}

}  // namespace rfft
