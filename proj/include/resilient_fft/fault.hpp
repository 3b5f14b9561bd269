// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Single-bit upsets on intermediate FFT values, and the campaigns that use
// them: the ROC sweep over the detection threshold and the single-fault
// repair trials.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "resilient_fft/abft.hpp"
#include "resilient_fft/common.hpp"
#include "resilient_fft/fft_core.hpp"
#include "resilient_fft/plan.hpp"

namespace rfft::fault {

template <RealScalar Real>
using Bits = std::conditional_t<std::same_as<Real, float>, std::uint32_t, std::uint64_t>;

template <RealScalar Real>
inline constexpr unsigned kBitWidth = 8 * sizeof(Real);

/// `value` with one bit of its IEEE-754 representation inverted.
template <RealScalar Real>
Real flip_bit(Real value, unsigned bit) {
  if (bit >= kBitWidth<Real>) throw InvalidArgument("bit position out of range");
  return std::bit_cast<Real>(static_cast<Bits<Real>>(std::bit_cast<Bits<Real>>(value) ^ (Bits<Real>{1} << bit)));
}

enum class BitClass { sign, exponent, mantissa };

inline const char* to_string(BitClass c) noexcept {
  switch (c) {
    case BitClass::sign: return "sign";
    case BitClass::exponent: return "exponent";
    case BitClass::mantissa: return "mantissa";
  }
  return "?";
}

template <RealScalar Real>
BitClass bit_class(unsigned bit) {
  if (bit >= kBitWidth<Real>) throw InvalidArgument("bit position out of range");
  constexpr unsigned mantissa = std::numeric_limits<Real>::digits - 1;
  if (bit == kBitWidth<Real> - 1) return BitClass::sign;
  return bit >= mantissa ? BitClass::exponent : BitClass::mantissa;
}

enum class Part { re, im };

struct FaultSpec {
  std::size_t transaction = 0;
  std::size_t signal = 0;   // global index
  std::size_t element = 0;  // within the signal
  std::size_t stage = 0;    // value is struck as the stage begins
  Part part = Part::re;
  unsigned bit = 0;
};

/// Strike hook for fft_core. Each armed spec fires at most once.
template <RealScalar Real>
class FaultInjector final : public StrikeSite<Real> {
 public:
  /// `group` is the detection interval in transactions; with `seu` set, two
  /// specs in one interval are rejected.
  FaultInjector(const FftPlan<Real>& plan, std::size_t batch, std::size_t group = 1, bool seu = true)
      : n_(plan.length()), bs_(plan.batch_granularity()), stages_(plan.stage_count()), batch_(batch),
        group_(group), seu_(seu) {
    if (group == 0) throw InvalidArgument("detection interval must be at least 1 transaction");
    if (batch == 0) throw InvalidArgument("batch count must be at least 1");
  }

  void arm(const FaultSpec& spec) {
    const std::size_t txns = (batch_ + bs_ - 1) / bs_;
    if (spec.signal >= batch_) throw InvalidArgument("fault signal index out of range");
    if (spec.transaction >= txns || spec.transaction != spec.signal / bs_)
      throw InvalidArgument("fault transaction index does not hold the target signal");
    if (spec.element >= n_) throw InvalidArgument("fault element index out of range");
    if (spec.stage >= stages_) throw InvalidArgument("fault stage index out of range");
    if (spec.bit >= kBitWidth<Real>) throw InvalidArgument("fault bit position out of range");
    if (seu_)
      for (const auto& s : specs_)
        if (s.transaction / group_ == spec.transaction / group_)
          throw InvalidArgument("single-event-upset mode allows one fault per detection interval");
    specs_.push_back(spec);
    fired_.push_back(0);
  }

  void strike(const Transaction& txn, std::size_t stage, std::span<Complex<Real>> work,
              std::size_t n) const override {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& s = specs_[i];
      if (fired_[i] || s.transaction != txn.index || s.stage != stage) continue;
      if (s.signal < txn.first_signal || s.signal >= txn.first_signal + txn.signals) continue;
      auto& v = work[(s.signal - txn.first_signal) * n + s.element];
      v = s.part == Part::re ? Complex<Real>(flip_bit(v.real(), s.bit), v.imag())
                             : Complex<Real>(v.real(), flip_bit(v.imag(), s.bit));
      fired_[i] = 1;
    }
  }

  const std::vector<FaultSpec>& specs() const noexcept { return specs_; }
  bool fired(std::size_t i) const { return fired_.at(i) != 0; }
  std::size_t fired_count() const { return static_cast<std::size_t>(std::count(fired_.begin(), fired_.end(), 1)); }
  void rearm() { std::fill(fired_.begin(), fired_.end(), 0); }

 private:
  std::size_t n_, bs_, stages_, batch_, group_;
  bool seu_;
  std::vector<FaultSpec> specs_;
  // One byte per spec; each spec is only touched by the worker running its
  // transaction.
  mutable std::vector<unsigned char> fired_;
};

/// Uniform site over (signal, element, stage, part, bit).
template <RealScalar Real, typename Rng>
FaultSpec random_fault(Rng& rng, const FftPlan<Real>& plan, std::size_t batch) {
  auto pick = [&](std::size_t count) { return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng); };
  FaultSpec s;
  s.signal = pick(batch);
  s.transaction = s.signal / plan.batch_granularity();
  s.element = pick(plan.length());
  s.stage = pick(plan.stage_count());
  s.part = pick(2) == 0 ? Part::re : Part::im;
  s.bit = static_cast<unsigned>(pick(kBitWidth<Real>));
  return s;
}

// Per-trial generator derived from (seed, trial) only.
inline std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

template <RealScalar Real, typename Rng>
SignalBatch<Real> gaussian_batch(Rng& rng, std::size_t n, std::size_t b) {
  SignalBatch<Real> batch(n, b);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : batch.data()) {
    const double re = dist(rng);
    const double im = dist(rng);
    v = {static_cast<Real>(re), static_cast<Real>(im)};
  }
  return batch;
}

// Trials picked for injection: the first round(fraction * runs) entries of a
// seeded permutation.
inline std::vector<bool> injection_mask(std::size_t runs, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(runs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = trial_stream(seed, ~std::uint64_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto injected = static_cast<std::size_t>(std::llround(fraction * double(runs)));
  std::vector<bool> mask(runs, false);
  for (std::size_t i = 0; i < injected; ++i) mask[order[i]] = true;
  return mask;
}

// ---------------------------------------------------------------------------
// ROC campaign
// ---------------------------------------------------------------------------

struct CampaignConfig {
  std::size_t runs = 2000;
  double injected_fraction = 0.5;
  std::size_t n = 1024;
  std::size_t batch = 1;
  Precision precision = Precision::fp32;
  std::vector<double> deltas;  // empty selects default_delta_sweep
  std::uint64_t seed = 2026;
  std::size_t workers = 1;
  abft::EncodingKind encoding = abft::EncodingKind::wang;
};

/// Four points per decade from well below rounding noise up to 1.
inline std::vector<double> default_delta_sweep(Precision p) {
  const int lo = p == Precision::fp32 ? -10 : -19;
  std::vector<double> out;
  for (int q = 4 * lo; q <= 0; ++q) out.push_back(std::pow(10.0, q / 4.0));
  return out;
}

inline void validate(const CampaignConfig& c) {
  if (c.runs == 0) throw InvalidArgument("campaign needs at least one run");
  if (!(c.injected_fraction >= 0 && c.injected_fraction <= 1))
    throw InvalidArgument("injected fraction must lie in [0, 1]");
  require_supported_length(c.n);
  if (c.batch == 0) throw InvalidArgument("batch count must be at least 1");
  for (double d : c.deltas)
    if (!(d > 0)) throw InvalidArgument("delta sweep values must be positive");
  if (c.encoding == abft::EncodingKind::location) throw InvalidArgument("left-side encoding must be ones, jou or wang");
}

struct RocPoint {
  double delta = 0;
  double detection_rate = 0;
  double false_alarm_rate = 0;
  bool operator==(const RocPoint&) const = default;
};

struct TrialRecord {
  std::size_t trial = 0;
  bool injected = false;
  FaultSpec spec;
  BitClass bit_class = BitClass::mantissa;
  double divergence = 0;  // max left-side divergence over the run's signals
  double induced = 0;     // checksum shift caused by the fault, relative to the same denominator
};

struct CampaignResult {
  std::vector<RocPoint> table;
  std::vector<TrialRecord> trials;
  std::size_t injected_runs = 0;
};

namespace detail {

template <RealScalar Real>
std::vector<abft::SignalCheck<Real>> sweep_checks(const FftPlan<Real>& plan, const abft::LeftChecksumRow<Real>& left,
                                                  const SignalBatch<Real>& batch, Workspace<Real>& ws,
                                                  const StrikeSite<Real>* strike) {
  SignalBatch<Real> out(batch.length(), batch.count());
  std::vector<abft::SignalCheck<Real>> checks;
  for (const auto& txn : transaction_partition(plan, batch)) {
    auto rec = abft::fused_transaction<Real>(plan, left, txn, batch.data(), out.data(), ws, 1.0, strike);
    checks.insert(checks.end(), rec.checks.begin(), rec.checks.end());
  }
  return checks;
}

template <RealScalar Real>
double divergence_of(const abft::SignalCheck<Real>& c) {
  return abft::detect(c.reference, c.observed, 1.0, c.floor()).divergence;
}

}  // namespace detail

inline std::vector<RocPoint> tabulate(const std::vector<TrialRecord>& trials, const std::vector<double>& deltas) {
  std::vector<RocPoint> table;
  for (double d : deltas) {
    std::size_t inj = 0, det = 0, clean = 0, fa = 0;
    for (const auto& t : trials) {
      const bool hit = t.divergence > d;
      if (t.injected) {
        ++inj;
        det += hit;
      } else {
        ++clean;
        fa += hit;
      }
    }
    table.push_back({d, inj ? double(det) / double(inj) : 0.0, clean ? double(fa) / double(clean) : 0.0});
  }
  return table;
}

template <RealScalar Real>
CampaignResult roc_campaign(const CampaignConfig& config) {
  validate(config);
  const auto deltas = config.deltas.empty() ? default_delta_sweep(config.precision) : config.deltas;
  const auto plan = build_plan<Real>(select_params(config.n, config.batch, precision_of<Real>));
  const auto left = abft::precompute_left<Real>(config.encoding, config.n);
  const auto mask = injection_mask(config.runs, config.injected_fraction, config.seed);

  CampaignResult result;
  result.trials.resize(config.runs);
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, config.runs));
  std::vector<Workspace<Real>> spaces(workers);
  parallel_for(config.runs, workers, [&](std::size_t trial, std::size_t w) {
    auto rng = trial_stream(config.seed, trial);
    const auto batch = gaussian_batch<Real>(rng, config.n, config.batch);
    const auto fault = random_fault<Real>(rng, plan, config.batch);
    TrialRecord rec;
    rec.trial = trial;
    rec.injected = mask[trial];
    rec.spec = fault;
    rec.bit_class = bit_class<Real>(fault.bit);

    const auto clean = detail::sweep_checks<Real>(plan, left, batch, spaces[w], nullptr);
    auto run = clean;
    if (rec.injected) {
      FaultInjector<Real> injector(plan, config.batch);
      injector.arm(fault);
      run = detail::sweep_checks<Real>(plan, left, batch, spaces[w], &injector);
      const auto& c = clean[fault.signal];
      const auto& f = run[fault.signal];
      const std::complex<double> shift = f.observed - c.observed;
      const double denom = std::max({double(std::abs(c.reference)), c.floor(), 1e-30});
      rec.induced = std::isfinite(std::abs(shift)) ? std::abs(shift) / denom : std::numeric_limits<double>::infinity();
    }
    for (const auto& c : run) rec.divergence = std::max(rec.divergence, detail::divergence_of(c));
    result.trials[trial] = rec;
  });
  result.injected_runs = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  result.table = tabulate(result.trials, deltas);
  return result;
}

inline CampaignResult roc_campaign(const CampaignConfig& config) {
  return config.precision == Precision::fp32 ? roc_campaign<float>(config) : roc_campaign<double>(config);
}

// ---------------------------------------------------------------------------
// Single-fault repair trials
// ---------------------------------------------------------------------------

struct InjectConfig {
  std::size_t trials = 200;
  double injected_fraction = 1.0;
  std::size_t n = 1024;
  std::size_t batch = 1;
  Precision precision = Precision::fp32;
  double delta = 0;  // 0 selects the precision default
  std::size_t group = 1;
  abft::Mode mode = abft::Mode::fused;
  abft::EncodingKind encoding = abft::EncodingKind::wang;
  std::uint64_t seed = 2026;
  std::size_t workers = 1;
};

struct InjectRecord {
  std::size_t trial = 0;
  bool injected = false;
  unsigned bit = 0;
  bool detected = false;
  bool located_ok = false;
  bool corrected = false;  // repaired, from the checksums or by recomputation
  bool final_ok = false;   // every signal within the plain-transform budget of the clean run
  double divergence = 0;
  bool recomputed = false;
};

/// Output tolerance after a repair: twice the plain-transform budget.
template <RealScalar Real>
double repair_tolerance(std::size_t n) {
  return 32.0 * machine_epsilon<Real> * std::max(1.0, double(log2_exact(n)));
}

template <RealScalar Real>
bool outputs_match(const SignalBatch<Real>& got, const SignalBatch<Real>& clean, double tol) {
  for (std::size_t j = 0; j < clean.count(); ++j)
    if (!(relative_inf_error<Real>(got.signal(j), clean.signal(j)) <= tol)) return false;
  return true;
}

template <RealScalar Real>
std::vector<InjectRecord> inject_campaign(const InjectConfig& config) {
  if (config.trials == 0) throw InvalidArgument("need at least one trial");
  if (!(config.injected_fraction >= 0 && config.injected_fraction <= 1))
    throw InvalidArgument("injected fraction must lie in [0, 1]");
  const auto plan = build_plan<Real>(select_params(config.n, config.batch, precision_of<Real>));
  const auto left = abft::precompute_left<Real>(config.encoding, config.n);
  const auto mask = injection_mask(config.trials, config.injected_fraction, config.seed);
  const double tol = repair_tolerance<Real>(config.n);
  const std::size_t group = config.mode == abft::Mode::per_transaction ? 1 : config.group;

  std::vector<InjectRecord> out(config.trials);
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    auto rng = trial_stream(config.seed, trial);
    const auto batch = gaussian_batch<Real>(rng, config.n, config.batch);
    const auto fault = random_fault<Real>(rng, plan, config.batch);
    const auto clean = execute_plan(plan, batch);
    FaultInjector<Real> injector(plan, config.batch, group);
    InjectRecord rec;
    rec.trial = trial;
    rec.injected = mask[trial];
    rec.bit = fault.bit;
    if (rec.injected) injector.arm(fault);
    abft::ProtectOptions opt{config.delta, group, config.mode, config.workers};
    const auto res = abft::run_protected(plan, batch, left, opt, &injector);
    for (const auto& r : res.reports) {
      if (!r.triggered) continue;
      rec.detected = true;
      rec.divergence = std::max(rec.divergence, r.divergence);
      if (r.located && *r.located == fault.signal) rec.located_ok = true;
      if (r.corrected || r.recomputed) rec.corrected = true;
      if (r.recomputed) rec.recomputed = true;
    }
    rec.final_ok = outputs_match(res.output, clean, tol);
    out[trial] = rec;
  }
  return out;
}

inline std::vector<InjectRecord> inject_campaign(const InjectConfig& config) {
  return config.precision == Precision::fp32 ? inject_campaign<float>(config) : inject_campaign<double>(config);
}

}  // namespace rfft::fault
