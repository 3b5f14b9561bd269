// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "resilient_fft/fault.hpp"
#include "test_support.hpp"

namespace {

using namespace rfft;
using namespace rfft::fault;

std::uint32_t bits_of(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

TEST(FlipBit, SignBit) { EXPECT_EQ(flip_bit(1.0f, 31), -1.0f); }

TEST(FlipBit, TopExponentBitOfOneGivesInfinity) {
  const float v = flip_bit(1.0f, 30);
  EXPECT_TRUE(std::isinf(v));
  EXPECT_EQ(bits_of(v), 0x7F800000u);
}

TEST(FlipBit, LowestMantissaBit) { EXPECT_EQ(flip_bit(1.0f, 0), 1.0f + std::ldexp(1.0f, -23)); }

TEST(FlipBit, DoublePrecision) {
  EXPECT_EQ(flip_bit(2.0, 63), -2.0);
  EXPECT_EQ(flip_bit(1.0, 0), 1.0 + std::ldexp(1.0, -52));
  EXPECT_THROW(flip_bit(1.0, 64), InvalidArgument);
  EXPECT_THROW(flip_bit(1.0f, 32), InvalidArgument);
}

TEST(FlipBit, IsAnInvolution) {
  for (float v : {0.0f, -3.5f, 1e-30f, 123456.0f})
    for (unsigned b = 0; b < 32; ++b) EXPECT_EQ(bits_of(flip_bit(flip_bit(v, b), b)), bits_of(v));
}

TEST(BitClass, Boundaries) {
  EXPECT_EQ(bit_class<float>(31), BitClass::sign);
  EXPECT_EQ(bit_class<float>(30), BitClass::exponent);
  EXPECT_EQ(bit_class<float>(23), BitClass::exponent);
  EXPECT_EQ(bit_class<float>(22), BitClass::mantissa);
  EXPECT_EQ(bit_class<double>(63), BitClass::sign);
  EXPECT_EQ(bit_class<double>(52), BitClass::exponent);
  EXPECT_EQ(bit_class<double>(51), BitClass::mantissa);
}

FftPlan<float> plan_bs(std::size_t n, std::size_t bs) {
  auto p = select_params(n, 1, Precision::fp32);
  p.bs = bs;
  return build_plan<float>(p);
}

TEST(FaultInjector, ArmValidatesRanges) {
  const auto plan = plan_bs(64, 4);
  FaultInjector<float> inj(plan, 10);
  EXPECT_THROW(inj.arm({0, 10, 0, 0, Part::re, 0}), InvalidArgument);   // signal
  EXPECT_THROW(inj.arm({1, 2, 0, 0, Part::re, 0}), InvalidArgument);    // txn does not hold signal
  EXPECT_THROW(inj.arm({0, 0, 64, 0, Part::re, 0}), InvalidArgument);   // element
  EXPECT_THROW(inj.arm({0, 0, 0, 1, Part::re, 0}), InvalidArgument);    // stage
  EXPECT_THROW(inj.arm({0, 0, 0, 0, Part::re, 32}), InvalidArgument);   // bit
  EXPECT_NO_THROW(inj.arm({2, 9, 63, 0, Part::im, 31}));
}

TEST(FaultInjector, SeuGuardRejectsSecondFaultInInterval) {
  const auto plan = plan_bs(64, 2);
  FaultInjector<float> inj(plan, 16, 2);
  inj.arm({0, 0, 0, 0, Part::re, 1});
  EXPECT_THROW(inj.arm({1, 3, 0, 0, Part::re, 1}), InvalidArgument);  // same group of 2
  EXPECT_NO_THROW(inj.arm({2, 4, 0, 0, Part::re, 1}));
  FaultInjector<float> multi(plan, 16, 2, false);
  multi.arm({0, 0, 0, 0, Part::re, 1});
  EXPECT_NO_THROW(multi.arm({0, 1, 0, 0, Part::re, 1}));
}

TEST(FaultInjector, UnarmedIsBitwiseClean) {
  const auto plan = plan_bs(1024, 4);
  const auto x = rfft::testing::random_batch<float>(1024, 8, 1);
  FaultInjector<float> inj(plan, 8);
  EXPECT_TRUE(bitwise_equal<float>(execute_plan(plan, x, Direction::forward, {}, &inj).data(),
                                   execute_plan(plan, x).data()));
}

TEST(FaultInjector, FiresExactlyOnce) {
  const auto plan = build_plan<float>(select_params(1u << 17, 4, Precision::fp32));
  const auto x = rfft::testing::random_batch<float>(1u << 17, 1, 2);
  FaultInjector<float> inj(plan, 1);
  inj.arm({0, 0, 5, 1, Part::re, 30});
  EXPECT_FALSE(inj.fired(0));
  const auto y1 = execute_plan(plan, x, Direction::forward, {}, &inj);
  EXPECT_TRUE(inj.fired(0));
  EXPECT_EQ(inj.fired_count(), 1u);
  const auto y2 = execute_plan(plan, x, Direction::forward, {}, &inj);
  EXPECT_TRUE(bitwise_equal<float>(y2.data(), execute_plan(plan, x).data()));
  EXPECT_FALSE(bitwise_equal<float>(y1.data(), y2.data()));
  inj.rearm();
  EXPECT_FALSE(inj.fired(0));
  EXPECT_TRUE(bitwise_equal<float>(execute_plan(plan, x, Direction::forward, {}, &inj).data(), y1.data()));
}

TEST(FaultInjector, OnlyTargetSignalChanges) {
  const auto plan = plan_bs(256, 4);
  const auto x = rfft::testing::random_batch<float>(256, 8, 3);
  FaultInjector<float> inj(plan, 8);
  inj.arm({1, 6, 10, 0, Part::re, 29});
  const auto clean = execute_plan(plan, x);
  const auto hit = execute_plan(plan, x, Direction::forward, {}, &inj);
  for (std::size_t j = 0; j < 8; ++j)
    EXPECT_EQ(bitwise_equal<float>(hit.signal(j), clean.signal(j)), j != 6) << j;
}

// A stage-0 flip of an impulse perturbs one input sample; the transform
// spreads it to every output bin.
TEST(ErrorPropagation, StageZeroFlipCorruptsAllBins) {
  for (std::size_t n : {8u, 1024u, 1u << 17}) {
    const auto plan = build_plan<float>(select_params(n, 1, Precision::fp32));
    SignalBatch<float> x(n, 1);
    x.data()[0] = 1;
    FaultInjector<float> inj(plan, 1);
    inj.arm({0, 0, n / 2 + 1, 0, Part::re, 30});  // 0.0f becomes 2.0f
    const auto clean = execute_plan(plan, x);
    const auto hit = execute_plan(plan, x, Direction::forward, {}, &inj);
    std::size_t changed = 0;
    for (std::size_t k = 0; k < n; ++k) changed += hit.data()[k] != clean.data()[k];
    EXPECT_GE(changed, n / 2) << n;
  }
}

TEST(RandomFault, SitesAreInRange) {
  const auto plan = build_plan<double>(select_params(1u << 14, 5, Precision::fp64));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto f = random_fault<double>(rng, plan, 5);
    EXPECT_LT(f.signal, 5u);
    EXPECT_EQ(f.transaction, f.signal / plan.batch_granularity());
    EXPECT_LT(f.element, plan.length());
    EXPECT_LT(f.stage, plan.stage_count());
    EXPECT_LT(f.bit, 64u);
  }
}

TEST(InjectionMask, ExactFractionAndDeterministic) {
  const auto a = injection_mask(2000, 0.5, 9);
  EXPECT_EQ(std::count(a.begin(), a.end(), true), 1000);
  EXPECT_EQ(a, injection_mask(2000, 0.5, 9));
  EXPECT_NE(a, injection_mask(2000, 0.5, 10));
  const auto none = injection_mask(10, 0.0, 1);
  EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
}

CampaignConfig small_campaign() {
  CampaignConfig c;
  c.runs = 300;
  c.n = 256;
  c.batch = 2;
  c.seed = 99;
  return c;
}

bool same_table(const std::vector<RocPoint>& a, const std::vector<RocPoint>& b) { return a == b; }

TEST(RocCampaign, ReproducibleAndWorkerIndependent) {
  auto c = small_campaign();
  const auto a = roc_campaign(c);
  const auto b = roc_campaign(c);
  c.workers = 3;
  const auto p = roc_campaign(c);
  EXPECT_TRUE(same_table(a.table, b.table));
  EXPECT_TRUE(same_table(a.table, p.table));
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].divergence, p.trials[i].divergence);
    EXPECT_EQ(a.trials[i].induced, p.trials[i].induced);
  }
  EXPECT_EQ(a.injected_runs, 150u);
}

TEST(RocCampaign, MonotoneAndDominant) {
  for (auto prec : {Precision::fp32, Precision::fp64}) {
    auto c = small_campaign();
    c.precision = prec;
    const auto r = roc_campaign(c);
    for (std::size_t i = 0; i < r.table.size(); ++i) {
      EXPECT_GE(r.table[i].detection_rate, r.table[i].false_alarm_rate) << i;
      if (i > 0) {
        EXPECT_LE(r.table[i].detection_rate, r.table[i - 1].detection_rate);
        EXPECT_LE(r.table[i].false_alarm_rate, r.table[i - 1].false_alarm_rate);
      }
    }
  }
}

TEST(RocCampaign, ThresholdLimits) {
  auto c = small_campaign();
  c.deltas = {1e-30, 1e300};
  const auto r = roc_campaign(c);
  EXPECT_EQ(r.table[0].false_alarm_rate, 1.0);
  EXPECT_EQ(r.table[1].false_alarm_rate, 0.0);
  // Non-finite divergences count as detected at every threshold.
  std::size_t inf = 0;
  for (const auto& t : r.trials) inf += t.injected && std::isinf(t.divergence);
  EXPECT_GT(inf, 0u);
  EXPECT_GE(r.table[1].detection_rate, double(inf) / double(r.injected_runs));
}

TEST(RocCampaign, ConditionalDetection) {
  auto c = small_campaign();
  c.runs = 400;
  const auto r = roc_campaign(c);
  const double delta = abft::default_delta<float>;
  std::size_t strong = 0, caught = 0;
  for (const auto& t : r.trials) {
    if (!t.injected || !(t.induced >= 10 * delta)) continue;
    ++strong;
    caught += t.divergence > delta;
  }
  ASSERT_GT(strong, 30u);
  EXPECT_GE(double(caught) / double(strong), 0.99);
}

TEST(RocCampaign, ValidatesConfig) {
  auto c = small_campaign();
  c.injected_fraction = 1.5;
  EXPECT_THROW(roc_campaign(c), InvalidArgument);
  c = small_campaign();
  c.deltas = {1e-3, -1};
  EXPECT_THROW(roc_campaign(c), InvalidArgument);
  c = small_campaign();
  c.n = 12;
  EXPECT_THROW(roc_campaign(c), UnsupportedLength);
}

TEST(Tabulate, CountsStrictExceedance) {
  std::vector<TrialRecord> t(4);
  t[0].injected = true;
  t[0].divergence = 1e-2;
  t[1].injected = true;
  t[1].divergence = 1e-6;
  t[2].divergence = 1e-6;
  t[3].divergence = 1e-9;
  const auto table = tabulate(t, {1e-8, 1e-6, 1e-3});
  EXPECT_EQ(table[0], (RocPoint{1e-8, 1.0, 0.5}));
  EXPECT_EQ(table[1], (RocPoint{1e-6, 0.5, 0.0}));
  EXPECT_EQ(table[2], (RocPoint{1e-3, 0.5, 0.0}));
}

TEST(InjectCampaign, RateZeroIsClean) {
  InjectConfig c;
  c.trials = 20;
  c.injected_fraction = 0;
  c.n = 256;
  c.batch = 4;
  for (const auto& r : inject_campaign(c)) {
    EXPECT_FALSE(r.injected);
    EXPECT_FALSE(r.detected);
    EXPECT_TRUE(r.final_ok);
  }
}

TEST(InjectCampaign, DetectedTrialsEndCorrect) {
  InjectConfig c;
  c.trials = 100;
  c.n = 1024;
  c.batch = 8;
  c.group = 2;
  std::size_t detected = 0;
  for (const auto& r : inject_campaign(c)) {
    if (!r.detected) continue;
    ++detected;
    EXPECT_TRUE(r.corrected) << r.trial;
    EXPECT_TRUE(r.final_ok) << r.trial;
  }
  EXPECT_GT(detected, 20u);
}

TEST(InjectCampaign, Deterministic) {
  InjectConfig c;
  c.trials = 30;
  c.n = 128;
  c.batch = 3;
  const auto a = inject_campaign(c), b = inject_campaign(c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].bit, b[i].bit);
    EXPECT_EQ(a[i].detected, b[i].detected);
    EXPECT_EQ(a[i].divergence, b[i].divergence);
    EXPECT_EQ(a[i].final_ok, b[i].final_ok);
  }
}

}  // namespace

double relative_l2_error(std::span<const Complex<float>> y, std::span<const Complex<float>> ref) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += std::norm(std::complex<double>(y[i]) - std::complex<double>(ref[i]));
    den += std::norm(std::complex<double>(ref[i]));
  }
  return std::sqrt(num / den);
}

// An error sitting in one output element moves the Wang checksum by exactly
// its magnitude. Undetected, it is at most delta times the detection
// denominator max(|e^T y|, ||x||).
TEST(SubThreshold, OutputResidentErrorsStayWithinDelta) {
  const std::size_t n = 1024;
  const auto plan = build_plan<float>(select_params(n, 1, Precision::fp32));
  const auto left = abft::precompute_left<float>(abft::EncodingKind::wang, n);
  const double delta = abft::default_delta<float>;
  auto rng = trial_stream(41, 0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi);
  for (int t = 0; t < 200; ++t) {
    const auto x = gaussian_batch<float>(rng, n, 1);
    const auto clean = execute_plan(plan, x);
    const auto c0 = abft::check_signal<float>(left, x.signal(0), clean.signal(0), delta);
    const double denom = std::max(std::abs(c0.reference), c0.floor());
    const double norm = abft::detail::norm2<float>(clean.signal(0));
    for (double scale : {0.5, 2.0}) {
      auto y = clean;
      const std::size_t k = pick(rng);
      y.data()[k] += std::polar(float(scale * delta * denom), float(phase(rng)));
      const auto c = abft::check_signal<float>(left, x.signal(0), y.signal(0), delta);
      const double err = relative_l2_error(y.signal(0), clean.signal(0));
      EXPECT_EQ(c.detection.triggered, scale > 1) << t;
      if (scale < 1) {
        EXPECT_LE(err, 1.01 * delta * denom / norm) << t;
      }
    }
  }
}

// Divergence is the projection of the output error on the encoding vector,
// so a fault that spreads over many outputs can hide more than delta of
// error. The shift is rechecked against a double-precision e^T (y' - y).
TEST(SubThreshold, DivergenceIsTheChecksumProjectionOfTheError) {
  const std::size_t n = 1024, b = 4;
  const auto plan = build_plan<float>(select_params(n, b, Precision::fp32));
  const auto left = abft::precompute_left<float>(abft::EncodingKind::wang, n);
  const auto e = rfft::testing::widen<float>(left.encoding.values);
  Workspace<float> ws;
  std::size_t hidden_above_delta = 0;
  for (int t = 0; t < 300; ++t) {
    auto rng = trial_stream(43, t);
    const auto x = gaussian_batch<float>(rng, n, b);
    const auto spec = random_fault<float>(rng, plan, b);
    const auto clean = execute_plan(plan, x);
    FaultInjector<float> injector(plan, b);
    injector.arm(spec);
    SignalBatch<float> out(n, b);
    abft::TransactionRecord<float> rec;
    for (const auto& txn : transaction_partition(plan, x))
      if (txn.index == spec.transaction)
        abft::fused_transaction<float>(plan, left, txn, x.data(), out.data(), ws, 1.0, rec, &injector);
    const auto& c = rec.checks[spec.signal - rec.txn.first_signal];
    const std::span<const Complex<float>> y = out.signal(spec.signal), y0 = clean.signal(spec.signal);
    std::complex<double> proj{};
    double scale = 0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const std::complex<double> d = std::complex<double>(y[i]) - std::complex<double>(y0[i]);
      finite &= std::isfinite(d.real()) && std::isfinite(d.imag());
      proj += e[i] * d;
      scale += std::abs(std::complex<double>(y[i])) + std::abs(std::complex<double>(y0[i]));
    }
    if (!finite) continue;
    const std::complex<double> shift = c.observed - c.reference;
    EXPECT_LE(std::abs(shift - proj), 1e-6 * scale + 1e-30) << t;
    const double div = abft::detect(c.reference, c.observed, 1.0, c.floor()).divergence;
    if (div <= abft::default_delta<float> && relative_l2_error(y, y0) > abft::default_delta<float>)
      ++hidden_above_delta;
  }
  // Early-stage faults routinely land here; the count is informational.
  RecordProperty("hidden_above_delta", static_cast<int>(hidden_above_delta));
}
