// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Built-in self-test: oracle equivalence, checksum identity and
// single-error repair on small sizes.

#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "resilient_fft/abft.hpp"
#include "resilient_fft/dft_oracle.hpp"
#include "resilient_fft/fault.hpp"
#include "resilient_fft/fft_core.hpp"
#include "resilient_fft/plan.hpp"

namespace rfft::selftest {

struct Options {
  bool quick = false;              // N <= 256 only
  bool mutate_twiddle = false;     // perturb one twiddle per plan; the run must then fail
  std::size_t max_log2 = 12;
  std::size_t repair_trials = 40;
  PlanTable table = PlanTable::builtin();
};

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0;  // worst error relative to its tolerance
};

inline double fft_tolerance(double eps, std::size_t n) { return 16.0 * eps * std::max(1.0, double(log2_exact(n))); }

template <RealScalar Real>
FftPlan<Real> selftest_plan(std::size_t n, std::size_t b, const Options& opt) {
  auto plan = build_plan<Real>(select_params(n, b, precision_of<Real>, opt.table));
  if (opt.mutate_twiddle) {
    // Perturb the last entry of the first table with more than one entry.
    for (std::size_t s = 0; s < plan.stage_count(); ++s) {
      const auto& tw = plan.stages()[s].twiddles;
      if (tw.size() > 1) {
        debug_perturb_twiddle(plan, s, tw.size() - 1, Complex<Real>(Real(1e-3), Real(0)));
        break;
      }
    }
    if (n == 2) debug_perturb_twiddle(plan, 0, 0, Complex<Real>(Real(1e-3), Real(0)));
  }
  return plan;
}

template <RealScalar Real>
void oracle_suite(const Options& opt, SuiteResult& res) {
  const std::size_t top = opt.quick ? 8 : opt.max_log2;
  for (std::size_t k = 1; k <= top; ++k) {
    const std::size_t n = std::size_t{1} << k;
    for (std::size_t b : {std::size_t{1}, std::size_t{3}}) {
      const auto plan = selftest_plan<Real>(n, b, opt);
      auto rng = fault::trial_stream(17, k * 8 + b);
      const auto batch = fault::gaussian_batch<Real>(rng, n, b);
      const auto out = execute_plan(plan, batch);
      const double tol = fft_tolerance(machine_epsilon<Real>, n);
      for (std::size_t j = 0; j < b; ++j) {
        const auto ref = oracle::dft_naive<Real>(batch.signal(j));
        const double err = relative_inf_error<Real>(out.signal(j), ref);
        ++res.cases;
        res.worst = std::max(res.worst, err / tol);
        if (!(err <= tol)) ++res.failures;
      }
    }
  }
}

template <RealScalar Real>
void checksum_suite(const Options& opt, SuiteResult& res) {
  const std::size_t top = opt.quick ? 8 : opt.max_log2;
  for (auto kind : {abft::EncodingKind::ones, abft::EncodingKind::wang}) {
    for (std::size_t k = 1; k <= top; ++k) {
      const std::size_t n = std::size_t{1} << k;
      const auto plan = selftest_plan<Real>(n, 1, opt);
      const auto left = abft::precompute_left<Real>(kind, n);
      auto rng = fault::trial_stream(23, k);
      const auto batch = fault::gaussian_batch<Real>(rng, n, 1);
      const auto y = execute_plan(plan, batch);
      std::complex<double> lhs{}, rhs{};
      for (std::size_t i = 0; i < n; ++i) {
        const auto e = left.encoding.values[i];
        lhs += std::complex<double>(e.real(), e.imag()) * std::complex<double>(y.data()[i].real(), y.data()[i].imag());
        rhs += std::complex<double>(left.values[i].real(), left.values[i].imag()) *
               std::complex<double>(batch.data()[i].real(), batch.data()[i].imag());
      }
      const double scale = std::max(std::abs(rhs), std::sqrt(double(n)) * abft::detail::norm2<Real>(batch.data()));
      const double err = std::abs(lhs - rhs) / scale;
      const double tol = 2 * fft_tolerance(machine_epsilon<Real>, n);
      ++res.cases;
      res.worst = std::max(res.worst, err / tol);
      if (!(err <= tol)) ++res.failures;
    }
  }
}

template <RealScalar Real>
void repair_suite(const Options& opt, SuiteResult& res) {
  const std::size_t n = opt.quick ? 256 : 1024;
  const std::size_t b = 8;
  const auto plan = selftest_plan<Real>(n, b, opt);
  const auto left = abft::precompute_left<Real>(abft::EncodingKind::wang, n);
  const double tol = fault::repair_tolerance<Real>(n);
  const double delta = abft::default_delta<Real>;
  for (std::size_t t = 0; t < opt.repair_trials; ++t) {
    auto rng = fault::trial_stream(29, t);
    const auto batch = fault::gaussian_batch<Real>(rng, n, b);
    const auto spec = fault::random_fault<Real>(rng, plan, b);
    // The clean reference comes from the oracle, so a broken kernel cannot
    // agree with itself.
    fault::FaultInjector<Real> injector(plan, b);
    injector.arm(spec);
    ++res.cases;
    try {
      const auto run = abft::run_protected(plan, batch, left, {delta, 1}, &injector);
      bool detected = false;
      for (const auto& r : run.reports) detected = detected || r.triggered;
      if (!detected) continue;
      for (std::size_t j = 0; j < b; ++j) {
        const double err = relative_inf_error<Real>(run.output.signal(j), oracle::dft_naive<Real>(batch.signal(j)));
        const double budget = tol + fft_tolerance(machine_epsilon<Real>, n);
        res.worst = std::max(res.worst, err / budget);
        if (!(err <= budget)) {
          ++res.failures;
          break;
        }
      }
    } catch (const PersistentFault&) {
      ++res.failures;
    }
  }
}

inline std::vector<SuiteResult> run(const Options& opt, std::ostream& log) {
  std::vector<SuiteResult> out;
  auto suite = [&](const std::string& name, auto&& body) {
    SuiteResult r{name};
    body(r);
    log << (r.failures == 0 ? "PASS " : "FAIL ") << name << ": " << r.cases << " cases, " << r.failures
        << " failures, worst/tol " << r.worst << "\n";
    out.push_back(r);
  };
  suite("oracle-equivalence single", [&](SuiteResult& r) { oracle_suite<float>(opt, r); });
  suite("oracle-equivalence double", [&](SuiteResult& r) { oracle_suite<double>(opt, r); });
  suite("checksum-identity single", [&](SuiteResult& r) { checksum_suite<float>(opt, r); });
  suite("checksum-identity double", [&](SuiteResult& r) { checksum_suite<double>(opt, r); });
  suite("single-error-repair single", [&](SuiteResult& r) { repair_suite<float>(opt, r); });
  suite("single-error-repair double", [&](SuiteResult& r) { repair_suite<double>(opt, r); });
  return out;
}

inline bool passed(const std::vector<SuiteResult>& results) {
  for (const auto& r : results)
    if (r.failures) return false;
  return !results.empty();
}

}  // namespace rfft::selftest
