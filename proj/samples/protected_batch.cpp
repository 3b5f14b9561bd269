// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Protects a batch of 64 transforms, flips one bit in the middle of the
// computation, and shows the repair.

#include <cstdio>

#include "resilient_fft/resilient_fft.hpp"

int main() {
  using namespace rfft;
  constexpr std::size_t n = 1024, b = 64;

  auto rng = fault::trial_stream(1, 0);
  const auto batch = fault::gaussian_batch<float>(rng, n, b);
  const auto plan = build_plan<float>(select_params(n, b, Precision::fp32));
  const auto left = abft::precompute_left<float>(abft::EncodingKind::wang, n);
  const auto clean = execute_plan(plan, batch);

  // Exponent bit of signal 37, element 100, as stage 0 starts.
  fault::FaultInjector<float> injector(plan, b, /*group=*/8);
  injector.arm({37 / plan.batch_granularity(), 37, 100, 0, fault::Part::re, 27});

  const auto run = abft::run_protected(plan, batch, left, {0, 8}, &injector);
  for (const auto& r : run.reports) {
    if (!r.triggered) continue;
    std::printf("verification %zu: signal %zu diverged by %.3g, %s\n", r.verification, r.located.value_or(0),
                r.divergence, r.corrected ? "repaired from checksums" : "recomputed");
  }
  std::printf("verifications %zu, data passes %.2f, max error vs clean run %.3g\n", run.counters.verifications,
              run.counters.data_passes(), relative_inf_error<float>(run.output.data(), clean.data()));
  return 0;
}
