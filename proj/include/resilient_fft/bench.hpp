// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Wall-clock and traffic comparison of the plain, fused and offline paths.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "resilient_fft/abft.hpp"
#include "resilient_fft/fault.hpp"
#include "resilient_fft/fft_core.hpp"
#include "resilient_fft/plan.hpp"

namespace rfft::bench {

enum class Mode { plain, fused, offline };

inline const char* to_string(Mode m) noexcept {
  switch (m) {
    case Mode::plain: return "plain";
    case Mode::fused: return "fused";
    case Mode::offline: return "offline";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "plain") return Mode::plain;
  if (s == "fused") return Mode::fused;
  if (s == "offline") return Mode::offline;
  return std::nullopt;
}

struct BenchConfig {
  std::size_t n = 1024;
  std::size_t batch = 256;
  std::size_t group = 1;
  std::size_t reps = 5;
  std::size_t workers = 1;
  std::uint64_t seed = 2026;
  double delta = 0;
  abft::EncodingKind encoding = abft::EncodingKind::wang;
};

struct BenchRow {
  Mode mode = Mode::plain;
  std::size_t n = 0, batch = 0, group = 0;
  double median_ms = 0;
  double data_passes = 0;
  std::size_t verifications = 0;
  std::size_t corrections = 0;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct MismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Times each requested mode on one seeded Gaussian batch. A fused output
/// that differs from the plain one is reported as MismatchError.
template <RealScalar Real>
std::vector<BenchRow> run_bench(const BenchConfig& config, const std::vector<Mode>& modes,
                                const PlanTable& table = PlanTable::builtin()) {
  if (config.reps == 0) throw InvalidArgument("reps must be at least 1");
  if (config.group == 0) throw InvalidArgument("group size T must be at least 1");
  const auto plan = build_plan<Real>(select_params(config.n, config.batch, precision_of<Real>, table));
  auto rng = fault::trial_stream(config.seed, 0);
  const auto batch = fault::gaussian_batch<Real>(rng, config.n, config.batch);
  const auto left = abft::precompute_left<Real>(config.encoding, config.n);
  const auto reference = execute_plan(plan, batch, Direction::forward, {config.workers});
  const abft::ProtectOptions popt{config.delta, config.group, abft::Mode::fused, config.workers};

  std::vector<BenchRow> rows;
  std::vector<std::vector<double>> times(modes.size());
  for (Mode mode : modes) rows.push_back({mode, config.n, config.batch, mode == Mode::fused ? config.group : 1});
  // Modes alternate within each repetition so drifts in machine load hit all
  // of them alike; the first repetition warms up.
  for (std::size_t r = 0; r <= config.reps; ++r) {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const Mode mode = modes[m];
      const auto t0 = std::chrono::steady_clock::now();
      abft::RunCounters counters;
      counters.n = config.n;
      counters.signals = config.batch;
      if (mode == Mode::plain) {
        TrafficCounter traffic;
        const auto out = execute_plan(plan, batch, Direction::forward, {config.workers}, nullptr, &traffic);
        counters.traffic_samples = traffic.value();
      } else if (mode == Mode::fused) {
        const auto res = abft::run_protected(plan, batch, left, popt);
        counters = res.counters;
        if (r == 0 && config.encoding != abft::EncodingKind::jou &&
            !bitwise_equal<Real>(res.output.data(), reference.data()))
          throw MismatchError("fused output differs from the plain transform");
      } else {
        const auto res = abft::run_offline(plan, batch, left, config.delta, config.workers);
        counters = res.counters;
      }
      const auto t1 = std::chrono::steady_clock::now();
      if (r > 0) times[m].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      auto& row = rows[m];
      row.data_passes = counters.data_passes();
      row.verifications = counters.verifications;
      row.corrections = counters.corrections;
    }
  }
  for (std::size_t m = 0; m < modes.size(); ++m) rows[m].median_ms = median(times[m]);
  return rows;
}

}  // namespace rfft::bench
