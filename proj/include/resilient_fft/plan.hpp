// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Plan parameter selection: a curated table keyed by N, a balanced-split
// fallback, and a measuring autotuner. Table records are
//
//   N N1 N2 N3 n1 n2 n3 bs
//
// with '-' for absent stages and '#' starting a comment.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "resilient_fft/common.hpp"
#include "resilient_fft/fft_core.hpp"

namespace rfft {

/// The seven code-generation parameters: up to three stage spans, their
/// micro radices and the batch granularity bs.
struct PlanParams {
  std::vector<std::size_t> spans;
  std::vector<std::size_t> radices;
  std::size_t bs = 1;

  std::size_t length() const {
    std::size_t n = 1;
    for (auto s : spans) n *= s;
    return n;
  }
  std::size_t stage_count() const noexcept { return spans.size(); }

  bool operator==(const PlanParams&) const = default;
};

inline PlanSkeleton to_skeleton(const PlanParams& p, std::size_t n) {
  if (p.spans.size() != p.radices.size()) throw InvalidArgument("plan params need one radix per stage");
  PlanSkeleton sk{n, {}, p.bs};
  for (std::size_t i = 0; i < p.spans.size(); ++i) sk.stages.push_back({p.spans[i], p.radices[i]});
  return sk;
}

inline void validate_params(const PlanParams& p, std::size_t n) { validate_skeleton(to_skeleton(p, n)); }

inline std::string format_params(const PlanParams& p) {
  std::ostringstream os;
  os << p.length();
  for (std::size_t i = 0; i < 3; ++i) os << ' ' << (i < p.spans.size() ? std::to_string(p.spans[i]) : "-");
  for (std::size_t i = 0; i < 3; ++i) os << ' ' << (i < p.radices.size() ? std::to_string(p.radices[i]) : "-");
  os << ' ' << p.bs;
  return os.str();
}

/// Number of kernel stages used for a length: one up to 2^13, two up to 2^22,
/// three beyond.
inline std::size_t stage_regime(std::size_t n) {
  const unsigned k = log2_exact(n);
  return k <= 13 ? 1 : (k <= 22 ? 2 : 3);
}

class PlanTable {
 public:
  PlanTable() = default;

  /// Tesla T4 kernel parameters.
  static PlanTable builtin() {
    PlanTable t;
    t.insert({{1u << 10}, {8}, 1});
    t.insert({{1u << 8, 1u << 9}, {16, 16}, 8});
    t.insert({{1u << 8, 1u << 7, 1u << 8}, {16, 16, 16}, 16});
    return t;
  }

  static PlanTable parse(std::istream& in, const std::string& source = "<plan table>") {
    PlanTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::vector<std::string> tok;
      for (std::string f; fields >> f;) tok.push_back(f);
      if (tok.empty()) continue;
      auto fail = [&](const std::string& why) {
        throw InvalidArgument(source + ":" + std::to_string(lineno) + ": " + why);
      };
      if (tok.size() != 8) fail("expected 8 fields 'N N1 N2 N3 n1 n2 n3 bs'");
      auto number = [&](const std::string& s) -> std::optional<std::size_t> {
        if (s == "-") return std::nullopt;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
          v = std::stoull(s, &pos);
        } catch (const std::exception&) {
          fail("not a number: '" + s + "'");
        }
        if (pos != s.size()) fail("not a number: '" + s + "'");
        return static_cast<std::size_t>(v);
      };
      const auto n = number(tok[0]);
      const auto bs = number(tok[7]);
      if (!n || !bs) fail("N and bs are required");
      PlanParams p;
      p.bs = *bs;
      for (std::size_t i = 0; i < 3; ++i) {
        const auto span = number(tok[1 + i]);
        const auto radix = number(tok[4 + i]);
        if (span.has_value() != radix.has_value()) fail("stage span and micro radix must both be present or absent");
        if (!span) continue;
        if (p.spans.size() != i) fail("absent stages must come last");
        p.spans.push_back(*span);
        p.radices.push_back(*radix);
      }
      try {
        validate_params(p, *n);
      } catch (const InvalidArgument& e) {
        fail(e.what());
      }
      t.insert(p);
    }
    return t;
  }

  static PlanTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open plan table '" + path + "'");
    return parse(in, path);
  }

  void insert(const PlanParams& p) { entries_[p.length()] = p; }

  std::optional<PlanParams> find(std::size_t n) const {
    if (auto it = entries_.find(n); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::size_t, PlanParams> entries_;
};

/// Built-in table unless a path is given; RESILIENT_FFT_PLAN_TABLE is the
/// fallback source for the path.
inline PlanTable resolve_plan_table(const std::string& path = {}) {
  if (!path.empty()) return PlanTable::load(path);
  if (const char* env = std::getenv("RESILIENT_FFT_PLAN_TABLE"); env && *env) return PlanTable::load(env);
  return PlanTable::builtin();
}

/// Most balanced split of n into the regime's stage count, larger spans first.
inline PlanParams fallback_params(std::size_t n, Precision precision) {
  require_supported_length(n);
  const unsigned k = log2_exact(n);
  const std::size_t stages = stage_regime(n);
  PlanParams p;
  for (std::size_t i = 0; i < stages; ++i) {
    const unsigned bits = static_cast<unsigned>(k / stages + (i < k % stages ? 1 : 0));
    const std::size_t span = std::size_t{1} << bits;
    p.spans.push_back(span);
    p.radices.push_back(std::min<std::size_t>(16, span));
  }
  const std::size_t budget = (std::size_t{1} << 20) / (n * bytes_per_sample(precision));
  p.bs = std::clamp<std::size_t>(budget, 1, 32);
  return p;
}

inline PlanParams select_params(std::size_t n, std::size_t batch, Precision precision,
                                const PlanTable& table = PlanTable::builtin()) {
  require_supported_length(n);
  if (batch == 0) throw InvalidArgument("batch count must be at least 1");
  if (auto hit = table.find(n)) return *hit;
  return fallback_params(n, precision);
}

template <RealScalar Real>
FftPlan<Real> build_plan(const PlanParams& params) {
  return make_twiddles<Real>(to_skeleton(params, params.length()));
}

// ---------------------------------------------------------------------------
// Autotuning
// ---------------------------------------------------------------------------

/// Candidate generator: balanced and skewed splits for 1..3 stages within the
/// regime rules, radices {4, 8, 16, 32} where they fit, bs in {1, 4, 8, 16}.
inline std::vector<PlanParams> candidate_space(std::size_t n) {
  require_supported_length(n);
  const unsigned k = log2_exact(n);
  std::vector<std::vector<unsigned>> splits;
  const std::size_t regime = stage_regime(n);
  for (std::size_t stages = std::max<std::size_t>(1, regime - 1); stages <= std::min<std::size_t>(3, regime + 1);
       ++stages) {
    if (stages > k) continue;
    if (stages == 1) splits.push_back({k});
    if (stages == 2)
      for (unsigned a = (k + 1) / 2; a + 1 <= k && a <= (k + 1) / 2 + 1; ++a) splits.push_back({a, k - a});
    if (stages == 3 && k >= 3) {
      const unsigned base = k / 3;
      splits.push_back({k - 2 * base, base, base});
    }
  }
  std::vector<PlanParams> out;
  for (const auto& split : splits) {
    for (std::size_t radix : {4u, 8u, 16u, 32u}) {
      PlanParams p;
      for (unsigned bits : split) {
        const std::size_t span = std::size_t{1} << bits;
        p.spans.push_back(span);
        p.radices.push_back(std::min(radix, span));
      }
      for (std::size_t bs : {1u, 4u, 8u, 16u}) {
        p.bs = bs;
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
      }
    }
  }
  return out;
}

/// (fewer stages, larger bs, lexicographically smaller radices) wins a tie.
inline bool tie_break_less(const PlanParams& a, const PlanParams& b) {
  if (a.stage_count() != b.stage_count()) return a.stage_count() < b.stage_count();
  if (a.bs != b.bs) return a.bs > b.bs;
  return std::lexicographical_compare(a.radices.begin(), a.radices.end(), b.radices.begin(), b.radices.end());
}

struct TuneMeasurement {
  PlanParams params;
  double median_ms = 0;
};

// Called once per run; the first call per candidate is a warm-up.
using PlanTimer = std::function<double(const PlanParams&)>;

template <RealScalar Real>
PlanTimer wall_clock_timer(std::size_t n, std::size_t batch, std::uint64_t seed = 7) {
  auto data = std::make_shared<SignalBatch<Real>>(n, batch);
  std::mt19937_64 gen(seed);
  std::normal_distribution<Real> dist;
  for (auto& v : data->data()) v = {dist(gen), dist(gen)};
  return [data](const PlanParams& p) {
    const auto plan = build_plan<Real>(p);
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = execute_plan(plan, *data);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };
}

inline std::vector<TuneMeasurement> measure_candidates(const std::vector<PlanParams>& candidates,
                                                       std::size_t repetitions, const PlanTimer& timer) {
  if (candidates.empty()) throw InvalidArgument("autotune: empty candidate space");
  if (repetitions == 0) throw InvalidArgument("autotune: repetitions must be at least 1");
  std::vector<TuneMeasurement> out;
  for (const auto& c : candidates) {
    validate_params(c, c.length());
    timer(c);  // warm-up, excluded
    std::vector<double> t;
    for (std::size_t r = 0; r < repetitions; ++r) t.push_back(timer(c));
    std::sort(t.begin(), t.end());
    const double median = t.size() % 2 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
    out.push_back({c, median});
  }
  return out;
}

inline PlanParams pick_fastest(const std::vector<TuneMeasurement>& m) {
  if (m.empty()) throw InvalidArgument("autotune: no measurements");
  auto best = m.begin();
  for (auto it = m.begin() + 1; it != m.end(); ++it) {
    if (it->median_ms < best->median_ms || (it->median_ms == best->median_ms && tie_break_less(it->params, best->params)))
      best = it;
  }
  return best->params;
}

inline PlanParams autotune(std::size_t n, const std::vector<PlanParams>& candidates, std::size_t repetitions,
                           const PlanTimer& timer) {
  for (const auto& c : candidates)
    if (c.length() != n) throw InvalidArgument("autotune: candidate length does not match n");
  return pick_fastest(measure_candidates(candidates, repetitions, timer));
}

template <RealScalar Real>
PlanParams autotune(std::size_t n, std::size_t batch, const std::vector<PlanParams>& candidates,
                    std::size_t repetitions) {
  return autotune(n, candidates, repetitions, wall_clock_timer<Real>(n, batch));
}

}  // namespace rfft
