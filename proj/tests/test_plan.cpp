// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "resilient_fft/plan.hpp"
#include "test_support.hpp"

namespace {

using namespace rfft;

TEST(SelectParams, TableRowOne) {
  const auto p = select_params(1u << 10, 1, Precision::fp32);
  EXPECT_EQ(p, (PlanParams{{1024}, {8}, 1}));
}

TEST(SelectParams, TableRowTwo) {
  const auto p = select_params(1u << 17, 24, Precision::fp32);
  EXPECT_EQ(p, (PlanParams{{256, 512}, {16, 16}, 8}));
}

TEST(SelectParams, TableRowThree) {
  const auto p = select_params(1u << 23, 1, Precision::fp64);
  EXPECT_EQ(p, (PlanParams{{256, 128, 256}, {16, 16, 16}, 16}));
}

TEST(SelectParams, RejectsBadInput) {
  EXPECT_THROW(select_params(12, 1, Precision::fp32), UnsupportedLength);
  EXPECT_THROW(select_params(1, 1, Precision::fp32), UnsupportedLength);
  EXPECT_THROW(select_params(1024, 0, Precision::fp32), InvalidArgument);
}

TEST(SelectParams, FallbackFollowsStageRegimes) {
  for (std::size_t k = 1; k <= 29; ++k) {
    const std::size_t n = std::size_t{1} << k;
    for (auto prec : {Precision::fp32, Precision::fp64}) {
      const auto p = fallback_params(n, prec);
      EXPECT_EQ(p.length(), n);
      EXPECT_EQ(p.stage_count(), k <= 13 ? 1u : (k <= 22 ? 2u : 3u)) << k;
      EXPECT_TRUE(std::is_sorted(p.spans.rbegin(), p.spans.rend())) << k;
      EXPECT_NO_THROW(validate_params(p, n));
    }
  }
}

TEST(SelectParams, EveryCuratedRowIsValid) {
  const auto t = PlanTable::builtin();
  EXPECT_EQ(t.size(), 3u);
  for (std::size_t k : {10u, 17u, 23u}) {
    const std::size_t n = std::size_t{1} << k;
    const auto p = t.find(n);
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->stage_count(), stage_regime(n));
    EXPECT_EQ(build_plan<float>(*p).length(), n);
  }
}

TEST(PlanTable, ParseHandlesCommentsAndDashes) {
  std::istringstream in(
      "# header\n"
      "\n"
      "64 64 - - 4 - - 2   # trailing\n"
      "16384 128 128 - 16 8 - 4\n");
  const auto t = PlanTable::parse(in);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(*t.find(64), (PlanParams{{64}, {4}, 2}));
  EXPECT_EQ(*t.find(16384), (PlanParams{{128, 128}, {16, 8}, 4}));
  EXPECT_FALSE(t.find(128).has_value());
}

TEST(PlanTable, ParseRejectsMalformedRows) {
  for (const char* bad : {
           "64 64 - - 4 - -\n",          // 7 fields
           "64 64 - - 4 - - x\n",        // bad number
           "64 32 - - 4 - - 1\n",        // product mismatch
           "64 64 - - - - - 1\n",        // span without radix
           "64 - 64 - - 4 - 1\n",        // gap before a stage
           "64 64 - - 64 - - 1\n",       // unsupported radix
           "- 64 - - 4 - - 1\n",         // missing N
       }) {
    std::istringstream in(bad);
    EXPECT_THROW(PlanTable::parse(in), InvalidArgument) << bad;
  }
}

TEST(PlanTable, ShippedDataFileMatchesBuiltin) {
  const auto t = PlanTable::load(RFFT_SOURCE_DIR "/data/plan_table.txt");
  for (std::size_t k : {10u, 17u, 23u}) {
    const std::size_t n = std::size_t{1} << k;
    EXPECT_EQ(t.find(n), PlanTable::builtin().find(n));
  }
}

TEST(PlanTable, EnvironmentVariableOverridesBuiltin) {
  const auto path = std::filesystem::temp_directory_path() / "rfft_env_table.txt";
  {
    std::ofstream out(path);
    out << "1024 32 32 - 8 8 - 4\n";
  }
  ::setenv("RESILIENT_FFT_PLAN_TABLE", path.c_str(), 1);
  const auto t = resolve_plan_table();
  ::unsetenv("RESILIENT_FFT_PLAN_TABLE");
  EXPECT_EQ(*t.find(1024), (PlanParams{{32, 32}, {8, 8}, 4}));
  EXPECT_EQ(resolve_plan_table().find(1024), PlanTable::builtin().find(1024));
  std::filesystem::remove(path);
}

TEST(PlanTable, MissingFileIsRejected) {
  EXPECT_THROW(PlanTable::load("/nonexistent/plan_table.txt"), InvalidArgument);
}

TEST(BuildPlan, RowOneIsSingleStage) {
  const auto plan = build_plan<float>(select_params(1024, 1, Precision::fp32));
  EXPECT_EQ(plan.length(), 1024u);
  EXPECT_EQ(plan.stage_count(), 1u);
}

TEST(BuildPlan, RejectsProductMismatch) {
  PlanParams p{{256, 256}, {16, 16}, 1};
  EXPECT_NO_THROW(build_plan<float>(p));
  p.spans = {256, 128};
  p.radices = {16, 16};
  EXPECT_NO_THROW(build_plan<float>(p));  // a different, consistent length
  EXPECT_THROW(validate_params(p, 65536), InvalidArgument);
  EXPECT_THROW(build_plan<float>(PlanParams{{64, 64}, {16}, 1}), InvalidArgument);
}

TEST(BuildPlan, LengthMatchesSelectedParams) {
  for (std::size_t k = 1; k <= 20; ++k) {
    const std::size_t n = std::size_t{1} << k;
    EXPECT_EQ(build_plan<double>(select_params(n, 2, Precision::fp64)).length(), n);
  }
}

TEST(CandidateSpace, AllCandidatesValid) {
  for (std::size_t k = 2; k <= 24; k += 3) {
    const std::size_t n = std::size_t{1} << k;
    const auto c = candidate_space(n);
    EXPECT_FALSE(c.empty());
    for (const auto& p : c) EXPECT_NO_THROW(validate_params(p, n)) << format_params(p);
  }
}

PlanTimer fake_timer(std::map<std::string, double> times) {
  return [times = std::move(times)](const PlanParams& p) { return times.at(format_params(p)); };
}

TEST(Autotune, SingleCandidateWins) {
  const PlanParams p{{1024}, {8}, 1};
  EXPECT_EQ(autotune(1024, {p}, 3, fake_timer({{format_params(p), 9.0}})), p);
}

TEST(Autotune, PicksFasterCandidate) {
  const PlanParams slow{{1024}, {8}, 1}, fast{{32, 32}, {8, 8}, 4};
  const auto timer = fake_timer({{format_params(slow), 5.0}, {format_params(fast), 3.0}});
  EXPECT_EQ(autotune(1024, {slow, fast}, 3, timer), fast);
  EXPECT_EQ(autotune(1024, {fast, slow}, 3, timer), fast);
}

TEST(Autotune, TieBreakPrefersFewerStages) {
  const PlanParams one{{1024}, {4}, 1}, two{{32, 32}, {8, 8}, 16};
  const auto timer = fake_timer({{format_params(one), 2.0}, {format_params(two), 2.0}});
  EXPECT_EQ(autotune(1024, {two, one}, 3, timer), one);
  EXPECT_EQ(autotune(1024, {one, two}, 3, timer), one);
}

TEST(Autotune, TieBreakThenLargerBsThenSmallerRadices) {
  const PlanParams a{{1024}, {8}, 4}, b{{1024}, {8}, 8}, c{{1024}, {4}, 8};
  EXPECT_TRUE(tie_break_less(b, a));
  EXPECT_TRUE(tie_break_less(c, b));
  EXPECT_FALSE(tie_break_less(b, c));
}

TEST(Autotune, UsesMedianAndDiscardsWarmup) {
  const PlanParams a{{1024}, {8}, 1}, b{{1024}, {16}, 1};
  std::map<std::string, std::vector<double>> seq{{format_params(a), {100, 1, 1, 50}},
                                                 {format_params(b), {0.1, 2, 2, 2}}};
  std::map<std::string, std::size_t> calls;
  PlanTimer timer = [&](const PlanParams& p) {
    const auto key = format_params(p);
    return seq.at(key).at(calls[key]++);
  };
  const auto m = measure_candidates({a, b}, 3, timer);
  EXPECT_DOUBLE_EQ(m[0].median_ms, 1.0);
  EXPECT_DOUBLE_EQ(m[1].median_ms, 2.0);
  EXPECT_EQ(pick_fastest(m), a);
}

TEST(Autotune, RejectsEmptyOrMismatched) {
  const auto timer = fake_timer({});
  EXPECT_THROW(autotune(1024, {}, 3, timer), InvalidArgument);
  EXPECT_THROW(autotune(2048, {PlanParams{{1024}, {8}, 1}}, 3, timer), InvalidArgument);
  EXPECT_THROW(measure_candidates({PlanParams{{1024}, {8}, 1}}, 0, timer), InvalidArgument);
}

TEST(Autotune, WallClockReturnsACandidate) {
  const auto c = candidate_space(256);
  const auto best = autotune<float>(256, 2, c, 1);
  EXPECT_NE(std::find(c.begin(), c.end(), best), c.end());
}

}  // namespace
