// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/guidance.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "forge/rng.hpp"
#include "test_util.hpp"

namespace forge::guidance {
namespace {

Prediction P(std::initializer_list<double> v) { return Prediction{std::vector<double>(v)}; }

// Toy denoiser: e = alpha * z + offset, with a per-condition offset.
Denoiser ToyDenoiser(double alpha, Prediction null_null, Prediction null_text,
                     Prediction full, std::atomic<int>* calls = nullptr) {
  return [=](std::span<const double> z, const ConditionSet& c, double) {
    if (calls != nullptr) ++*calls;
    const Prediction& off = !c.visual ? null_null : (c.text ? full : null_text);
    Prediction out;
    for (std::size_t i = 0; i < z.size(); ++i) out.values.push_back(alpha * z[i] + off.values[i]);
    return out;
  };
}

TEST(BalancedEstimateTest, Examples) {
  EXPECT_EQ(BalancedEstimate(P({1.0}), P({2.0}), 4.0), P({5.0}));
  EXPECT_EQ(BalancedEstimate(P({1.25, -3.0}), P({2.5, 7.0}), 1.0), P({2.5, 7.0}));
  EXPECT_EQ(BalancedEstimate(P({1.25, -3.0}), P({2.5, 7.0}), 0.0), P({1.25, -3.0}));
  EXPECT_ERROR_CODE(BalancedEstimate(P({1.0}), P({1.0, 2.0}), 4.0), ErrorCode::kLengthMismatch);
}

TEST(FinalPredictionTest, Examples) {
  EXPECT_EQ(FinalPrediction(P({0.0}), P({5.0}), 1.5), P({7.5}));
  EXPECT_EQ(FinalPrediction(P({0.5}), P({5.0}), 1.0), P({5.0}));
  EXPECT_EQ(FinalPrediction(P({0.5}), P({5.0}), 0.0), P({0.5}));
  EXPECT_ERROR_CODE(FinalPrediction(P({}), P({1.0}), 1.0), ErrorCode::kLengthMismatch);
}

TEST(GuidedStepTest, WorkedFixture) {
  std::atomic<int> calls{0};
  const auto den = ToyDenoiser(0.0, P({0.0}), P({1.0}), P({2.0}), &calls);
  const std::vector<double> z = {0.3};
  const auto out = GuidedStep(den, z, "text", "visual", 0.5, GuidanceConfig{});
  EXPECT_EQ(out, P({7.5}));
  EXPECT_EQ(calls.load(), 3);
}

TEST(GuidedStepTest, CollapseAndFixedPoint) {
  const auto den = ToyDenoiser(0.5, P({0.1, 0.2}), P({1.0, -1.0}), P({2.0, 3.0}));
  const std::vector<double> z = {1.0, 2.0};
  GuidanceConfig unit;
  unit.s1 = 1.0;
  unit.s2 = 1.0;
  const auto out = GuidedStep(den, z, "t", "v", 0.1, unit);
  EXPECT_NEAR(out.values[0], 0.5 * 1.0 + 2.0, 1e-15);
  EXPECT_NEAR(out.values[1], 0.5 * 2.0 + 3.0, 1e-15);

  const auto constant = ToyDenoiser(0.0, P({4.0}), P({4.0}), P({4.0}));
  for (double s1 : {0.0, 1.0, 4.0, 9.5}) {
    for (double s2 : {0.0, 1.5, 7.0}) {
      GuidanceConfig cfg;
      cfg.s1 = s1;
      cfg.s2 = s2;
      EXPECT_EQ(GuidedStep(constant, std::vector<double>{0.0}, "t", "v", 0.0, cfg),
                P({4.0}));
    }
  }
}

TEST(GuidedStepTest, ConcurrentMatchesSequential) {
  const auto den = ToyDenoiser(0.25, P({0.1, 0.2}), P({1.0, -1.0}), P({2.0, 3.0}));
  const std::vector<double> z = {1.0, 2.0};
  const GuidanceConfig cfg;
  EXPECT_EQ(GuidedStep(den, z, "t", "v", 0.4, cfg),
            GuidedStep(den, z, "t", "v", 0.4, cfg, {.concurrent = true}));
}

TEST(GuidedStepTest, RejectsWrongLengthAndNonFinite) {
  Denoiser short_out = [](std::span<const double>, const ConditionSet&, double) {
    return P({1.0});
  };
  EXPECT_ERROR_CODE(GuidedStep(short_out, std::vector<double>{1.0, 2.0}, "t", "v", 0.0, {}),
                    ErrorCode::kLengthMismatch);
  Denoiser nan_out = [](std::span<const double>, const ConditionSet&, double) {
    return P({std::nan("")});
  };
  EXPECT_ERROR_CODE(GuidedStep(nan_out, std::vector<double>{1.0}, "t", "v", 0.0, {}),
                    ErrorCode::kNonFinite);
}

TEST(GuidedStepProperty, MatchesAffineExpansion) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.Below(32);
    auto rand_vec = [&] {
      Prediction p;
      for (std::size_t i = 0; i < n; ++i) p.values.push_back(rng.Uniform01() * 20 - 10);
      return p;
    };
    const Prediction a = rand_vec(), b = rand_vec(), c = rand_vec();
    GuidanceConfig cfg;
    cfg.s1 = rng.Uniform01() * 8;
    cfg.s2 = rng.Uniform01() * 4;
    const auto out = GuidedStep(ToyDenoiser(0.0, a, b, c), std::vector<double>(n, 0.0), "t",
                                "v", 0.5, cfg);
    const auto k = Coefficients(cfg.s1, cfg.s2);
    for (std::size_t i = 0; i < n; ++i) {
      const double expect = k.null_null * a.values[i] + k.null_text * b.values[i] +
                            k.full * c.values[i];
      const double scale = std::max({std::abs(expect), std::abs(a.values[i]),
                                     std::abs(b.values[i]), std::abs(c.values[i]), 1.0});
      ASSERT_LE(std::abs(out.values[i] - expect), 1e-12 * scale);
    }
  }
}

TEST(ShiftedScheduleTest, Examples) {
  EXPECT_EQ(ShiftedSchedule(2, 1.0), (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(ShiftedSchedule(2, 3.0), (std::vector<double>{1.0, 0.75}));
  EXPECT_EQ(ShiftedSchedule(1, 0.2), (std::vector<double>{1.0}));
  EXPECT_EQ(ShiftedSchedule(1, 3.0), (std::vector<double>{1.0}));
  EXPECT_ERROR_CODE(ShiftedSchedule(0, 3.0), ErrorCode::kInvalidArgument);
  EXPECT_ERROR_CODE(ShiftedSchedule(4, 0.0), ErrorCode::kInvalidArgument);
}

TEST(ShiftedScheduleProperty, StrictlyDecreasingAndUniformAtUnitShift) {
  for (double shift : {0.05, 0.5, 1.0, 3.0, 10.0, 100.0}) {
    for (int n : {1, 2, 7, 50, 1000}) {
      const auto t = ShiftedSchedule(n, shift);
      ASSERT_EQ(t.size(), static_cast<std::size_t>(n));
      EXPECT_EQ(t.front(), 1.0);
      for (std::size_t i = 1; i < t.size(); ++i) {
        ASSERT_LT(t[i], t[i - 1]);
        ASSERT_GT(t[i], 0.0);
      }
      if (shift == 1.0) {
        for (int i = 0; i < n; ++i) ASSERT_EQ(t[static_cast<std::size_t>(i)], static_cast<double>(n - i) / n);
      }
    }
  }
}

TEST(GuidanceConfigTest, DefaultsAndValidation) {
  const GuidanceConfig cfg;
  EXPECT_EQ(cfg.s1, 4.0);
  EXPECT_EQ(cfg.s2, 1.5);
  EXPECT_EQ(cfg.shift, 3.0);
  EXPECT_NO_THROW(cfg.Validate());
  GuidanceConfig bad;
  bad.s1 = -1;
  EXPECT_ERROR_CODE(bad.Validate(), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace forge::guidance
