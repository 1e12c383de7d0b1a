// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Two-stage classifier-free guidance over an abstract denoiser.
//
//   balanced = e(0, cv) + s1 * (e(ct, cv) - e(0, cv))
//   final    = e(0, 0)  + s2 * (balanced - e(0, 0))
//
// which expands to the affine combination
//   (1 - s2) e(0, 0) + s2 (1 - s1) e(0, cv) + s2 s1 e(ct, cv).

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forge::guidance {

// A noise estimate. All predictions combined in one step share a length.
struct Prediction {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Absent conditions stand for the null token.
struct ConditionSet {
  std::optional<std::string> text;
  std::optional<std::string> visual;
};

struct GuidanceConfig {
  double s1 = 4.0;     // text-image balance
  double s2 = 1.5;     // overall strength
  double shift = 3.0;  // timestep shift
  int num_steps = 50;

  // Throws Error(kInvalidArgument) when a field is out of range.
  void Validate() const;
};

using Denoiser = std::function<Prediction(std::span<const double> z_t,
                                          const ConditionSet& conditions,
                                          double t)>;

Prediction BalancedEstimate(const Prediction& e_null_text, const Prediction& e_full,
                            double s1);
Prediction FinalPrediction(const Prediction& e_null_null, const Prediction& balanced,
                           double s2);

struct StepOptions {
  bool concurrent = false;  // issue the three denoiser calls in parallel
};

// Exactly three denoiser calls: (null, cv), (ct, cv), (null, null).
Prediction GuidedStep(const Denoiser& denoiser, std::span<const double> z_t,
                      const std::optional<std::string>& text_condition,
                      const std::optional<std::string>& visual_condition, double t,
                      const GuidanceConfig& config, StepOptions options = {});

// Coefficients of the expanded form, in the order e(0,0), e(0,cv), e(ct,cv).
struct AffineCoefficients {
  double null_null;
  double null_text;
  double full;
};
AffineCoefficients Coefficients(double s1, double s2);

// Timesteps i / n for i = n..1, remapped by t = s u / (1 + (s - 1) u).
std::vector<double> ShiftedSchedule(int num_steps, double shift);

}  // namespace forge::guidance
