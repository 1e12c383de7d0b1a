// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/guidance.hpp"

#include <cmath>
#include <future>

#include "forge/error.hpp"

namespace forge::guidance {
namespace {

void CheckSameLength(const Prediction& a, const Prediction& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "predictions of length " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
}

void CheckFinite(const Prediction& p, const char* what) {
  for (double v : p.values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, std::string(what) + " has a non-finite entry");
    }
  }
}

// base + scale * (toward - base), elementwise.
Prediction Extrapolate(const Prediction& base, const Prediction& toward, double scale) {
  CheckSameLength(base, toward);
  Prediction out;
  out.values.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    out.values[i] = base.values[i] + scale * (toward.values[i] - base.values[i]);
  }
  return out;
}

}  // namespace

void GuidanceConfig::Validate() const {
  if (!(s1 >= 0.0) || !std::isfinite(s1)) {
    throw Error(ErrorCode::kInvalidArgument, "s1 must be a finite value >= 0");
  }
  if (!(s2 >= 0.0) || !std::isfinite(s2)) {
    throw Error(ErrorCode::kInvalidArgument, "s2 must be a finite value >= 0");
  }
  if (!(shift > 0.0) || !std::isfinite(shift)) {
    throw Error(ErrorCode::kInvalidArgument, "shift must be > 0");
  }
  if (num_steps < 1) throw Error(ErrorCode::kInvalidArgument, "num_steps must be >= 1");
}

Prediction BalancedEstimate(const Prediction& e_null_text, const Prediction& e_full,
                            double s1) {
  return Extrapolate(e_null_text, e_full, s1);
}

Prediction FinalPrediction(const Prediction& e_null_null, const Prediction& balanced,
                           double s2) {
  return Extrapolate(e_null_null, balanced, s2);
}

AffineCoefficients Coefficients(double s1, double s2) {
  return {1.0 - s2, s2 * (1.0 - s1), s2 * s1};
}

Prediction GuidedStep(const Denoiser& denoiser, std::span<const double> z_t,
                      const std::optional<std::string>& text_condition,
                      const std::optional<std::string>& visual_condition, double t,
                      const GuidanceConfig& config, StepOptions options) {
  const ConditionSet visual_only{std::nullopt, visual_condition};
  const ConditionSet full{text_condition, visual_condition};
  const ConditionSet none{std::nullopt, std::nullopt};

  Prediction e_null_text, e_full, e_null_null;
  if (options.concurrent) {
    auto f1 = std::async(std::launch::async, [&] { return denoiser(z_t, visual_only, t); });
    auto f2 = std::async(std::launch::async, [&] { return denoiser(z_t, full, t); });
    e_null_null = denoiser(z_t, none, t);
    e_null_text = f1.get();
    e_full = f2.get();
  } else {
    e_null_text = denoiser(z_t, visual_only, t);
    e_full = denoiser(z_t, full, t);
    e_null_null = denoiser(z_t, none, t);
  }
  for (const Prediction* p : {&e_null_text, &e_full, &e_null_null}) {
    if (p->size() != z_t.size()) {
      throw Error(ErrorCode::kLengthMismatch, "denoiser output length " +
                                                  std::to_string(p->size()) +
                                                  " != latent length " +
                                                  std::to_string(z_t.size()));
    }
  }
  CheckFinite(e_null_text, "e(null, cv)");
  CheckFinite(e_full, "e(ct, cv)");
  CheckFinite(e_null_null, "e(null, null)");
  const Prediction balanced = BalancedEstimate(e_null_text, e_full, config.s1);
  return FinalPrediction(e_null_null, balanced, config.s2);
}

std::vector<double> ShiftedSchedule(int num_steps, double shift) {
  if (num_steps < 1) throw Error(ErrorCode::kInvalidArgument, "num_steps must be >= 1");
  if (!(shift > 0.0) || !std::isfinite(shift)) {
    throw Error(ErrorCode::kInvalidArgument, "shift must be > 0");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(num_steps));
  for (int i = num_steps; i >= 1; --i) {
    if (i == num_steps) {
      // u = 1 maps to 1 for every shift; the division can land one ulp off.
      out.push_back(1.0);
      continue;
    }
    const double u = static_cast<double>(i) / num_steps;
    out.push_back(shift * u / (1.0 + (shift - 1.0) * u));
  }
  return out;
}

}  // namespace forge::guidance
