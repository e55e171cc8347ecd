// Copyright 2026 The sstraj Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Image-quality metrics, the task loss, and the gradient/slew-rate penalty.

#include "sstraj/core.hpp"

#include <span>

namespace sstraj {

inline constexpr double kPsnrCap = 300.0;

// 20 log10(max|ref| / rmse(|test|, |ref|)), capped at kPsnrCap.
double psnr(const ComplexImage& test, const ComplexImage& ref);

// Mean local SSIM of the magnitude images, 11×11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range max|ref|. Only windows lying fully
// inside the image contribute.
double ssim(const ComplexImage& test, const ComplexImage& ref);

// SSIM of real images with explicit dynamic range. If grad is non-null it
// receives d ssim / d test.
double ssim_real(const RMatrix& test, const RMatrix& ref, double range, RMatrix* grad = nullptr);

// Mean absolute magnitude difference plus (1 - ssim).
double task_loss(const ComplexImage& xhat, const ComplexImage& x);

// Same, with the complex cotangent dL/dRe + i dL/dIm written to grad.
double task_loss(const ComplexImage& xhat, const ComplexImage& x, CMatrix* grad);

struct LossWeights {
  double beta = 1.0;
  double lambda_v = 1.0;
  double lambda_a = 1.0;
  bool per_axis = false;  // hinge each axis separately instead of the 2-D norm

  void check() const;
};

struct Kinematics {
  RMatrix velocity;      // (m-1) × 2, (cycles/m)/s
  RMatrix acceleration;  // (m-2) × 2, (cycles/m)/s^2
};

Kinematics kinematics(const Trajectory& k);

// lambda_v sum max(0, |v_i| - v_max) + lambda_a sum max(0, |a_i| - a_max).
double constraint_loss(const Trajectory& k, const PhysicsLimits& limits, const LossWeights& weights);

// Subgradient of constraint_loss (zero branch at the kinks), m × 2.
RMatrix constraint_gradient(const Trajectory& k, const PhysicsLimits& limits, const LossWeights& weights);

struct ConstraintStats {
  double max_speed = 0;
  double max_accel = 0;
  double max_v_violation = 0;  // max(0, max|v| - v_max)
  double max_a_violation = 0;
  Index v_violations = 0;      // segments with |v| > v_max
  Index a_violations = 0;
};

ConstraintStats constraint_stats(const Trajectory& k, const PhysicsLimits& limits, bool per_axis = false);

double total_loss(const ComplexImage& xhat, const ComplexImage& x, const Trajectory& k,
                  const PhysicsLimits& limits, const LossWeights& weights);

// Mean and sample standard deviation.
struct Summary {
  double mean = 0;
  double stddev = 0;
};
Summary summarize(std::span<const double> values);

}  // namespace sstraj
