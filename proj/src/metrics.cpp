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

#include "sstraj/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace sstraj {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::array<double, kWindow>& gaussian_taps() {
  static const std::array<double, kWindow> taps = [] {
    std::array<double, kWindow> t{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      t[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
      sum += t[i];
    }
    for (auto& v : t) v /= sum;
    return t;
  }();
  return taps;
}

// Separable "valid" Gaussian filter: (ny-10) × (nx-10).
RMatrix filter_valid(const RMatrix& a) {
  const auto& g = gaussian_taps();
  const Index oy = a.rows() - kWindow + 1, ox = a.cols() - kWindow + 1;
  RMatrix rows = RMatrix::Zero(a.rows(), ox);
  for (int u = 0; u < kWindow; ++u) rows += g[u] * a.middleCols(u, ox);
  RMatrix out = RMatrix::Zero(oy, ox);
  for (int u = 0; u < kWindow; ++u) out += g[u] * rows.middleRows(u, oy);
  return out;
}

// Adjoint of filter_valid.
RMatrix filter_valid_adjoint(const RMatrix& g_out, Index ny, Index nx) {
  const auto& g = gaussian_taps();
  const Index oy = g_out.rows(), ox = g_out.cols();
  RMatrix rows = RMatrix::Zero(ny, ox);
  for (int u = 0; u < kWindow; ++u) rows.middleRows(u, oy) += g[u] * g_out;
  RMatrix out = RMatrix::Zero(ny, nx);
  for (int u = 0; u < kWindow; ++u) out.middleCols(u, ox) += g[u] * rows;
  return out;
}

void same_shape(const ComplexImage& a, const ComplexImage& b) {
  if (a.ny() != b.ny() || a.nx() != b.nx()) fail(Errc::shape_mismatch, "images differ in shape");
}

double hinge_norm(double x, double y, bool per_axis, double limit, double* gx, double* gy) {
  if (per_axis) {
    double loss = 0.0;
    *gx = *gy = 0.0;
    if (std::abs(x) > limit) {
      loss += std::abs(x) - limit;
      *gx = x > 0 ? 1.0 : -1.0;
    }
    if (std::abs(y) > limit) {
      loss += std::abs(y) - limit;
      *gy = y > 0 ? 1.0 : -1.0;
    }
    return loss;
  }
  const double n = std::hypot(x, y);
  if (n > limit) {
    *gx = x / n;
    *gy = y / n;
    return n - limit;
  }
  *gx = *gy = 0.0;
  return 0.0;
}

}  // namespace

double psnr(const ComplexImage& test, const ComplexImage& ref) {
  same_shape(test, ref);
  const RMatrix r = ref.pixels.cwiseAbs();
  const double peak = r.maxCoeff();
  if (!(peak > 0)) fail(Errc::invalid_argument, "reference image is identically zero");
  const double mse = (test.pixels.cwiseAbs() - r).squaredNorm() / static_cast<double>(r.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 20.0 * std::log10(peak / std::sqrt(mse)));
}

double ssim_real(const RMatrix& a, const RMatrix& b, double range, RMatrix* grad) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(Errc::shape_mismatch, "images differ in shape");
  if (a.rows() < kWindow || a.cols() < kWindow)
    fail(Errc::invalid_argument, "image smaller than the 11x11 SSIM window");
  const double c1 = (kK1 * range) * (kK1 * range);
  const double c2 = (kK2 * range) * (kK2 * range);
  const RMatrix mu_a = filter_valid(a);
  const RMatrix mu_b = filter_valid(b);
  const RMatrix e_aa = filter_valid(a.cwiseProduct(a));
  const RMatrix e_bb = filter_valid(b.cwiseProduct(b));
  const RMatrix e_ab = filter_valid(a.cwiseProduct(b));

  const auto ma = mu_a.array(), mb = mu_b.array();
  const auto a1 = 2.0 * ma * mb + c1;
  const auto a2 = 2.0 * (e_ab.array() - ma * mb) + c2;
  const auto b1 = ma * ma + mb * mb + c1;
  const auto b2 = (e_aa.array() - ma * ma) + (e_bb.array() - mb * mb) + c2;
  const Eigen::ArrayXXd s = (a1 * a2) / (b1 * b2);
  const double count = static_cast<double>(s.size());
  const double value = s.sum() / count;

  if (grad) {
    // dS = S (dA1/A1 + dA2/A2 - dB1/B1 - dB2/B2) in terms of mu_a, E[a^2], E[ab].
    const Eigen::ArrayXXd d_mu = s * (2.0 * mb / a1 - 2.0 * mb / a2 - 2.0 * ma / b1 + 2.0 * ma / b2) / count;
    const Eigen::ArrayXXd d_eab = s * (2.0 / a2) / count;
    const Eigen::ArrayXXd d_eaa = -s / b2 / count;
    const RMatrix g_mu = filter_valid_adjoint(d_mu.matrix(), a.rows(), a.cols());
    const RMatrix g_eaa = filter_valid_adjoint(d_eaa.matrix(), a.rows(), a.cols());
    const RMatrix g_eab = filter_valid_adjoint(d_eab.matrix(), a.rows(), a.cols());
    *grad = g_mu + 2.0 * a.cwiseProduct(g_eaa) + b.cwiseProduct(g_eab);
  }
  return value;
}

double ssim(const ComplexImage& test, const ComplexImage& ref) {
  same_shape(test, ref);
  const RMatrix b = ref.pixels.cwiseAbs();
  return ssim_real(test.pixels.cwiseAbs(), b, b.maxCoeff());
}

double task_loss(const ComplexImage& xhat, const ComplexImage& x) { return task_loss(xhat, x, nullptr); }

double task_loss(const ComplexImage& xhat, const ComplexImage& x, CMatrix* grad) {
  same_shape(xhat, x);
  const RMatrix a = xhat.pixels.cwiseAbs();
  const RMatrix b = x.pixels.cwiseAbs();
  const double count = static_cast<double>(a.size());
  const RMatrix diff = a - b;
  const double l1 = diff.cwiseAbs().sum() / count;
  RMatrix g_ssim;
  const double s = ssim_real(a, b, b.maxCoeff(), grad ? &g_ssim : nullptr);
  if (grad) {
    // Real cotangent on |xhat| mapped to the complex pixel by xhat / |xhat|.
    grad->resize(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) {
        const double d = diff(i, j);
        const double g_mag = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / count - g_ssim(i, j);
        (*grad)(i, j) = a(i, j) > 0 ? g_mag * xhat.pixels(i, j) / a(i, j) : Complex(0.0);
      }
  }
  return l1 + (1.0 - s);
}

void LossWeights::check() const {
  if (!(beta >= 0 && lambda_v >= 0 && lambda_a >= 0) || !std::isfinite(beta + lambda_v + lambda_a))
    fail(Errc::invalid_argument, "loss weights must be finite and non-negative");
}

Kinematics kinematics(const Trajectory& k) {
  const Index m = k.size();
  if (m < 3) fail(Errc::invalid_argument, "kinematics needs at least 3 samples");
  Kinematics out;
  const auto& p = k.points;
  out.velocity = (p.bottomRows(m - 1) - p.topRows(m - 1)) / k.dwell;
  out.acceleration =
      (p.bottomRows(m - 2) - 2.0 * p.middleRows(1, m - 2) + p.topRows(m - 2)) / (k.dwell * k.dwell);
  return out;
}

double constraint_loss(const Trajectory& k, const PhysicsLimits& limits, const LossWeights& weights) {
  const Kinematics kin = kinematics(k);
  double gx, gy, lv = 0.0, la = 0.0;
  for (Index i = 0; i < kin.velocity.rows(); ++i)
    lv += hinge_norm(kin.velocity(i, 0), kin.velocity(i, 1), weights.per_axis, limits.v_max(), &gx, &gy);
  for (Index i = 0; i < kin.acceleration.rows(); ++i)
    la += hinge_norm(kin.acceleration(i, 0), kin.acceleration(i, 1), weights.per_axis, limits.a_max(), &gx, &gy);
  return weights.lambda_v * lv + weights.lambda_a * la;
}

RMatrix constraint_gradient(const Trajectory& k, const PhysicsLimits& limits, const LossWeights& weights) {
  const Kinematics kin = kinematics(k);
  RMatrix g = RMatrix::Zero(k.size(), 2);
  const double dt = k.dwell;
  double gx, gy;
  for (Index i = 0; i < kin.velocity.rows(); ++i) {
    hinge_norm(kin.velocity(i, 0), kin.velocity(i, 1), weights.per_axis, limits.v_max(), &gx, &gy);
    if (gx == 0 && gy == 0) continue;
    const double sx = weights.lambda_v * gx / dt, sy = weights.lambda_v * gy / dt;
    g(i + 1, 0) += sx;
    g(i + 1, 1) += sy;
    g(i, 0) -= sx;
    g(i, 1) -= sy;
  }
  for (Index i = 0; i < kin.acceleration.rows(); ++i) {
    hinge_norm(kin.acceleration(i, 0), kin.acceleration(i, 1), weights.per_axis, limits.a_max(), &gx, &gy);
    if (gx == 0 && gy == 0) continue;
    const double sx = weights.lambda_a * gx / (dt * dt), sy = weights.lambda_a * gy / (dt * dt);
    g(i, 0) += sx;
    g(i, 1) += sy;
    g(i + 1, 0) -= 2.0 * sx;
    g(i + 1, 1) -= 2.0 * sy;
    g(i + 2, 0) += sx;
    g(i + 2, 1) += sy;
  }
  return g;
}

ConstraintStats constraint_stats(const Trajectory& k, const PhysicsLimits& limits, bool per_axis) {
  const Kinematics kin = kinematics(k);
  ConstraintStats s;
  auto magnitude = [per_axis](double x, double y) {
    return per_axis ? std::max(std::abs(x), std::abs(y)) : std::hypot(x, y);
  };
  for (Index i = 0; i < kin.velocity.rows(); ++i) {
    const double v = magnitude(kin.velocity(i, 0), kin.velocity(i, 1));
    s.max_speed = std::max(s.max_speed, v);
    if (v > limits.v_max()) ++s.v_violations;
  }
  for (Index i = 0; i < kin.acceleration.rows(); ++i) {
    const double a = magnitude(kin.acceleration(i, 0), kin.acceleration(i, 1));
    s.max_accel = std::max(s.max_accel, a);
    if (a > limits.a_max()) ++s.a_violations;
  }
  s.max_v_violation = std::max(0.0, s.max_speed - limits.v_max());
  s.max_a_violation = std::max(0.0, s.max_accel - limits.a_max());
  return s;
}

double total_loss(const ComplexImage& xhat, const ComplexImage& x, const Trajectory& k,
                  const PhysicsLimits& limits, const LossWeights& weights) {
  return task_loss(xhat, x) + weights.beta * constraint_loss(k, limits, weights);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace sstraj
