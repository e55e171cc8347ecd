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

// Domain types shared by every module. All arrays are double precision and
// row-major so that they map one-to-one onto the on-disk array format.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace sstraj {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class Errc {
  invalid_argument,
  shape_mismatch,
  non_finite_value,
  csm_not_normalized,
  accel_too_large,
  empty_input,
  singular_density,
  cg_breakdown,
  divergence,
  io,
  format,
  unknown_plugin,
  plugin_failed,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

// x, x_ls, x0 and xhat all live here: ny × nx complex pixels.
struct ComplexImage {
  CMatrix pixels;

  ComplexImage() = default;
  explicit ComplexImage(CMatrix p) : pixels(std::move(p)) {}
  static ComplexImage zeros(Index ny, Index nx) { return ComplexImage(CMatrix::Zero(ny, nx)); }

  Index ny() const { return pixels.rows(); }
  Index nx() const { return pixels.cols(); }
};

// Coil sensitivities stacked along rows: coil c occupies rows [c*ny, (c+1)*ny).
struct CoilMaps {
  CMatrix stacked;
  Index coils = 0;

  CoilMaps() = default;
  CoilMaps(CMatrix s, Index nc) : stacked(std::move(s)), coils(nc) {}
  static CoilMaps uniform(Index ny, Index nx) { return CoilMaps(CMatrix::Ones(ny, nx), 1); }

  Index ny() const { return coils > 0 ? stacked.rows() / coils : 0; }
  Index nx() const { return stacked.cols(); }
  auto coil(Index c) { return stacked.middleRows(c * ny(), ny()); }
  auto coil(Index c) const { return stacked.middleRows(c * ny(), ny()); }
};

// Time-ordered k-space samples in cycles/meter; row i is acquired at i*dwell.
struct Trajectory {
  RMatrix points;  // m × 2, columns (kx, ky)
  double dwell = 1e-6;
  double fov = 0.2;

  Index size() const { return points.rows(); }
  // Half-width of the Nyquist box for an n-point grid.
  double nyquist(Index n) const { return static_cast<double>(n) / (2.0 * fov); }
};

// Per-coil measurements: nc × m.
struct KSpaceSamples {
  CMatrix data;

  KSpaceSamples() = default;
  explicit KSpaceSamples(CMatrix d) : data(std::move(d)) {}
  Index coils() const { return data.rows(); }
  Index samples() const { return data.cols(); }
};

struct PhysicsLimits {
  double gamma = 42.577e6;  // Hz/T
  double g_max = 0.04;      // T/m
  double s_max = 200.0;     // T/m/s

  double v_max() const { return gamma * g_max; }  // (cycles/m)/s
  double a_max() const { return gamma * s_max; }  // (cycles/m)/s^2
  void check() const;
};

struct ScanConfig {
  double te = 0.100;         // s
  double t2 = 0.080;         // s
  double dwell = 1e-6;       // s
  double noise_sigma = 0.0;  // per real/imag component
  double accel = 8.0;
  // Multiplies elapsed readout time in the blur model. When unset it is
  // derived so that the last sample decays by exp(-blur_total_decay).
  std::optional<double> blur_scale;
  double blur_total_decay = 0.36;
  bool apply_te_scale = false;  // multiply the blur vector by exp(-te/t2)
  std::uint64_t noise_seed = 0;

  void check() const;
  double resolved_blur_scale(Index samples) const;
};

// Pixel coordinate along one axis, centered: (i - n/2) * fov / n meters.
inline double pixel_coordinate(Index i, Index n, double fov) {
  return static_cast<double>(i - n / 2) * fov / static_cast<double>(n);
}

// Reports the first violated invariant of an image/coil pair by throwing.
void validate(const ComplexImage& image, const CoilMaps& csm);
void validate(const ComplexImage& image);
void validate(const Trajectory& k);

// Sum over coils of |c|^2 at every pixel.
RMatrix sum_of_squares(const CoilMaps& csm);

// Inner product <a, b> = sum conj(a) b over all elements.
Complex inner(const CMatrix& a, const CMatrix& b);
double real_inner(const CMatrix& a, const CMatrix& b);

}  // namespace sstraj
