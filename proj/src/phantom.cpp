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

#include "sstraj/phantom.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sstraj {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

double normalized_x(Index ix, Index n) {
  return (static_cast<double>(ix) + 0.5 - static_cast<double>(n) / 2.0) / (static_cast<double>(n) / 2.0);
}
double normalized_y(Index iy, Index n) { return -normalized_x(iy, n); }

}  // namespace

std::vector<Ellipse> shepp_logan_ellipses() {
  return {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
}

ComplexImage rasterize(const std::vector<Ellipse>& ellipses, Index n) {
  if (n < 1) fail(Errc::invalid_argument, "image size must be >= 1");
  RMatrix img = RMatrix::Zero(n, n);
  for (const auto& e : ellipses) {
    if (!(e.semi_x > 0) || !(e.semi_y > 0)) fail(Errc::invalid_argument, "ellipse semi-axes must be > 0");
    const double c = std::cos(e.angle_deg * kDegree), s = std::sin(e.angle_deg * kDegree);
    for (Index iy = 0; iy < n; ++iy) {
      const double y = normalized_y(iy, n) - e.center_y;
      for (Index ix = 0; ix < n; ++ix) {
        const double x = normalized_x(ix, n) - e.center_x;
        const double u = (x * c + y * s) / e.semi_x;
        const double v = (-x * s + y * c) / e.semi_y;
        if (u * u + v * v <= 1.0) img(iy, ix) += e.intensity;
      }
    }
  }
  return ComplexImage(img.cwiseMax(0.0).cwiseMin(1.0).cast<Complex>());
}

ComplexImage shepp_logan(Index n) {
  if (n < 16) fail(Errc::invalid_argument, "shepp_logan needs n >= 16");
  return rasterize(shepp_logan_ellipses(), n);
}

CoilMaps synthetic_csm(Index n, Index nc, std::uint64_t seed) {
  if (n < 1) fail(Errc::invalid_argument, "image size must be >= 1");
  if (nc < 1) fail(Errc::invalid_argument, "coil count must be >= 1");
  if (nc == 1) return CoilMaps::uniform(n, n);
  std::mt19937_64 rng(seed);
  const double ring_offset = detail::uniform(rng, 0.0, kTwoPi);
  const double ring_radius = 1.2, lobe_width = 0.9;
  CoilMaps csm(CMatrix(nc * n, n), nc);
  for (Index c = 0; c < nc; ++c) {
    const double theta = ring_offset + kTwoPi * static_cast<double>(c) / static_cast<double>(nc);
    const double cx = ring_radius * std::cos(theta), cy = ring_radius * std::sin(theta);
    const double phase0 = detail::uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double phase_x = detail::uniform(rng, -0.5, 0.5), phase_y = detail::uniform(rng, -0.5, 0.5);
    auto map = csm.coil(c);
    for (Index iy = 0; iy < n; ++iy)
      for (Index ix = 0; ix < n; ++ix) {
        const double x = normalized_x(ix, n), y = normalized_y(iy, n);
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        map(iy, ix) = std::polar(std::exp(-d2 / (2.0 * lobe_width * lobe_width)), phase0 + phase_x * x + phase_y * y);
      }
  }
  const RMatrix sos = sum_of_squares(csm);
  for (Index c = 0; c < nc; ++c) csm.coil(c) = csm.coil(c).cwiseQuotient(sos.cwiseSqrt().cast<Complex>());
  return csm;
}

PhantomCase make_phantom_case(Index n, Index nc, std::uint64_t seed, std::uint64_t index,
                              const DatasetOptions& opts) {
  if (n < 16) fail(Errc::invalid_argument, "phantoms need n >= 16");
  if (!(opts.intensity_jitter >= 0 && opts.intensity_jitter < 1))
    fail(Errc::invalid_argument, "intensity jitter must be in [0, 1)");
  if (!(opts.max_rotation_deg >= 0)) fail(Errc::invalid_argument, "rotation bound must be >= 0");
  PhantomCase out;
  out.seed = detail::derive_seed(seed, index);
  std::mt19937_64 rng(out.seed);

  const double rot = detail::uniform(rng, -opts.max_rotation_deg, opts.max_rotation_deg);
  const double c = std::cos(rot * kDegree), s = std::sin(rot * kDegree);
  auto ellipses = shepp_logan_ellipses();
  for (auto& e : ellipses) {
    e.intensity *= 1.0 + detail::uniform(rng, -opts.intensity_jitter, opts.intensity_jitter);
    const double x = e.center_x, y = e.center_y;
    e.center_x = c * x - s * y;
    e.center_y = s * x + c * y;
    e.angle_deg += rot;
  }
  out.image = rasterize(ellipses, n);

  if (opts.smooth_phase) {
    // Low-order polynomial phase: a + b x + c y + d xy + e (x^2 - y^2).
    double coef[5];
    for (double& v : coef) v = detail::uniform(rng, -1.0, 1.0);
    const double scale = opts.phase_amplitude / (std::abs(coef[0]) + std::abs(coef[1]) + std::abs(coef[2]) +
                                                 std::abs(coef[3]) + std::abs(coef[4]));
    for (Index iy = 0; iy < n; ++iy)
      for (Index ix = 0; ix < n; ++ix) {
        const double x = normalized_x(ix, n), y = normalized_y(iy, n);
        const double phi = scale * (coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * y + coef[4] * (x * x - y * y));
        out.image.pixels(iy, ix) *= std::polar(1.0, phi);
      }
  }
  out.csm = synthetic_csm(n, nc, detail::derive_seed(out.seed, 1));
  return out;
}

std::vector<PhantomCase> make_dataset(Index count, Index n, Index nc, std::uint64_t seed,
                                      const DatasetOptions& opts) {
  if (count < 1) fail(Errc::empty_input, "dataset count must be >= 1");
  std::vector<PhantomCase> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(make_phantom_case(n, nc, seed, static_cast<std::uint64_t>(i), opts));
  return out;
}

}  // namespace sstraj
