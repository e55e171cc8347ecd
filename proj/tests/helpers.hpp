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

// Random instances and small oracles shared by the unit tests.

#include "sstraj/core.hpp"

#include <cmath>
#include <random>

namespace sstraj::test {

inline CMatrix random_complex(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = Complex(n(rng), n(rng));
  return out;
}

inline ComplexImage random_image(Index n, std::mt19937_64& rng) { return ComplexImage(random_complex(n, n, rng)); }

// Random complex maps rescaled so that sum_c |c|^2 = 1 at every pixel.
inline CoilMaps random_csm(Index n, Index nc, std::mt19937_64& rng) {
  CoilMaps csm(random_complex(nc * n, n, rng), nc);
  const RMatrix sos = sum_of_squares(csm);
  for (Index c = 0; c < nc; ++c) csm.coil(c) = csm.coil(c).cwiseQuotient(sos.cwiseSqrt().cast<Complex>());
  return csm;
}

// Uniform off-grid points inside the Nyquist box of an n-point grid.
inline Trajectory random_trajectory(Index m, Index n, std::mt19937_64& rng, double fov = 0.2, double dwell = 1e-6) {
  Trajectory k;
  k.fov = fov;
  k.dwell = dwell;
  const double kmax = k.nyquist(n);
  std::uniform_real_distribution<double> u(-kmax, kmax);
  k.points.resize(m, 2);
  for (Index j = 0; j < m; ++j) {
    k.points(j, 0) = u(rng);
    k.points(j, 1) = u(rng);
  }
  return k;
}

// Every cell of an n × n grid, raster order.
inline Trajectory cartesian(Index n, double fov = 0.2) {
  Trajectory k;
  k.fov = fov;
  k.points.resize(n * n, 2);
  for (Index v = 0; v < n; ++v)
    for (Index u = 0; u < n; ++u) {
      k.points(v * n + u, 0) = static_cast<double>(u - n / 2) / fov;
      k.points(v * n + u, 1) = static_cast<double>(v - n / 2) / fov;
    }
  return k;
}

inline double nrmse(const CMatrix& test, const CMatrix& ref) { return (test - ref).norm() / ref.norm(); }

}  // namespace sstraj::test
