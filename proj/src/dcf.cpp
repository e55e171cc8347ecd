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

#include "sstraj/dcf.hpp"

#include <cmath>
#include <vector>

namespace sstraj {

namespace {

struct Neighbor {
  Index other;
  double weight;
};

// Per-sample neighbor lists within the kernel support, excluding self.
std::vector<std::vector<Neighbor>> kernel_neighbors(const Trajectory& k, Index grid_n, double sigma) {
  const Index m = k.size();
  const double period = static_cast<double>(grid_n);
  const double support = 4.0 * sigma;
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) {
    for (Index l = j + 1; l < m; ++l) {
      double dx = (k.points(j, 0) - k.points(l, 0)) * k.fov;
      double dy = (k.points(j, 1) - k.points(l, 1)) * k.fov;
      dx -= period * std::round(dx / period);
      dy -= period * std::round(dy / period);
      const double d2 = dx * dx + dy * dy;
      if (d2 > support * support) continue;
      const double g = std::exp(-d2 / (2.0 * sigma * sigma));
      out[static_cast<std::size_t>(j)].push_back({l, g});
      out[static_cast<std::size_t>(l)].push_back({j, g});
    }
  }
  return out;
}

}  // namespace

RVector pipe_menon_raw(const Trajectory& k, Index grid_n, double kernel_sigma, int iters) {
  validate(k);
  if (iters < 1) fail(Errc::invalid_argument, "dcf iterations must be >= 1");
  if (!(kernel_sigma > 0)) fail(Errc::invalid_argument, "dcf kernel sigma must be > 0");
  const Index m = k.size();
  if (m > 1 && (k.points.rowwise() - k.points.row(0)).cwiseAbs().maxCoeff() == 0.0)
    fail(Errc::singular_density, "all trajectory points coincide");

  const auto neighbors = kernel_neighbors(k, grid_n, kernel_sigma);
  RVector w = RVector::Ones(m);
  RVector density(m);
  for (int it = 0; it < iters; ++it) {
    for (Index j = 0; j < m; ++j) {
      double s = w(j);
      for (const auto& n : neighbors[static_cast<std::size_t>(j)]) s += n.weight * w(n.other);
      density(j) = s;
    }
    w = w.cwiseQuotient(density);
  }
  return w;
}

double dc_normalization(const Trajectory& k, Index grid_n, const RVector& w) {
  // A 1 at sample j is the separable Dirichlet sum D(kx) D(ky).
  double energy = 0.0;
  for (Index j = 0; j < k.size(); ++j) {
    Complex dx = 0.0, dy = 0.0;
    for (Index i = 0; i < grid_n; ++i) {
      const double r = pixel_coordinate(i, grid_n, k.fov);
      dx += std::polar(1.0, -kTwoPi * k.points(j, 0) * r);
      dy += std::polar(1.0, -kTwoPi * k.points(j, 1) * r);
    }
    energy += w(j) * std::norm(dx * dy);
  }
  if (!(energy > 0)) fail(Errc::singular_density, "trajectory carries no DC energy");
  return static_cast<double>(grid_n * grid_n) / energy;
}

DcfWeights pipe_menon(const Trajectory& k, Index grid_n, double kernel_sigma, int iters) {
  DcfWeights out;
  out.w = pipe_menon_raw(k, grid_n, kernel_sigma, iters);
  out.w *= dc_normalization(k, grid_n, out.w);
  out.iterations_used = iters;
  return out;
}

}  // namespace sstraj
