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

#include "sstraj/sampling.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sstraj {

namespace {

using detail::unit_uniform;

double distance(const RMatrix& p, Index a, Index b) {
  const double dx = p(a, 0) - p(b, 0);
  const double dy = p(a, 1) - p(b, 1);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

PointSet generate_vd_points(Index grid_n, double fov, double accel, double decay,
                            std::uint64_t seed) {
  if (grid_n < 2) fail(Errc::invalid_argument, "grid_n must be >= 2");
  if (!(fov > 0)) fail(Errc::invalid_argument, "fov must be > 0");
  if (!(accel > 1)) fail(Errc::invalid_argument, "accel must be > 1");
  if (!(decay > 0)) fail(Errc::invalid_argument, "decay must be > 0");
  const Index cells = grid_n * grid_n;
  const auto m = static_cast<Index>(std::llround(static_cast<double>(cells) / accel));
  if (m < 2) fail(Errc::accel_too_large, "accel too large: fewer than 2 samples remain");

  // Efraimidis-Spirakis: key = log(u) / w, keep the m-1 largest keys.
  std::mt19937_64 rng(seed);
  const Index half = grid_n / 2;
  const Index origin = half * grid_n + half;
  std::vector<std::pair<double, Index>> keys;
  keys.reserve(static_cast<std::size_t>(cells - 1));
  for (Index cell = 0; cell < cells; ++cell) {
    const double u = unit_uniform(rng);
    if (cell == origin) continue;
    const double cu = static_cast<double>(cell % grid_n - half);
    const double cv = static_cast<double>(cell / grid_n - half);
    const double radius = std::hypot(cu, cv) / static_cast<double>(half);
    const double weight = std::pow(1.0 + radius, -decay);
    keys.emplace_back(std::log(u) / weight, cell);
  }
  std::partial_sort(keys.begin(), keys.begin() + (m - 1), keys.end(),
                    [](const auto& a, const auto& b) {
                      return a.first > b.first || (a.first == b.first && a.second < b.second);
                    });
  std::vector<Index> chosen{origin};
  for (Index i = 0; i < m - 1; ++i) chosen.push_back(keys[static_cast<std::size_t>(i)].second);
  std::sort(chosen.begin(), chosen.end());

  PointSet out;
  out.seed = seed;
  out.points.resize(m, 2);
  for (Index i = 0; i < m; ++i) {
    const Index cell = chosen[static_cast<std::size_t>(i)];
    out.points(i, 0) = static_cast<double>(cell % grid_n - half) / fov;
    out.points(i, 1) = static_cast<double>(cell / grid_n - half) / fov;
  }
  return out;
}

Index center_index(const RMatrix& points) {
  if (points.rows() == 0) fail(Errc::empty_input, "empty point set");
  Index best = 0;
  double best_r = points.row(0).squaredNorm();
  for (Index i = 1; i < points.rows(); ++i) {
    const double r = points.row(i).squaredNorm();
    if (r < best_r) {
      best_r = r;
      best = i;
    }
  }
  return best;
}

std::vector<Index> nn_tour(const RMatrix& points, Index start) {
  const Index m = points.rows();
  if (m == 0) fail(Errc::empty_input, "empty point set");
  if (start < 0 || start >= m) fail(Errc::invalid_argument, "start index out of range");
  std::vector<Index> order{start};
  order.reserve(static_cast<std::size_t>(m));
  std::vector<char> visited(static_cast<std::size_t>(m), 0);
  visited[static_cast<std::size_t>(start)] = 1;
  Index current = start;
  for (Index step = 1; step < m; ++step) {
    Index best = -1;
    double best_d = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (visited[static_cast<std::size_t>(j)]) continue;
      const double dx = points(j, 0) - points(current, 0);
      const double dy = points(j, 1) - points(current, 1);
      const double d = dx * dx + dy * dy;
      if (best < 0 || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    visited[static_cast<std::size_t>(best)] = 1;
    order.push_back(best);
    current = best;
  }
  return order;
}

std::vector<Index> two_opt(const RMatrix& points, std::vector<Index> order, int max_passes) {
  const auto m = static_cast<Index>(order.size());
  if (m < 3) return order;
  auto d = [&](Index a, Index b) {
    return distance(points, order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
  };
  const double tol = 1e-12 * std::max(1.0, path_length(points, order));
  for (int pass = 0; pass < max_passes; ++pass) {
    // Reversing order[i..j] replaces edges (i-1,i), (j,j+1) by (i-1,j), (i,j+1).
    double best_delta = -tol;
    Index best_i = -1, best_j = -1;
    for (Index i = 1; i < m - 1; ++i) {
      const double removed_left = d(i - 1, i);
      for (Index j = i + 1; j < m; ++j) {
        double delta = d(i - 1, j) - removed_left;
        if (j + 1 < m) delta += d(i, j + 1) - d(j, j + 1);
        if (delta < best_delta) {
          best_delta = delta;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;
    std::reverse(order.begin() + best_i, order.begin() + best_j + 1);
  }
  return order;
}

double path_length(const RMatrix& points, std::span<const Index> order) {
  double total = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) total += distance(points, order[i - 1], order[i]);
  return total;
}

double path_length(const RMatrix& ordered_points) {
  double total = 0.0;
  for (Index i = 1; i < ordered_points.rows(); ++i)
    total += (ordered_points.row(i) - ordered_points.row(i - 1)).norm();
  return total;
}

Trajectory build_initial_trajectory(const PointSet& points, double dwell, double fov,
                                    int max_passes) {
  if (!(dwell > 0) || !(fov > 0)) fail(Errc::invalid_argument, "dwell and fov must be positive");
  const Index start = center_index(points.points);
  const auto order = two_opt(points.points, nn_tour(points.points, start), max_passes);
  Trajectory k;
  k.dwell = dwell;
  k.fov = fov;
  k.points.resize(points.size(), 2);
  for (Index i = 0; i < points.size(); ++i) k.points.row(i) = points.points.row(order[static_cast<std::size_t>(i)]);
  return k;
}

}  // namespace sstraj
