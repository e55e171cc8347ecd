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

// Random variable-density point sets and their ordering into a single-shot
// tour that starts at the k-space center.

#include "sstraj/core.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sstraj {

struct PointSet {
  RMatrix points;  // m × 2, cycles/meter, snapped to grid cells
  std::uint64_t seed = 0;

  Index size() const { return points.rows(); }
};

// Draws round(n^2 / accel) distinct grid cells without replacement with
// probability proportional to (1 + |k|/k_max)^-decay. The origin cell is
// always included. Points are returned in raster order.
PointSet generate_vd_points(Index grid_n, double fov, double accel, double decay,
                            std::uint64_t seed);

// Index of the point closest to the origin (lowest index on ties).
Index center_index(const RMatrix& points);

// Greedy nearest-unvisited-neighbor ordering starting at `start`.
std::vector<Index> nn_tour(const RMatrix& points, Index start);

// Open-path 2-opt with best-improvement per pass. order[0] never moves.
std::vector<Index> two_opt(const RMatrix& points, std::vector<Index> order, int max_passes);

double path_length(const RMatrix& points, std::span<const Index> order);
double path_length(const RMatrix& ordered_points);

inline constexpr int kDefaultTwoOptPasses = 100000;

// two_opt(nn_tour(points, center)) with the dwell and fov attached. The
// result is generally not kinematically feasible.
Trajectory build_initial_trajectory(const PointSet& points, double dwell, double fov,
                                    int max_passes = kDefaultTwoOptPasses);

}  // namespace sstraj
