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

// Desk-scale data: analytic ellipse phantoms, synthetic coil maps, and
// seeded datasets built from them.

#include "sstraj/core.hpp"

#include <cstdint>
#include <vector>

namespace sstraj {

// One ellipse in normalized image coordinates ([-1, 1] across the FOV, y up).
struct Ellipse {
  double intensity;
  double semi_x, semi_y;
  double center_x, center_y;
  double angle_deg;  // counter-clockwise
};

// Ten-ellipse Shepp-Logan with the higher-contrast (Toft) intensities.
std::vector<Ellipse> shepp_logan_ellipses();

// Sums ellipse intensities at each pixel center and clamps to [0, 1].
// Pixel (iy, ix) sits at x = (ix + 0.5 - n/2) / (n/2), y = -(iy + 0.5 - n/2) / (n/2).
ComplexImage rasterize(const std::vector<Ellipse>& ellipses, Index n);

ComplexImage shepp_logan(Index n);

// nc Gaussian-lobe sensitivities on a ring just outside the FOV, each with a
// slow linear phase, normalized so that sum_c |c|^2 = 1 everywhere.
CoilMaps synthetic_csm(Index n, Index nc, std::uint64_t seed);

struct DatasetOptions {
  double intensity_jitter = 0.10;  // relative, uniform
  double max_rotation_deg = 10.0;
  bool smooth_phase = false;
  double phase_amplitude = 1.0;  // radians, peak of the random phase field
};

struct PhantomCase {
  ComplexImage image;
  CoilMaps csm;
  std::uint64_t seed = 0;
};

// Element i is generated from a seed derived from (seed, i) alone, so any
// element can be regenerated on its own.
PhantomCase make_phantom_case(Index n, Index nc, std::uint64_t seed, std::uint64_t index,
                              const DatasetOptions& opts = {});

std::vector<PhantomCase> make_dataset(Index count, Index n, Index nc, std::uint64_t seed,
                                      const DatasetOptions& opts = {});

}  // namespace sstraj
