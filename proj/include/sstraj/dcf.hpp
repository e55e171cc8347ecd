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

// Iterative (Pipe-Menon) sampling-density compensation.

#include "sstraj/core.hpp"

namespace sstraj {

struct DcfWeights {
  RVector w;
  int iterations_used = 0;
};

inline constexpr double kDefaultDcfSigma = 0.7;  // grid cells
inline constexpr int kDefaultDcfIterations = 20;

// Fixed-point iteration w <- w / (C w) with a truncated Gaussian kernel
// C_jl = exp(-d^2 / 2 sigma^2), d <= 4 sigma, d the k-space distance in grid
// cells measured periodically over the grid_n-cell Nyquist box. The result is
// rescaled so that the weighted adjoint of a constant image's forward
// transform has the same mean as the image.
DcfWeights pipe_menon(const Trajectory& k, Index grid_n, double kernel_sigma = kDefaultDcfSigma,
                      int iters = kDefaultDcfIterations);

// Unnormalized iterate after `iters` steps; pipe_menon() rescales this.
RVector pipe_menon_raw(const Trajectory& k, Index grid_n, double kernel_sigma, int iters);

// Scale s such that mean(A^H (s w) A 1) = 1 on a grid_n × grid_n image.
double dc_normalization(const Trajectory& k, Index grid_n, const RVector& w);

}  // namespace sstraj
