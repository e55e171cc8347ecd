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

// Single-shot forward model: exact non-uniform DFT with coil sensitivities,
// T2 decay along the readout, and additive complex Gaussian noise.

#include "sstraj/core.hpp"

#include <cstdint>
#include <optional>

namespace sstraj {

// Separable exact NUDFT bound to one trajectory and image shape. The phase
// exp(-i 2pi k.r) factors into an x part and a y part, so every transform is
// a pair of dense products.
class Nudft {
 public:
  Nudft(const Trajectory& k, Index ny, Index nx);

  Index samples() const { return m_; }
  Index ny() const { return ny_; }
  Index nx() const { return nx_; }

  // Coil images stacked (nc*ny × nx) -> k-space (nc × m). If `partial` is
  // given it receives the x-transformed intermediate (nc*ny × m), which
  // trajectory_vjp can reuse.
  CMatrix forward(const CMatrix& coil_images, CMatrix* partial = nullptr) const;

  // k-space (nc × m) -> coil images (nc*ny × nx), no weighting.
  CMatrix adjoint(const CMatrix& kspace) const;

  // Gradient (m × 2) of Re<cotangent, forward(coil_images)> with respect to
  // the trajectory. `partial` must come from forward() of the same images.
  RMatrix vjp(const CMatrix& coil_images, const CMatrix& cotangent,
              const CMatrix* partial = nullptr) const;

 private:
  Index m_, ny_, nx_;
  CMatrix ex_;     // nx × m
  CMatrix ex_dx_;  // nx × m, ex_ scaled by -i 2pi x
  CMatrix ex_h_;   // m × nx, conjugate transpose of ex_
  CMatrix ey_;     // ny × m
  CMatrix ey_dy_;  // ny × m, ey_ scaled by -i 2pi y
  CMatrix ey_c_;   // ny × m, conjugate of ey_
};

// csm ∘ x, stacked per coil.
CMatrix coil_images(const ComplexImage& x, const CoilMaps& csm);
// sum_c conj(csm_c) ∘ stacked_c
CMatrix coil_combine(const CMatrix& stacked, const CoilMaps& csm);

KSpaceSamples forward(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k);

ComplexImage adjoint(const KSpaceSamples& y, const CoilMaps& csm, const Trajectory& k,
                     const std::optional<RVector>& weights = std::nullopt);

RMatrix trajectory_vjp(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k,
                       const KSpaceSamples& cotangent);

// Relative T2 decay along the readout; sample 0 is the reference.
struct ModulationVector {
  RVector b;
};

ModulationVector blur_vector(const Trajectory& k, const ScanConfig& scan);

KSpaceSamples apply_blur(const KSpaceSamples& y, const ModulationVector& b);

// Adds independent N(0, sigma^2) to the real and imaginary parts.
KSpaceSamples add_noise(const KSpaceSamples& y, double sigma, std::uint64_t seed);

}  // namespace sstraj
