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

#include "sstraj/core.hpp"

#include <cmath>
#include <sstream>

namespace sstraj {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::non_finite_value: return "non-finite-value";
    case Errc::csm_not_normalized: return "csm-not-normalized";
    case Errc::accel_too_large: return "accel-too-large";
    case Errc::empty_input: return "empty-input";
    case Errc::singular_density: return "singular-density";
    case Errc::cg_breakdown: return "cg-breakdown";
    case Errc::divergence: return "divergence";
    case Errc::io: return "io-error";
    case Errc::format: return "format-error";
    case Errc::unknown_plugin: return "unknown-plugin";
    case Errc::plugin_failed: return "plugin-failed";
  }
  return "unknown";
}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

void PhysicsLimits::check() const {
  if (!(gamma > 0 && g_max > 0 && s_max > 0) || !std::isfinite(gamma * g_max * s_max))
    fail(Errc::invalid_argument, "physics limits must be finite and strictly positive");
}

void ScanConfig::check() const {
  if (!(te >= 0)) fail(Errc::invalid_argument, "te must be >= 0");
  if (!(t2 > 0)) fail(Errc::invalid_argument, "t2 must be > 0");
  if (!(dwell > 0)) fail(Errc::invalid_argument, "dwell must be > 0");
  if (!(noise_sigma >= 0)) fail(Errc::invalid_argument, "noise_sigma must be >= 0");
  if (!(accel > 1)) fail(Errc::invalid_argument, "accel must be > 1");
  if (blur_scale && !(*blur_scale >= 0)) fail(Errc::invalid_argument, "blur_scale must be >= 0");
}

double ScanConfig::resolved_blur_scale(Index samples) const {
  if (blur_scale) return *blur_scale;
  if (samples < 2) return 0.0;
  return blur_total_decay * t2 / (static_cast<double>(samples - 1) * dwell);
}

namespace {

void require_finite(const CMatrix& m, const char* what) {
  if (!m.allFinite()) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) {
          std::ostringstream os;
          os << what << " has a non-finite value at (" << i << ", " << j << ")";
          fail(Errc::non_finite_value, os.str());
        }
  }
}

}  // namespace

void validate(const ComplexImage& image) {
  if (image.ny() < 2 || image.nx() < 2)
    fail(Errc::shape_mismatch, "image must be at least 2x2");
  require_finite(image.pixels, "image");
}

void validate(const ComplexImage& image, const CoilMaps& csm) {
  validate(image);
  if (csm.coils < 1 || csm.stacked.rows() != csm.coils * image.ny() || csm.nx() != image.nx()) {
    std::ostringstream os;
    os << "coil maps (" << csm.coils << " x " << csm.ny() << " x " << csm.nx()
       << ") do not match image (" << image.ny() << " x " << image.nx() << ")";
    fail(Errc::shape_mismatch, os.str());
  }
  require_finite(csm.stacked, "coil maps");
  const RMatrix sos = sum_of_squares(csm);
  bool any_support = false;
  for (Index i = 0; i < sos.rows(); ++i) {
    for (Index j = 0; j < sos.cols(); ++j) {
      const double s = sos(i, j);
      if (s == 0.0) continue;  // outside the support mask
      any_support = true;
      if (std::abs(s - 1.0) > 1e-6) {
        std::ostringstream os;
        os << "coil sum-of-squares is " << s << " at pixel (" << i << ", " << j << ")";
        fail(Errc::csm_not_normalized, os.str());
      }
    }
  }
  if (!any_support) fail(Errc::csm_not_normalized, "coil maps are zero everywhere");
}

void validate(const Trajectory& k) {
  if (k.points.cols() != 2) fail(Errc::shape_mismatch, "trajectory must be m x 2");
  if (k.size() < 1) fail(Errc::empty_input, "trajectory is empty");
  if (!(k.dwell > 0) || !(k.fov > 0))
    fail(Errc::invalid_argument, "trajectory dwell and fov must be positive");
  if (!k.points.allFinite()) fail(Errc::non_finite_value, "trajectory has non-finite points");
}

RMatrix sum_of_squares(const CoilMaps& csm) {
  RMatrix sos = RMatrix::Zero(csm.ny(), csm.nx());
  for (Index c = 0; c < csm.coils; ++c) sos += csm.coil(c).cwiseAbs2();
  return sos;
}

Complex inner(const CMatrix& a, const CMatrix& b) {
  return (a.array().conjugate() * b.array()).sum();
}

double real_inner(const CMatrix& a, const CMatrix& b) {
  return (a.real().array() * b.real().array()).sum() + (a.imag().array() * b.imag().array()).sum();
}

}  // namespace sstraj
