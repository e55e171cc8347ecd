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

#include "sstraj/encoding.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace sstraj {

namespace {

void check_shapes(const CoilMaps& csm, Index ny, Index nx) {
  if (csm.coils < 1 || csm.ny() != ny || csm.nx() != nx || csm.stacked.rows() != csm.coils * ny) {
    std::ostringstream os;
    os << "coil maps " << csm.coils << "x" << csm.ny() << "x" << csm.nx()
       << " do not match image " << ny << "x" << nx;
    fail(Errc::shape_mismatch, os.str());
  }
}

void check_kspace(const KSpaceSamples& y, const CoilMaps& csm, const Trajectory& k) {
  if (y.coils() != csm.coils || y.samples() != k.size())
    fail(Errc::shape_mismatch, "k-space shape does not match coils x trajectory length");
}

// Phase table exp(-i 2pi k_j r_i) for one axis: n × m.
CMatrix axis_phases(const Trajectory& k, int axis, Index n) {
  CMatrix table(n, k.size());
  for (Index i = 0; i < n; ++i) {
    const double r = pixel_coordinate(i, n, k.fov);
    for (Index j = 0; j < k.size(); ++j) table(i, j) = std::polar(1.0, -kTwoPi * k.points(j, axis) * r);
  }
  return table;
}

}  // namespace

Nudft::Nudft(const Trajectory& k, Index ny, Index nx) : m_(k.size()), ny_(ny), nx_(nx) {
  validate(k);
  ex_ = axis_phases(k, 0, nx);
  ey_ = axis_phases(k, 1, ny);
  ex_dx_ = ex_;
  for (Index i = 0; i < nx; ++i) ex_dx_.row(i) *= Complex(0.0, -kTwoPi * pixel_coordinate(i, nx, k.fov));
  ey_dy_ = ey_;
  for (Index i = 0; i < ny; ++i) ey_dy_.row(i) *= Complex(0.0, -kTwoPi * pixel_coordinate(i, ny, k.fov));
  ex_h_ = ex_.adjoint();
  ey_c_ = ey_.conjugate();
}

CMatrix Nudft::forward(const CMatrix& coil_images, CMatrix* partial) const {
  const Index nc = coil_images.rows() / ny_;
  CMatrix p = coil_images * ex_;  // nc*ny × m
  CMatrix y(nc, m_);
  for (Index c = 0; c < nc; ++c)
    y.row(c) = (ey_.array() * p.middleRows(c * ny_, ny_).array()).colwise().sum();
  if (partial) *partial = std::move(p);
  return y;
}

CMatrix Nudft::adjoint(const CMatrix& kspace) const {
  const Index nc = kspace.rows();
  CMatrix u(m_, nc * nx_);
  for (Index c = 0; c < nc; ++c)
    u.middleCols(c * nx_, nx_) = kspace.row(c).transpose().asDiagonal() * ex_h_;
  const CMatrix z = ey_c_ * u;  // ny × nc*nx
  CMatrix out(nc * ny_, nx_);
  for (Index c = 0; c < nc; ++c) out.middleRows(c * ny_, ny_) = z.middleCols(c * nx_, nx_);
  return out;
}

RMatrix Nudft::vjp(const CMatrix& coil_images, const CMatrix& cotangent, const CMatrix* partial) const {
  const Index nc = cotangent.rows();
  CMatrix own;
  if (!partial) {
    own = coil_images * ex_;
    partial = &own;
  }
  const CMatrix pdx = coil_images * ex_dx_;
  RMatrix g = RMatrix::Zero(m_, 2);
  for (Index c = 0; c < nc; ++c) {
    const auto dx = (ey_.array() * pdx.middleRows(c * ny_, ny_).array()).colwise().sum();
    const auto dy = (ey_dy_.array() * partial->middleRows(c * ny_, ny_).array()).colwise().sum();
    const auto cot = cotangent.row(c).array().conjugate();
    g.col(0) += (cot * dx).real().matrix().transpose();
    g.col(1) += (cot * dy).real().matrix().transpose();
  }
  return g;
}

CMatrix coil_images(const ComplexImage& x, const CoilMaps& csm) {
  check_shapes(csm, x.ny(), x.nx());
  CMatrix out(csm.stacked.rows(), csm.nx());
  for (Index c = 0; c < csm.coils; ++c)
    out.middleRows(c * x.ny(), x.ny()) = csm.coil(c).cwiseProduct(x.pixels);
  return out;
}

CMatrix coil_combine(const CMatrix& stacked, const CoilMaps& csm) {
  CMatrix out = CMatrix::Zero(csm.ny(), csm.nx());
  for (Index c = 0; c < csm.coils; ++c)
    out += csm.coil(c).conjugate().cwiseProduct(stacked.middleRows(c * csm.ny(), csm.ny()));
  return out;
}

KSpaceSamples forward(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k) {
  const Nudft op(k, x.ny(), x.nx());
  return KSpaceSamples(op.forward(coil_images(x, csm)));
}

ComplexImage adjoint(const KSpaceSamples& y, const CoilMaps& csm, const Trajectory& k,
                     const std::optional<RVector>& weights) {
  check_kspace(y, csm, k);
  CMatrix data = y.data;
  if (weights) {
    if (weights->size() != k.size()) fail(Errc::shape_mismatch, "weights length does not match trajectory");
    if ((weights->array() < 0).any()) fail(Errc::invalid_argument, "weights must be non-negative");
    data = data * weights->asDiagonal();
  }
  const Nudft op(k, csm.ny(), csm.nx());
  return ComplexImage(coil_combine(op.adjoint(data), csm));
}

RMatrix trajectory_vjp(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k,
                       const KSpaceSamples& cotangent) {
  check_kspace(cotangent, csm, k);
  const Nudft op(k, x.ny(), x.nx());
  return op.vjp(coil_images(x, csm), cotangent.data);
}

ModulationVector blur_vector(const Trajectory& k, const ScanConfig& scan) {
  if (!(scan.t2 > 0)) fail(Errc::invalid_argument, "t2 must be > 0");
  // The trajectory's own dwell sets elapsed time, so it also sets the auto scale.
  ScanConfig timed = scan;
  timed.dwell = k.dwell;
  const double scale = timed.resolved_blur_scale(k.size());
  const double reference = scan.apply_te_scale ? std::exp(-scan.te / scan.t2) : 1.0;
  ModulationVector out;
  out.b.resize(k.size());
  for (Index j = 0; j < k.size(); ++j)
    out.b(j) = reference * std::exp(-(static_cast<double>(j) * k.dwell * scale) / scan.t2);
  return out;
}

KSpaceSamples apply_blur(const KSpaceSamples& y, const ModulationVector& b) {
  if (b.b.size() != y.samples()) fail(Errc::shape_mismatch, "modulation length does not match samples");
  return KSpaceSamples(y.data * b.b.asDiagonal());
}

KSpaceSamples add_noise(const KSpaceSamples& y, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) fail(Errc::invalid_argument, "noise sigma must be >= 0");
  if (sigma == 0.0) return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  KSpaceSamples out = y;
  for (Index c = 0; c < out.coils(); ++c)
    for (Index j = 0; j < out.samples(); ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      out.data(c, j) += Complex(re, im);
    }
  return out;
}

}  // namespace sstraj
