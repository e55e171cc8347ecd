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

// Three-step reconstruction: density-compensated regridding, CG-SENSE on the
// l2-regularized normal equations, and a pluggable post-reconstructor.

#include "sstraj/core.hpp"
#include "sstraj/dcf.hpp"
#include "sstraj/encoding.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sstraj {

// Right-hand side convention for CG-SENSE.
//   dcf_adjoint:   (A^H W A + lambda I) x = A^H W y   (W = DCF weights)
//   plain_adjoint: (A^H A + lambda I) x = A^H y
enum class RhsMode { dcf_adjoint, plain_adjoint };

struct ReconConfig {
  double dcf_sigma = kDefaultDcfSigma;
  int dcf_iters = kDefaultDcfIterations;
  std::optional<double> lambda;  // absolute; unset means lambda_rel * mean diag(A^H W A)
  double lambda_rel = 1e-3;
  int cg_iters = 30;
  RhsMode rhs = RhsMode::dcf_adjoint;
  std::string plugin = "identity";
  double sharpen_alpha = 0.05;

  void check() const;
};

ComplexImage regrid(const KSpaceSamples& y_b, const CoilMaps& csm, const Trajectory& k, const DcfWeights& w);

// A^H W A x + lambda x; W defaults to the identity.
ComplexImage normal_apply(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k, double lambda,
                          const std::optional<RVector>& weights = std::nullopt);

// Exact mean over pixels of diag(A^H W A) = mean(sum_c |c|^2) * sum_j w_j.
double mean_normal_diagonal(const CoilMaps& csm, const std::optional<RVector>& weights, Index samples);

double resolve_lambda(const ReconConfig& cfg, const CoilMaps& csm, const std::optional<RVector>& weights,
                      Index samples);

// ---------------------------------------------------------------------------
// Conjugate gradients on a Hermitian positive (semi)definite operator, with an
// optional trace of every iterate for reverse-mode differentiation.

using LinearOp = std::function<CMatrix(const CMatrix&)>;

struct CgTrace {
  CMatrix r0;
  std::vector<CMatrix> p, q, r;  // p_i, q_i = M p_i, r_{i+1}
  std::vector<double> rho;       // rho_0 .. rho_n
  std::vector<double> sigma, alpha, beta;
  int iterations() const { return static_cast<int>(sigma.size()); }
};

struct CgResult {
  CMatrix x;
  std::vector<double> residual_norms;  // recursive residual, one per iterate
  int iterations = 0;
};

// Runs up to n_iter iterations from `init`. Stops early only once the residual
// has collapsed to rounding level. Throws Errc::cg_breakdown on a
// non-positive curvature direction.
CgResult conjugate_gradient(const LinearOp& op, const CMatrix& rhs, const CMatrix& init, int n_iter,
                            CgTrace* trace = nullptr);

// Reverse sweep of conjugate_gradient() started from zero. `apply_adjoint(i,
// q_bar)` must return M q_bar and account for any parameter dependence of
// Re<q_bar, M p_i>. Returns the cotangent of the right-hand side.
CMatrix cg_backward(const CgTrace& trace, const CMatrix& x_bar,
                    const std::function<CMatrix(int, const CMatrix&)>& apply_adjoint);

struct SenseResult {
  ComplexImage image;
  std::vector<double> residual_norms;
  int iterations = 0;
};

// Runs n_iter CG iterations on the normal equations selected by `rhs`. `dcf`
// is required for RhsMode::dcf_adjoint.
SenseResult cg_sense(const KSpaceSamples& y_b, const CoilMaps& csm, const Trajectory& k, double lambda, int n_iter,
                     const ComplexImage& init, RhsMode rhs = RhsMode::plain_adjoint,
                     const DcfWeights* dcf = nullptr);

// ---------------------------------------------------------------------------
// Post-reconstructors: named image -> image transforms without hidden state.

struct PostContext {
  const Trajectory* trajectory = nullptr;  // needed by tikhonov_sharpen
  ScanConfig scan;
  double sharpen_alpha = 0.05;
};

class PostReconstructor {
 public:
  virtual ~PostReconstructor() = default;
  virtual std::string name() const = 0;
  virtual ComplexImage apply(const ComplexImage& x0) const = 0;
  virtual bool differentiable() const { return false; }
  // Pulls an image cotangent back through apply(); linear plugins only.
  virtual CMatrix vjp(const ComplexImage& x0, const CMatrix& cotangent) const;
};

using PostFactory = std::function<std::unique_ptr<PostReconstructor>(const PostContext&)>;

void register_post_reconstructor(const std::string& name, PostFactory factory);
std::vector<std::string> registered_post_reconstructors();

// Built-ins: "identity", "tikhonov_sharpen", and "exec:<program>" which runs
// `<program> <input.lsst> <output.lsst>` on array files.
std::unique_ptr<PostReconstructor> make_post_reconstructor(const std::string& name, const PostContext& ctx);

ComplexImage post_reconstruct(const ComplexImage& x0, const PostReconstructor& plugin);

// Blur modulation per Cartesian k-space cell, taken from the nearest
// trajectory sample. Used by tikhonov_sharpen.
RMatrix cartesian_modulation(const Trajectory& k, const RVector& b, Index ny, Index nx);

struct Reconstruction {
  ComplexImage regridded;  // x_ls
  ComplexImage sense;      // x0
  ComplexImage final;      // xhat
  DcfWeights dcf;
  double lambda = 0;
  std::vector<double> residual_norms;
};

// regrid -> cg_sense (from zero) -> post_reconstruct with cfg.cg_iters iterations.
Reconstruction reconstruct(const KSpaceSamples& y_b, const CoilMaps& csm, const Trajectory& k,
                           const ReconConfig& cfg, const ScanConfig& scan);

}  // namespace sstraj
