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

// Trajectory learning through the differentiable pipeline
//   simulate -> DCF -> regrid -> unrolled CG-SENSE -> post-reconstruct -> loss
// with hand-written reverse-mode gradients with respect to k.

#include "sstraj/core.hpp"
#include "sstraj/metrics.hpp"
#include "sstraj/phantom.hpp"
#include "sstraj/recon.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace sstraj {

// y_b = blur(A x) plus noise seeded from (scan.noise_seed, case_index).
KSpaceSamples simulate(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k, const ScanConfig& scan,
                       std::uint64_t case_index = 0);

// DCF weights and lambda pinned from outside, e.g. to keep them fixed while
// finite-differencing the trajectory.
struct FrozenRecon {
  RVector w;
  double lambda = 0;
};

// Everything the reverse sweep needs from one forward pass.
struct Tape {
  std::shared_ptr<const Nudft> op;
  CoilMaps csm;
  CMatrix coil_x, partial_x;  // C x and its x-transformed intermediate
  RVector blur;
  KSpaceSamples y_b;
  std::optional<RVector> w;  // set in dcf_adjoint mode
  double lambda = 0;
  CgTrace trace;
  std::vector<CMatrix> coil_p, partial_p, a_p;  // per CG iteration: C p_i, its partial, A C p_i
  ComplexImage x0;
  std::shared_ptr<const PostReconstructor> plugin;
};

struct PipelineResult {
  ComplexImage xhat;
  DcfWeights dcf;
  Tape tape;
};

// Runs recon.cg_iters CG iterations from zero. `frozen` replaces the DCF
// weights and lambda; with record = false the tape stays empty.
PipelineResult pipeline_forward(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k,
                                const ScanConfig& scan, const ReconConfig& recon, std::uint64_t case_index = 0,
                                const FrozenRecon* frozen = nullptr, bool record = true);

// d Re<xhat_bar, xhat> / d k for one recorded forward pass (m × 2).
RMatrix pipeline_backward(const Tape& tape, const CMatrix& xhat_bar);

struct LossGradient {
  RMatrix grad;  // m × 2
  double total = 0;
  double task = 0;        // batch mean
  double constraint = 0;  // unweighted by beta
};

struct PipelineSettings {
  ScanConfig scan;
  ReconConfig recon;  // recon.cg_iters is the unroll depth here
  PhysicsLimits limits;
  LossWeights loss;
};

// Mean task loss over the batch plus beta * constraint loss, and its exact
// gradient. DCF weights and lambda are constants. `threads` > 1 evaluates
// batch members concurrently; the reduction order is fixed.
LossGradient loss_gradient(const std::vector<const PhantomCase*>& batch, const std::vector<std::uint64_t>& case_ids,
                           const Trajectory& k, const PipelineSettings& settings, int threads = 1,
                           const FrozenRecon* frozen = nullptr, bool with_gradient = true);

// ---------------------------------------------------------------------------

struct OptimConfig {
  int steps = 500;
  int batch = 4;
  std::optional<double> lr;  // cycles/m; unset means 1e-2 * k_max
  double lr_final_ratio = 1.0;  // cosine decay to lr * ratio; 1 keeps lr constant
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int cg_unroll = 10;
  std::uint64_t seed = 0;
  bool clamp_to_nyquist = true;
  bool pin_first = true;  // keep the first sample (k-space center) fixed
  // Training hinges use limits shrunk by this fraction so that the returned
  // trajectory clears the true limits with some room.
  double constraint_margin = 0.0;
  // When > 0, beta is replaced at step 0 by auto_balance * task / constraint.
  double auto_balance = 0.0;
  int val_every = 25;
  double divergence_factor = 1e3;
  int threads = 1;

  void check() const;
};

struct AdamState {
  RMatrix m, v;
  int t = 0;
};

// One Adam update with bias correction. Rows listed as pinned are left as is.
// With clamp set, coordinates are clipped to [-k_max, k_max].
Trajectory adam_step(const Trajectory& k, const RMatrix& grad, AdamState& state, double lr, const OptimConfig& cfg,
                     std::optional<double> k_max = std::nullopt);

double learning_rate(const OptimConfig& cfg, int step, double base_lr);

struct Evaluation {
  std::vector<double> psnr, ssim, task;
  double mean_psnr = 0, mean_ssim = 0, mean_task = 0;
  double constraint = 0;  // unweighted, true limits
  double total = 0;       // mean_task + beta * constraint
};

// simulate + reconstruct (inference settings) on every case.
Evaluation evaluate_trajectory(const std::vector<PhantomCase>& cases, const Trajectory& k,
                               const PipelineSettings& settings, int threads = 1);

struct StepRecord {
  int step = 0;
  double lr = 0;
  double total = 0, task = 0, constraint = 0;
  double max_v_violation = 0, max_a_violation = 0;  // true limits, before the update
  Index v_violations = 0, a_violations = 0;
  std::optional<Evaluation> validation;
};

struct OptimReport {
  std::vector<StepRecord> records;
  Trajectory initial, last, best;  // best by validation total loss
  int best_step = 0;
  Evaluation initial_validation, best_validation;
  double beta = 0;  // effective beta after auto-balance
};

using ProgressFn = std::function<void(const StepRecord&)>;

// k-only first-order training. `settings.recon` holds the inference
// reconstruction; training unrolls cfg.cg_unroll CG iterations.
OptimReport optimize_trajectory(const std::vector<PhantomCase>& train, const std::vector<PhantomCase>& validation,
                                const Trajectory& k0, const PipelineSettings& settings, const OptimConfig& cfg,
                                const ProgressFn& progress = {});

// ---------------------------------------------------------------------------

struct GradProbe {
  Index row = 0;
  int col = 0;
  double analytic = 0, numeric = 0, rel_error = 0;
  bool kink = false;
};

struct GradCheckReport {
  std::vector<GradProbe> probes;
  double max_rel_error = 0;  // over non-kink probes
  int kinks = 0;
};

// Central differences of the batch-1 total loss with step eps * k_max at
// n_probe random coordinates, DCF weights and lambda held fixed. A probe is a
// kink when any hinge changes state between k - h and k + h.
GradCheckReport grad_check(const PhantomCase& instance, const Trajectory& k, const PipelineSettings& settings,
                           double eps, int n_probe, std::uint64_t seed);

}  // namespace sstraj
