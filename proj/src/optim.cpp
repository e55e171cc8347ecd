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

#include "sstraj/optim.hpp"

#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace sstraj {

namespace {

CMatrix weigh(const CMatrix& y, const std::optional<RVector>& w) { return w ? CMatrix(y * w->asDiagonal()) : y; }

PhysicsLimits shrink(PhysicsLimits limits, double margin) {
  limits.g_max *= 1.0 - margin;
  limits.s_max *= 1.0 - margin;
  return limits;
}

double k_max_for(const ComplexImage& x, const Trajectory& k) { return k.nyquist(x.nx()); }

}  // namespace

KSpaceSamples simulate(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k, const ScanConfig& scan,
                       std::uint64_t case_index) {
  scan.check();
  validate(x, csm);
  const KSpaceSamples y = apply_blur(forward(x, csm, k), blur_vector(k, scan));
  if (scan.noise_sigma == 0.0) return y;
  return add_noise(y, scan.noise_sigma, detail::derive_seed(scan.noise_seed, case_index));
}

PipelineResult pipeline_forward(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k,
                                const ScanConfig& scan, const ReconConfig& recon, std::uint64_t case_index,
                                const FrozenRecon* frozen, bool record) {
  recon.check();
  scan.check();
  validate(x, csm);
  PipelineResult out;
  Tape& t = out.tape;
  t.op = std::make_shared<Nudft>(k, x.ny(), x.nx());
  const Nudft& op = *t.op;
  t.csm = csm;
  t.coil_x = coil_images(x, csm);
  const CMatrix y = op.forward(t.coil_x, &t.partial_x);
  t.blur = blur_vector(k, scan).b;
  t.y_b = KSpaceSamples(y * t.blur.asDiagonal());
  if (scan.noise_sigma > 0)
    t.y_b = add_noise(t.y_b, scan.noise_sigma, detail::derive_seed(scan.noise_seed, case_index));

  if (frozen) {
    if (frozen->w.size() != k.size()) fail(Errc::shape_mismatch, "frozen DCF length does not match trajectory");
    out.dcf.w = frozen->w;
  } else {
    out.dcf = pipe_menon(k, x.nx(), recon.dcf_sigma, recon.dcf_iters);
  }
  if (recon.rhs == RhsMode::dcf_adjoint) t.w = out.dcf.w;
  t.lambda = frozen ? frozen->lambda : resolve_lambda(recon, csm, t.w, k.size());

  const CMatrix rhs = coil_combine(op.adjoint(weigh(t.y_b.data, t.w)), csm);
  const LinearOp normal = [&](const CMatrix& v) -> CMatrix {
    CMatrix cv = coil_images(ComplexImage(v), csm);
    CMatrix partial;
    CMatrix av = op.forward(cv, &partial);
    CMatrix mv = coil_combine(op.adjoint(weigh(av, t.w)), csm) + t.lambda * v;
    if (record) {
      t.coil_p.push_back(std::move(cv));
      t.partial_p.push_back(std::move(partial));
      t.a_p.push_back(std::move(av));
    }
    return mv;
  };
  CgResult cg = conjugate_gradient(normal, rhs, CMatrix::Zero(x.ny(), x.nx()), recon.cg_iters,
                                   record ? &t.trace : nullptr);
  t.x0 = ComplexImage(std::move(cg.x));
  const PostContext ctx{&k, scan, recon.sharpen_alpha};
  t.plugin = make_post_reconstructor(recon.plugin, ctx);
  if (record && !t.plugin->differentiable())
    fail(Errc::invalid_argument, "post-reconstructor '" + t.plugin->name() + "' cannot be trained through");
  out.xhat = t.plugin->apply(t.x0);
  return out;
}

RMatrix pipeline_backward(const Tape& t, const CMatrix& xhat_bar) {
  const Nudft& op = *t.op;
  const CMatrix x0_bar = t.plugin->vjp(t.x0, xhat_bar);
  RMatrix g = RMatrix::Zero(op.samples(), 2);

  // Each CG step applied M = C^H A^H W A C + lambda; Re<q_bar, M p> is
  // bilinear in A, so both factors contribute a trajectory term.
  const auto apply_adjoint = [&](int i, const CMatrix& q_bar) -> CMatrix {
    const auto s = static_cast<std::size_t>(i);
    const CMatrix u = coil_images(ComplexImage(q_bar), t.csm);
    CMatrix partial_u;
    const CMatrix au = op.forward(u, &partial_u);
    const CMatrix wau = weigh(au, t.w);
    g += op.vjp(u, weigh(t.a_p[s], t.w), &partial_u);
    g += op.vjp(t.coil_p[s], wau, &t.partial_p[s]);
    return coil_combine(op.adjoint(wau), t.csm) + t.lambda * q_bar;
  };
  const CMatrix rhs_bar = cg_backward(t.trace, x0_bar, apply_adjoint);

  // rhs = C^H A^H W y_b with y_b = b * A C x.
  const CMatrix u = coil_images(ComplexImage(rhs_bar), t.csm);
  CMatrix partial_u;
  const CMatrix au = op.forward(u, &partial_u);
  g += op.vjp(u, weigh(t.y_b.data, t.w), &partial_u);
  const CMatrix y_bar = weigh(au, t.w) * t.blur.asDiagonal();
  g += op.vjp(t.coil_x, y_bar, &t.partial_x);
  return g;
}

LossGradient loss_gradient(const std::vector<const PhantomCase*>& batch, const std::vector<std::uint64_t>& case_ids,
                           const Trajectory& k, const PipelineSettings& settings, int threads,
                           const FrozenRecon* frozen, bool with_gradient) {
  if (batch.empty()) fail(Errc::empty_input, "empty batch");
  if (case_ids.size() != batch.size()) fail(Errc::shape_mismatch, "one case id per batch member expected");
  settings.loss.check();
  std::vector<double> task(batch.size());
  std::vector<RMatrix> grads(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t b) {
    const PhantomCase& c = *batch[b];
    const PipelineResult r =
        pipeline_forward(c.image, c.csm, k, settings.scan, settings.recon, case_ids[b], frozen, with_gradient);
    CMatrix xhat_bar;
    task[b] = task_loss(r.xhat, c.image, with_gradient ? &xhat_bar : nullptr);
    if (with_gradient) grads[b] = pipeline_backward(r.tape, xhat_bar);
  });
  const double n = static_cast<double>(batch.size());
  LossGradient out;
  for (double v : task) out.task += v;
  out.task /= n;
  out.constraint = constraint_loss(k, settings.limits, settings.loss);
  out.total = out.task + settings.loss.beta * out.constraint;
  if (with_gradient) {
    out.grad = RMatrix::Zero(k.size(), 2);
    for (const auto& gb : grads) out.grad += gb;
    out.grad /= n;
    if (settings.loss.beta > 0) out.grad += settings.loss.beta * constraint_gradient(k, settings.limits, settings.loss);
  }
  return out;
}

// ---------------------------------------------------------------------------

void OptimConfig::check() const {
  if (steps < 1) fail(Errc::invalid_argument, "steps must be >= 1");
  if (batch < 1) fail(Errc::invalid_argument, "batch must be >= 1");
  if (lr && !(*lr >= 0 && std::isfinite(*lr))) fail(Errc::invalid_argument, "lr must be finite and >= 0");
  if (!(lr_final_ratio >= 0 && lr_final_ratio <= 1)) fail(Errc::invalid_argument, "lr_final_ratio must be in [0, 1]");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1))
    fail(Errc::invalid_argument, "adam betas must be in [0, 1)");
  if (!(adam_eps > 0)) fail(Errc::invalid_argument, "adam eps must be > 0");
  if (cg_unroll < 1) fail(Errc::invalid_argument, "cg_unroll must be >= 1");
  if (!(constraint_margin >= 0 && constraint_margin < 1))
    fail(Errc::invalid_argument, "constraint margin must be in [0, 1)");
  if (!(auto_balance >= 0)) fail(Errc::invalid_argument, "auto_balance must be >= 0");
  if (val_every < 1) fail(Errc::invalid_argument, "val_every must be >= 1");
  if (!(divergence_factor > 1)) fail(Errc::invalid_argument, "divergence factor must be > 1");
  if (threads < 1) fail(Errc::invalid_argument, "threads must be >= 1");
}

Trajectory adam_step(const Trajectory& k, const RMatrix& grad, AdamState& state, double lr, const OptimConfig& cfg,
                     std::optional<double> k_max) {
  if (grad.rows() != k.size() || grad.cols() != 2) fail(Errc::shape_mismatch, "gradient must be m x 2");
  if (state.t == 0) {
    state.m = RMatrix::Zero(k.size(), 2);
    state.v = RMatrix::Zero(k.size(), 2);
  }
  RMatrix g = grad;
  if (cfg.pin_first) g.row(0).setZero();
  ++state.t;
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * g;
  state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, state.t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, state.t);
  Trajectory out = k;
  out.points -= (lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.adam_eps)).matrix();
  if (cfg.pin_first) out.points.row(0) = k.points.row(0);
  if (cfg.clamp_to_nyquist && k_max) out.points = out.points.cwiseMax(-*k_max).cwiseMin(*k_max);
  return out;
}

double learning_rate(const OptimConfig& cfg, int step, double base_lr) {
  const double r = cfg.lr_final_ratio;
  const double phase = static_cast<double>(step) / static_cast<double>(cfg.steps);
  return base_lr * (r + (1.0 - r) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase)));
}

Evaluation evaluate_trajectory(const std::vector<PhantomCase>& cases, const Trajectory& k,
                               const PipelineSettings& settings, int threads) {
  if (cases.empty()) fail(Errc::empty_input, "no cases to evaluate");
  Evaluation e;
  e.psnr.resize(cases.size());
  e.ssim.resize(cases.size());
  e.task.resize(cases.size());
  detail::parallel_for(cases.size(), threads, [&](std::size_t i) {
    const PhantomCase& c = cases[i];
    const KSpaceSamples y_b = simulate(c.image, c.csm, k, settings.scan, i);
    const Reconstruction r = reconstruct(y_b, c.csm, k, settings.recon, settings.scan);
    e.psnr[i] = psnr(r.final, c.image);
    e.ssim[i] = ssim(r.final, c.image);
    e.task[i] = task_loss(r.final, c.image);
  });
  e.mean_psnr = summarize(e.psnr).mean;
  e.mean_ssim = summarize(e.ssim).mean;
  e.mean_task = summarize(e.task).mean;
  e.constraint = constraint_loss(k, settings.limits, settings.loss);
  e.total = e.mean_task + settings.loss.beta * e.constraint;
  return e;
}

OptimReport optimize_trajectory(const std::vector<PhantomCase>& train, const std::vector<PhantomCase>& validation,
                                const Trajectory& k0, const PipelineSettings& settings, const OptimConfig& cfg,
                                const ProgressFn& progress) {
  cfg.check();
  settings.limits.check();
  settings.loss.check();
  validate(k0);
  if (train.empty()) fail(Errc::empty_input, "training set is empty");
  const double k_max = k_max_for(train.front().image, k0);
  const double base_lr = cfg.lr ? *cfg.lr : 1e-2 * k_max;

  // Task-only settings for the image term; the penalty is added here so that
  // auto-balance can set beta from the first evaluation.
  PipelineSettings task_settings = settings;
  task_settings.recon.cg_iters = cfg.cg_unroll;
  task_settings.loss.beta = 0.0;
  const PhysicsLimits train_limits = shrink(settings.limits, cfg.constraint_margin);
  PipelineSettings val_settings = settings;

  OptimReport report;
  report.initial = k0;
  report.beta = settings.loss.beta;
  Trajectory k = k0;
  AdamState adam;
  double initial_total = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  const auto n_train = static_cast<Index>(train.size());
  const Index batch = std::min<Index>(cfg.batch, n_train);

  auto validate_now = [&](const Trajectory& kk, int step) {
    val_settings.loss.beta = report.beta;
    Evaluation e = evaluate_trajectory(validation, kk, val_settings, cfg.threads);
    if (e.total < best_val) {
      best_val = e.total;
      report.best = kk;
      report.best_step = step;
      report.best_validation = e;
    }
    return e;
  };

  for (int step = 0; step < cfg.steps; ++step) {
    // Minibatch: a seeded partial shuffle, accumulated in ascending index order.
    std::mt19937_64 rng(detail::derive_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    std::vector<Index> perm(static_cast<std::size_t>(n_train));
    for (Index i = 0; i < n_train; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < batch; ++i) {
      const Index j = i + static_cast<Index>(detail::unit_uniform(rng) * static_cast<double>(n_train - i));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(std::min(j, n_train - 1))]);
    }
    perm.resize(static_cast<std::size_t>(batch));
    std::sort(perm.begin(), perm.end());
    std::vector<const PhantomCase*> members;
    std::vector<std::uint64_t> ids;
    for (Index i : perm) {
      members.push_back(&train[static_cast<std::size_t>(i)]);
      ids.push_back(static_cast<std::uint64_t>(i));
    }

    LossGradient lg = loss_gradient(members, ids, k, task_settings, cfg.threads);
    const double constraint = constraint_loss(k, train_limits, settings.loss);
    if (step == 0 && cfg.auto_balance > 0 && constraint > 0) report.beta = cfg.auto_balance * lg.task / constraint;

    StepRecord rec;
    rec.step = step;
    rec.task = lg.task;
    rec.constraint = constraint;
    rec.total = lg.task + report.beta * constraint;
    const ConstraintStats stats = constraint_stats(k, settings.limits, settings.loss.per_axis);
    rec.max_v_violation = stats.max_v_violation;
    rec.max_a_violation = stats.max_a_violation;
    rec.v_violations = stats.v_violations;
    rec.a_violations = stats.a_violations;
    if (step == 0) initial_total = rec.total;
    if (!std::isfinite(rec.total) || rec.total > cfg.divergence_factor * initial_total) {
      std::ostringstream os;
      os << "diverged at step " << step << ": total loss " << rec.total << " exceeds " << cfg.divergence_factor
         << " x initial " << initial_total;
      fail(Errc::divergence, os.str());
    }
    if (!validation.empty() && step % cfg.val_every == 0) {
      rec.validation = validate_now(k, step);
      if (step == 0) report.initial_validation = *rec.validation;
    }

    RMatrix grad = std::move(lg.grad);
    if (report.beta > 0) grad += report.beta * constraint_gradient(k, train_limits, settings.loss);
    rec.lr = learning_rate(cfg, step, base_lr);
    k = adam_step(k, grad, adam, rec.lr, cfg, cfg.clamp_to_nyquist ? std::optional<double>(k_max) : std::nullopt);
    if (progress) progress(rec);
    report.records.push_back(std::move(rec));
  }
  report.last = k;
  if (validation.empty()) {
    report.best = k;
    report.best_step = cfg.steps;
  } else {
    validate_now(k, cfg.steps);
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

struct Probe {
  double loss = 0;
  std::vector<signed char> signature;  // hinge activity and L1 sign pattern
};

Probe probe_loss(const PhantomCase& c, const Trajectory& k, const PipelineSettings& s, const FrozenRecon& frozen) {
  const PipelineResult r = pipeline_forward(c.image, c.csm, k, s.scan, s.recon, 0, &frozen, false);
  Probe p;
  p.loss = task_loss(r.xhat, c.image) + s.loss.beta * constraint_loss(k, s.limits, s.loss);
  const RMatrix diff = r.xhat.pixels.cwiseAbs() - c.image.pixels.cwiseAbs();
  for (Index i = 0; i < diff.size(); ++i) p.signature.push_back(static_cast<signed char>((diff.data()[i] > 0) - (diff.data()[i] < 0)));
  if (s.loss.beta > 0) {
    const Kinematics kin = kinematics(k);
    auto active = [&](const RMatrix& d, double limit) {
      for (Index i = 0; i < d.rows(); ++i) {
        if (s.loss.per_axis) {
          p.signature.push_back(std::abs(d(i, 0)) > limit);
          p.signature.push_back(std::abs(d(i, 1)) > limit);
        } else {
          p.signature.push_back(std::hypot(d(i, 0), d(i, 1)) > limit);
        }
      }
    };
    active(kin.velocity, s.limits.v_max());
    active(kin.acceleration, s.limits.a_max());
  }
  return p;
}

}  // namespace

GradCheckReport grad_check(const PhantomCase& instance, const Trajectory& k, const PipelineSettings& settings,
                           double eps, int n_probe, std::uint64_t seed) {
  if (!(eps > 0)) fail(Errc::invalid_argument, "finite-difference step must be > 0");
  if (n_probe < 1) fail(Errc::invalid_argument, "need at least one probe");
  const PipelineResult base = pipeline_forward(instance.image, instance.csm, k, settings.scan, settings.recon);
  const FrozenRecon frozen{base.dcf.w, base.tape.lambda};
  const LossGradient analytic = loss_gradient({&instance}, {0}, k, settings, 1, &frozen);
  const double floor = 1e-4 * analytic.grad.cwiseAbs().maxCoeff();
  const double h = eps * k_max_for(instance.image, k);

  // Distinct coordinates, seeded partial shuffle.
  const Index coords = 2 * k.size();
  std::vector<Index> order(static_cast<std::size_t>(coords));
  for (Index i = 0; i < coords; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  const Index n = std::min<Index>(n_probe, coords);
  for (Index i = 0; i < n; ++i) {
    const Index j = i + static_cast<Index>(detail::unit_uniform(rng) * static_cast<double>(coords - i));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(std::min(j, coords - 1))]);
  }

  GradCheckReport report;
  for (Index i = 0; i < n; ++i) {
    GradProbe gp;
    gp.row = order[static_cast<std::size_t>(i)] / 2;
    gp.col = static_cast<int>(order[static_cast<std::size_t>(i)] % 2);
    Trajectory kp = k, km = k;
    kp.points(gp.row, gp.col) += h;
    km.points(gp.row, gp.col) -= h;
    const Probe lp = probe_loss(instance, kp, settings, frozen);
    const Probe lm = probe_loss(instance, km, settings, frozen);
    gp.analytic = analytic.grad(gp.row, gp.col);
    gp.numeric = (lp.loss - lm.loss) / (2.0 * h);
    gp.kink = lp.signature != lm.signature;
    const double scale = std::max({std::abs(gp.analytic), std::abs(gp.numeric), floor});
    gp.rel_error = scale > 0 ? std::abs(gp.analytic - gp.numeric) / scale : 0.0;
    if (gp.kink)
      ++report.kinks;
    else
      report.max_rel_error = std::max(report.max_rel_error, gp.rel_error);
    report.probes.push_back(gp);
  }
  return report;
}

}  // namespace sstraj
