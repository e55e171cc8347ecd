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

#include "helpers.hpp"
#include "sstraj/optim.hpp"
#include "sstraj/sampling.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace sstraj;
using Catch::Approx;

namespace {

// Small off-grid instance: TSP order over a variable-density draw, jittered so
// no sample sits on a Cartesian frequency.
Trajectory jittered_trajectory(Index n, double accel, std::uint64_t seed, double dwell = 1e-6) {
  Trajectory k = build_initial_trajectory(generate_vd_points(n, 0.2, accel, 1.0, seed), dwell, 0.2);
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> jitter(0.0, 0.3 / 0.2);
  for (Index i = 1; i < k.size(); ++i)
    for (int d = 0; d < 2; ++d) k.points(i, d) += jitter(rng);
  const double k_max = k.nyquist(n);
  k.points = k.points.cwiseMax(-k_max).cwiseMin(k_max);
  return k;
}

PhantomCase phase_case(Index n, Index nc, std::uint64_t seed) {
  DatasetOptions o;
  o.smooth_phase = true;
  return make_phantom_case(n, nc, seed, 0, o);
}

}  // namespace

TEST_CASE("Pipeline forward", "[optim]")
{
  SECTION("Degenerate pipeline inverts")
  {
    const Index n = 16;
    const PhantomCase c = phase_case(n, 1, 1);
    ScanConfig scan;
    scan.blur_scale = 0.0;
    ReconConfig recon;
    recon.cg_iters = 30;
    recon.lambda = 0.0;
    const Trajectory k = test::cartesian(n);
    const PipelineResult r = pipeline_forward(c.image, CoilMaps::uniform(n, n), k, scan, recon);
    CHECK(test::nrmse(r.xhat.pixels, c.image.pixels) <= 1e-6);
  }

  SECTION("Bitwise deterministic")
  {
    const PhantomCase c = make_phantom_case(16, 2, 2, 0);
    const Trajectory k = jittered_trajectory(16, 4, 3);
    ScanConfig scan;
    scan.noise_sigma = 0.01;
    ReconConfig recon;
    recon.cg_iters = 5;
    const PipelineResult a = pipeline_forward(c.image, c.csm, k, scan, recon, 3);
    const PipelineResult b = pipeline_forward(c.image, c.csm, k, scan, recon, 3);
    CHECK(a.xhat.pixels == b.xhat.pixels);
    const PipelineResult other = pipeline_forward(c.image, c.csm, k, scan, recon, 4);
    CHECK(other.xhat.pixels != a.xhat.pixels);
  }

  SECTION("Blur costs image quality at R=8")
  {
    const Index n = 32;
    const PhantomCase c = make_phantom_case(n, 4, 4, 0);
    const Trajectory k = build_initial_trajectory(generate_vd_points(n, 0.2, 8, 3.0, 5), 1e-6, 0.2);
    ReconConfig recon;
    recon.cg_iters = 10;
    ScanConfig sharp, blurred;
    sharp.blur_scale = 0.0;
    blurred.apply_te_scale = true;
    const double loss_sharp = task_loss(pipeline_forward(c.image, c.csm, k, sharp, recon).xhat, c.image);
    const double loss_blurred = task_loss(pipeline_forward(c.image, c.csm, k, blurred, recon).xhat, c.image);
    CHECK(loss_blurred > loss_sharp);
  }

  SECTION("Non-differentiable plugins cannot be trained through")
  {
    const PhantomCase c = make_phantom_case(16, 1, 6, 0);
    ReconConfig recon;
    recon.plugin = "exec:/bin/true";
    CHECK_THROWS_AS(pipeline_forward(c.image, c.csm, jittered_trajectory(16, 4, 6), ScanConfig{}, recon), Error);
  }
}

TEST_CASE("Gradient of the unrolled pipeline", "[optim]")
{
  const Index n = 16;
  PipelineSettings s;
  s.scan.blur_scale = 0.5e6;  // noticeable decay over the short readout

  SECTION("Single coil, m = 24, three unrolled iterations")
  {
    const PhantomCase c = phase_case(n, 1, 7);
    Trajectory k = jittered_trajectory(n, 256.0 / 24.0, 8);
    REQUIRE(k.size() == 24);
    s.recon.cg_iters = 3;
    s.loss.beta = 0;
    const GradCheckReport r = grad_check(c, k, s, 1e-4, 20, 9);
    CHECK(r.probes.size() == 20);
    CHECK(r.kinks == 0);
    CHECK(r.max_rel_error <= 1e-4);
    WARN("max rel " << r.max_rel_error << " kinks " << r.kinks << " first " << r.probes[0].analytic);
  }

  for (int unroll : {1, 2, 3}) {
    DYNAMIC_SECTION("Two coils, unroll " << unroll)
    {
      const PhantomCase c = phase_case(n, 2, 10 + unroll);
      const Trajectory k = jittered_trajectory(n, 5, 20 + unroll);
      s.recon.cg_iters = unroll;
      s.loss.beta = 0;
      CHECK(grad_check(c, k, s, 1e-5, 20, 30 + unroll).max_rel_error <= 1e-4);
    }
  }

  SECTION("Constraint term active")
  {
    const PhantomCase c = phase_case(n, 2, 40);
    Trajectory k = jittered_trajectory(n, 5, 41, 2e-6);
    REQUIRE(constraint_stats(k, s.limits).v_violations > 0);
    s.recon.cg_iters = 2;
    s.loss.beta = 0.5;
    s.loss.lambda_v = 1.0 / s.limits.v_max();
    s.loss.lambda_a = 1.0 / s.limits.a_max();
    const GradCheckReport r = grad_check(c, k, s, 1e-5, 20, 42);
    CHECK(r.kinks < 20);
    CHECK(r.max_rel_error <= 1e-4);
    WARN("max rel " << r.max_rel_error << " kinks " << r.kinks << " first " << r.probes[0].analytic);
  }

  SECTION("Exact kinks are flagged")
  {
    const PhantomCase c = make_phantom_case(n, 1, 43, 0);
    Trajectory k;
    k.dwell = 1e-6;
    k.fov = 0.2;
    k.points = RMatrix::Zero(3, 2);
    // Segment 0 -> 1 sits exactly on the speed limit.
    k.points(1, 0) = s.limits.v_max() * k.dwell;
    k.points(2, 0) = k.points(1, 0);
    s.loss.beta = 1;
    s.loss.lambda_a = 0;
    s.recon.cg_iters = 1;
    const GradCheckReport r = grad_check(c, k, s, 1e-4, 6, 44);
    CHECK(r.kinks >= 1);
  }
}

TEST_CASE("Loss gradient", "[optim]")
{
  const Index n = 16;
  PipelineSettings s;
  s.recon.cg_iters = 2;

  SECTION("Flat at a perfect, feasible reconstruction")
  {
    // Fully sampled Cartesian, one coil, no blur: with a converged solve the
    // task loss vanishes; the path is slow enough to be feasible.
    const PhantomCase c = make_phantom_case(n, 1, 50, 0);
    PhantomCase flat{c.image, CoilMaps::uniform(n, n), 0};
    Trajectory k = test::cartesian(n);
    k.dwell = 1.0;  // glacially slow readout: nothing violates
    s.scan.blur_scale = 0.0;
    s.recon.cg_iters = 40;
    s.recon.lambda = 0.0;
    s.recon.rhs = RhsMode::plain_adjoint;
    const LossGradient g = loss_gradient({&flat}, {0}, k, s);
    CHECK(g.task < 1e-6);
    CHECK(g.constraint == 0.0);
    CHECK(g.grad.cwiseAbs().maxCoeff() < 1e-3 * k.nyquist(n));
  }

  SECTION("Batch gradient is the mean of member gradients")
  {
    const PhantomCase a = make_phantom_case(n, 2, 51, 0), b = make_phantom_case(n, 2, 51, 1);
    const Trajectory k = jittered_trajectory(n, 5, 52);
    s.loss.beta = 0;
    const LossGradient ga = loss_gradient({&a}, {0}, k, s), gb = loss_gradient({&b}, {1}, k, s);
    const LossGradient gab = loss_gradient({&a, &b}, {0, 1}, k, s);
    CHECK(test::nrmse(gab.grad.cast<Complex>(), (0.5 * (ga.grad + gb.grad)).cast<Complex>()) < 1e-12);
    CHECK(gab.task == Approx(0.5 * (ga.task + gb.task)));

    const LossGradient threaded = loss_gradient({&a, &b}, {0, 1}, k, s, 2);
    CHECK(threaded.grad == gab.grad);
    const LossGradient swapped = loss_gradient({&b, &a}, {1, 0}, k, s);
    CHECK(test::nrmse(swapped.grad.cast<Complex>(), gab.grad.cast<Complex>()) < 1e-12);
  }

  SECTION("Constraint part opposes the excess on a straight line")
  {
    const PhantomCase c = make_phantom_case(n, 1, 53, 0);
    Trajectory k;
    k.dwell = 1e-6;
    k.points = RMatrix::Zero(20, 2);
    const double step = 1.5 * s.limits.v_max() * k.dwell;
    for (Index i = 0; i < 20; ++i) k.points.row(i) << 0.6 * step * i, 0.8 * step * i;
    s.loss.beta = 1;
    s.loss.lambda_a = 0;
    const LossGradient with = loss_gradient({&c}, {0}, k, s);
    PipelineSettings task_only = s;
    task_only.loss.beta = 0;
    const RMatrix constraint_part = with.grad - loss_gradient({&c}, {0}, k, task_only).grad;
    RMatrix hinge = RMatrix::Zero(20, 2);
    hinge.row(0) << -0.6 / k.dwell, -0.8 / k.dwell;
    hinge.row(19) << 0.6 / k.dwell, 0.8 / k.dwell;
    CHECK(constraint_part.cwiseProduct(hinge).sum() / (constraint_part.norm() * hinge.norm()) > 0.99);
  }
}

TEST_CASE("Adam", "[optim]")
{
  std::mt19937_64 rng(60);
  const Trajectory k = test::random_trajectory(10, 16, rng);
  OptimConfig cfg;
  cfg.pin_first = false;
  const RMatrix grad = RMatrix::Random(10, 2) * 50.0;

  SECTION("Zero gradient leaves k alone")
  {
    AdamState st;
    CHECK(adam_step(k, RMatrix::Zero(10, 2), st, 1.0, cfg).points == k.points);
  }

  SECTION("Deterministic")
  {
    AdamState a, b;
    CHECK(adam_step(k, grad, a, 0.3, cfg).points == adam_step(k, grad, b, 0.3, cfg).points);
    CHECK(a.m == b.m);
    CHECK(a.v == b.v);
  }

  SECTION("First step is bounded by the learning rate")
  {
    AdamState st;
    const double lr = 0.3;
    const RMatrix d = adam_step(k, grad, st, lr, cfg).points - k.points;
    CHECK(d.cwiseAbs().maxCoeff() <= lr * (1 + 1e-12));
    // Away from tiny gradients the first step is -lr * sign(g).
    for (Index i = 0; i < d.size(); ++i)
      if (std::abs(grad(i)) > 1e-3) CHECK(d(i) == Approx(-lr * (grad(i) > 0 ? 1 : -1)).epsilon(1e-6));
  }

  SECTION("Hand-computed second step")
  {
    AdamState st;
    RMatrix g1 = RMatrix::Zero(10, 2), g2 = RMatrix::Zero(10, 2);
    g1(3, 0) = 2.0;
    g2(3, 0) = -1.0;
    const Trajectory k1 = adam_step(k, g1, st, 0.1, cfg);
    const Trajectory k2 = adam_step(k1, g2, st, 0.1, cfg);
    const double m = 0.9 * 0.1 * 2.0 + 0.1 * -1.0, v = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
    const double expected = -0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    CHECK(k2.points(3, 0) - k1.points(3, 0) == Approx(expected).epsilon(1e-10));
  }

  SECTION("Pinned first row and Nyquist clamp")
  {
    OptimConfig pinned;
    AdamState st;
    const double k_max = k.nyquist(16);
    const Trajectory out = adam_step(k, grad, st, 10 * k_max, pinned, k_max);
    CHECK(out.points.row(0) == k.points.row(0));
    CHECK(out.points.cwiseAbs().maxCoeff() <= k_max);
  }

  CHECK_THROWS_AS([&] {
    AdamState st;
    adam_step(k, RMatrix::Zero(9, 2), st, 1.0, cfg);
  }(), Error);
}

TEST_CASE("Learning-rate schedule", "[optim]")
{
  OptimConfig cfg;
  cfg.steps = 100;
  CHECK(learning_rate(cfg, 0, 2.0) == 2.0);
  CHECK(learning_rate(cfg, 77, 2.0) == 2.0);
  cfg.lr_final_ratio = 0.1;
  CHECK(learning_rate(cfg, 0, 2.0) == Approx(2.0));
  CHECK(learning_rate(cfg, 50, 2.0) == Approx(1.1));
  CHECK(learning_rate(cfg, 100, 2.0) == Approx(0.2));
}

TEST_CASE("Trajectory optimization", "[optim]")
{
  const Index n = 16;
  const std::vector<PhantomCase> train = make_dataset(3, n, 2, 70), val = make_dataset(2, n, 2, 71);
  const Trajectory k0 = jittered_trajectory(n, 5, 72);
  PipelineSettings s;
  s.recon.cg_iters = 4;
  OptimConfig cfg;
  cfg.batch = 2;
  cfg.cg_unroll = 2;
  cfg.val_every = 2;

  SECTION("Zero learning rate is a no-op")
  {
    cfg.steps = 1;
    cfg.lr = 0.0;
    const OptimReport r = optimize_trajectory(train, val, k0, s, cfg);
    CHECK(r.records.size() == 1);
    CHECK(r.last.points == k0.points);
    CHECK(r.best.points == k0.points);
  }

  SECTION("Small steps descend")
  {
    // Plain gradient step of size lr against the gradient: first-order decrease.
    s.loss.beta = 0;
    PipelineSettings train_settings = s;
    train_settings.recon.cg_iters = cfg.cg_unroll;
    const std::vector<const PhantomCase*> batch{&train[0], &train[1]};
    const LossGradient g = loss_gradient(batch, {0, 1}, k0, train_settings);
    cfg.pin_first = false;
    cfg.clamp_to_nyquist = false;
    AdamState st;
    const Trajectory k1 = adam_step(k0, g.grad, st, 1e-3, cfg);
    CHECK(g.grad.cwiseProduct(k1.points - k0.points).sum() < 0.0);
    CHECK(loss_gradient(batch, {0, 1}, k1, train_settings, 1, nullptr, false).total < g.total);
  }

  SECTION("Runs are reproducible and thread-count independent")
  {
    cfg.steps = 4;
    const OptimReport a = optimize_trajectory(train, val, k0, s, cfg);
    const OptimReport b = optimize_trajectory(train, val, k0, s, cfg);
    cfg.threads = 2;
    const OptimReport c = optimize_trajectory(train, val, k0, s, cfg);
    CHECK(a.last.points == b.last.points);
    CHECK(a.last.points == c.last.points);
    REQUIRE(a.records.size() == 4);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].total == c.records[i].total);
      CHECK(a.records[i].max_v_violation >= 0.0);
      CHECK(a.records[i].max_a_violation >= 0.0);
    }
    CHECK(a.last.points != k0.points);
    CHECK(a.records[0].validation.has_value());
    CHECK(!a.records[1].validation.has_value());
    CHECK(a.records[2].validation.has_value());
  }

  SECTION("Divergence is detected")
  {
    cfg.steps = 6;
    cfg.lr = 1e4 * k0.nyquist(n);
    cfg.clamp_to_nyquist = false;
    cfg.divergence_factor = 1.01;
    s.loss.beta = 1;
    try {
      optimize_trajectory(train, val, k0, s, cfg);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::divergence);
    }
  }

  SECTION("Bad configuration")
  {
    cfg.batch = 0;
    CHECK_THROWS_AS(optimize_trajectory(train, val, k0, s, cfg), Error);
    cfg.batch = 2;
    CHECK_THROWS_AS(optimize_trajectory({}, val, k0, s, cfg), Error);
  }
}
