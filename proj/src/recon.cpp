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

#include "sstraj/recon.hpp"

#include "sstraj/array_io.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>

#include <unistd.h>

namespace sstraj {

void ReconConfig::check() const {
  if (dcf_iters < 1) fail(Errc::invalid_argument, "dcf iterations must be >= 1");
  if (!(dcf_sigma > 0)) fail(Errc::invalid_argument, "dcf kernel sigma must be > 0");
  if (lambda && !(*lambda >= 0)) fail(Errc::invalid_argument, "lambda must be >= 0");
  if (!(lambda_rel >= 0)) fail(Errc::invalid_argument, "lambda_rel must be >= 0");
  if (cg_iters < 1) fail(Errc::invalid_argument, "cg iterations must be >= 1");
  if (!(sharpen_alpha > 0)) fail(Errc::invalid_argument, "sharpen alpha must be > 0");
}

ComplexImage regrid(const KSpaceSamples& y_b, const CoilMaps& csm, const Trajectory& k, const DcfWeights& w) {
  return adjoint(y_b, csm, k, w.w);
}

ComplexImage normal_apply(const ComplexImage& x, const CoilMaps& csm, const Trajectory& k, double lambda,
                          const std::optional<RVector>& weights) {
  if (!(lambda >= 0)) fail(Errc::invalid_argument, "lambda must be >= 0");
  const Nudft op(k, x.ny(), x.nx());
  CMatrix y = op.forward(coil_images(x, csm));
  if (weights) y = y * weights->asDiagonal();
  return ComplexImage(coil_combine(op.adjoint(y), csm) + lambda * x.pixels);
}

double mean_normal_diagonal(const CoilMaps& csm, const std::optional<RVector>& weights, Index samples) {
  const double coil_energy = sum_of_squares(csm).mean();
  const double total_weight = weights ? weights->sum() : static_cast<double>(samples);
  return coil_energy * total_weight;
}

double resolve_lambda(const ReconConfig& cfg, const CoilMaps& csm, const std::optional<RVector>& weights,
                      Index samples) {
  if (cfg.lambda) return *cfg.lambda;
  return cfg.lambda_rel * mean_normal_diagonal(csm, weights, samples);
}

CgResult conjugate_gradient(const LinearOp& op, const CMatrix& rhs, const CMatrix& init, int n_iter,
                            CgTrace* trace) {
  if (n_iter < 1) fail(Errc::invalid_argument, "cg needs at least one iteration");
  CgResult out;
  out.x = init;
  const bool zero_init = init.cwiseAbs2().sum() == 0.0;
  CMatrix r = zero_init ? rhs : CMatrix(rhs - op(init));
  CMatrix p = r;
  double rho = r.squaredNorm();
  const double floor = 1e-30 * rhs.squaredNorm();
  out.residual_norms.push_back(std::sqrt(rho));
  if (trace) {
    *trace = CgTrace{};
    trace->r0 = r;
    trace->rho.push_back(rho);
  }
  for (int i = 0; i < n_iter; ++i) {
    if (rho == 0.0 || rho <= floor) break;
    CMatrix q = op(p);
    const double sigma = real_inner(p, q);
    if (!(sigma > 0)) {
      std::ostringstream os;
      os << "conjugate gradient breakdown at iteration " << i << " (curvature " << sigma << ")";
      fail(Errc::cg_breakdown, os.str());
    }
    const double alpha = rho / sigma;
    out.x += alpha * p;
    r -= alpha * q;
    const double rho_next = r.squaredNorm();
    const double beta = rho_next / rho;
    if (trace) {
      trace->p.push_back(p);
      trace->q.push_back(std::move(q));
      trace->r.push_back(r);
      trace->rho.push_back(rho_next);
      trace->sigma.push_back(sigma);
      trace->alpha.push_back(alpha);
      trace->beta.push_back(beta);
    }
    p = r + beta * p;
    rho = rho_next;
    out.residual_norms.push_back(std::sqrt(rho));
    ++out.iterations;
  }
  return out;
}

CMatrix cg_backward(const CgTrace& trace, const CMatrix& x_bar,
                    const std::function<CMatrix(int, const CMatrix&)>& apply_adjoint) {
  const int n = trace.iterations();
  CMatrix r_bar = CMatrix::Zero(x_bar.rows(), x_bar.cols());
  CMatrix p_bar = r_bar;
  double rho_bar = 0.0;  // cotangent of rho_{i+1} carried from iteration i+1
  for (int i = n - 1; i >= 0; --i) {
    const auto s = static_cast<std::size_t>(i);
    const CMatrix& p = trace.p[s];
    const CMatrix& q = trace.q[s];
    const double rho_i = trace.rho[s], rho_next = trace.rho[s + 1];
    const double sigma = trace.sigma[s], alpha = trace.alpha[s], beta = trace.beta[s];

    // p_{i+1} = r_{i+1} + beta p_i
    r_bar += p_bar;
    const double beta_bar = real_inner(p_bar, p);
    p_bar *= beta;
    // beta = rho_{i+1} / rho_i
    const double rho_next_bar = rho_bar + beta_bar / rho_i;
    double rho_i_bar = -beta_bar * rho_next / (rho_i * rho_i);
    // rho_{i+1} = |r_{i+1}|^2
    r_bar += 2.0 * rho_next_bar * trace.r[s];
    // r_{i+1} = r_i - alpha q_i ; x_{i+1} = x_i + alpha p_i
    double alpha_bar = -real_inner(r_bar, q) + real_inner(x_bar, p);
    CMatrix q_bar = -alpha * r_bar;
    p_bar += alpha * x_bar;
    // alpha = rho_i / sigma
    rho_i_bar += alpha_bar / sigma;
    const double sigma_bar = -alpha_bar * rho_i / (sigma * sigma);
    // sigma = Re<p_i, q_i>
    p_bar += sigma_bar * q;
    q_bar += sigma_bar * p;
    // q_i = M p_i
    p_bar += apply_adjoint(i, q_bar);
    rho_bar = rho_i_bar;
  }
  // p_0 = r_0, rho_0 = |r_0|^2, r_0 = rhs
  r_bar += p_bar + 2.0 * rho_bar * trace.r0;
  return r_bar;
}

SenseResult cg_sense(const KSpaceSamples& y_b, const CoilMaps& csm, const Trajectory& k, double lambda, int n_iter,
                     const ComplexImage& init, RhsMode rhs, const DcfWeights* dcf) {
  if (!(lambda >= 0)) fail(Errc::invalid_argument, "lambda must be >= 0");
  if (y_b.coils() != csm.coils || y_b.samples() != k.size())
    fail(Errc::shape_mismatch, "k-space shape does not match coils x trajectory length");
  if (init.ny() != csm.ny() || init.nx() != csm.nx()) fail(Errc::shape_mismatch, "init image shape mismatch");
  std::optional<RVector> w;
  if (rhs == RhsMode::dcf_adjoint) {
    if (!dcf) fail(Errc::invalid_argument, "dcf_adjoint right-hand side needs DCF weights");
    if (dcf->w.size() != k.size()) fail(Errc::shape_mismatch, "DCF weights length does not match trajectory");
    w = dcf->w;
  }
  const Nudft op(k, csm.ny(), csm.nx());
  auto weigh = [&](CMatrix y) -> CMatrix { return w ? CMatrix(y * w->asDiagonal()) : y; };
  const CMatrix b = coil_combine(op.adjoint(weigh(y_b.data)), csm);
  const LinearOp normal = [&](const CMatrix& v) -> CMatrix {
    ComplexImage img(v);
    return coil_combine(op.adjoint(weigh(op.forward(coil_images(img, csm)))), csm) + lambda * v;
  };
  auto result = conjugate_gradient(normal, b, init.pixels, n_iter);
  return SenseResult{ComplexImage(std::move(result.x)), std::move(result.residual_norms), result.iterations};
}

// ---------------------------------------------------------------------------

CMatrix PostReconstructor::vjp(const ComplexImage&, const CMatrix&) const {
  fail(Errc::invalid_argument, "post-reconstructor '" + name() + "' is not differentiable");
}

namespace {

class IdentityPost final : public PostReconstructor {
 public:
  std::string name() const override { return "identity"; }
  ComplexImage apply(const ComplexImage& x0) const override { return x0; }
  bool differentiable() const override { return true; }
  CMatrix vjp(const ComplexImage&, const CMatrix& cot) const override { return cot; }
};

// Centered DFT matrix F(u, x) = exp(-i 2pi u x / n), u and x in [-n/2, n/2).
CMatrix centered_dft(Index n) {
  CMatrix f(n, n);
  for (Index u = 0; u < n; ++u)
    for (Index x = 0; x < n; ++x)
      f(u, x) = std::polar(1.0, -kTwoPi * static_cast<double>((u - n / 2) * (x - n / 2)) / static_cast<double>(n));
  return f;
}

// Deconvolves the known readout decay with a Tikhonov pull toward the input:
// argmin_z |M z - X|^2 + alpha |z - X|^2 per Cartesian frequency, i.e.
// z = X (M + alpha) / (M^2 + alpha). The filter is exactly 1 where M = 1.
class TikhonovSharpen final : public PostReconstructor {
 public:
  explicit TikhonovSharpen(const PostContext& ctx) : alpha_(ctx.sharpen_alpha) {
    if (!ctx.trajectory) fail(Errc::invalid_argument, "tikhonov_sharpen needs the acquisition trajectory");
    if (!(alpha_ > 0)) fail(Errc::invalid_argument, "sharpen alpha must be > 0");
    k_ = *ctx.trajectory;
    b_ = blur_vector(k_, ctx.scan).b;
  }
  std::string name() const override { return "tikhonov_sharpen"; }
  bool differentiable() const override { return true; }

  ComplexImage apply(const ComplexImage& x0) const override { return ComplexImage(filter(x0.pixels)); }
  // Real filter under a unitary transform: self-adjoint.
  CMatrix vjp(const ComplexImage&, const CMatrix& cot) const override { return filter(cot); }

 private:
  CMatrix filter(const CMatrix& x) const {
    const Index ny = x.rows(), nx = x.cols();
    const CMatrix fy = centered_dft(ny), fx = centered_dft(nx);
    const RMatrix m = cartesian_modulation(k_, b_, ny, nx);
    const double a = alpha_;
    const RMatrix h = ((m.array() + a) / (m.array().square() + a)).matrix();
    const CMatrix spectrum = (fy * x * fx.transpose()).cwiseProduct(h.cast<Complex>());
    return fy.adjoint() * spectrum * fx.conjugate() / static_cast<double>(ny * nx);
  }

  double alpha_;
  Trajectory k_;
  RVector b_;
};

class ExecPost final : public PostReconstructor {
 public:
  explicit ExecPost(std::string program) : program_(std::move(program)) {
    if (program_.empty()) fail(Errc::unknown_plugin, "exec plugin needs a program path");
  }
  std::string name() const override { return "exec:" + program_; }
  ComplexImage apply(const ComplexImage& x0) const override {
    static std::atomic<unsigned> counter{0};
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("sstraj-plugin-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir);
    const fs::path in = dir / "input.lsst", out = dir / "output.lsst";
    write_array(in, to_array(x0));
    const std::string cmd = "'" + program_ + "' '" + in.string() + "' '" + out.string() + "'";
    const int status = std::system(cmd.c_str());
    ComplexImage result;
    try {
      if (status != 0) fail(Errc::plugin_failed, "plugin '" + program_ + "' exited with status " + std::to_string(status));
      result = image_from_array(read_array(out));
    } catch (...) {
      fs::remove_all(dir);
      throw;
    }
    fs::remove_all(dir);
    if (result.ny() != x0.ny() || result.nx() != x0.nx())
      fail(Errc::plugin_failed, "plugin '" + program_ + "' changed the image shape");
    return result;
  }

 private:
  std::string program_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, PostFactory> factories;
};

Registry& registry() {
  static Registry r;
  static std::once_flag once;
  std::call_once(once, [] {
    r.factories["identity"] = [](const PostContext&) { return std::make_unique<IdentityPost>(); };
    r.factories["tikhonov_sharpen"] = [](const PostContext& ctx) { return std::make_unique<TikhonovSharpen>(ctx); };
  });
  return r;
}

}  // namespace

void register_post_reconstructor(const std::string& name, PostFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

std::vector<std::string> registered_post_reconstructors() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.factories) names.push_back(name);
  return names;
}

std::unique_ptr<PostReconstructor> make_post_reconstructor(const std::string& name, const PostContext& ctx) {
  if (name.rfind("exec:", 0) == 0) return std::make_unique<ExecPost>(name.substr(5));
  PostFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    const auto it = r.factories.find(name);
    if (it == r.factories.end()) fail(Errc::unknown_plugin, "unknown post-reconstructor '" + name + "'");
    factory = it->second;
  }
  return factory(ctx);
}

ComplexImage post_reconstruct(const ComplexImage& x0, const PostReconstructor& plugin) { return plugin.apply(x0); }

RMatrix cartesian_modulation(const Trajectory& k, const RVector& b, Index ny, Index nx) {
  RMatrix m(ny, nx);
  for (Index v = 0; v < ny; ++v)
    for (Index u = 0; u < nx; ++u) {
      const double kx = static_cast<double>(u - nx / 2) / k.fov;
      const double ky = static_cast<double>(v - ny / 2) / k.fov;
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < k.size(); ++j) {
        const double dx = k.points(j, 0) - kx, dy = k.points(j, 1) - ky;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      m(v, u) = b(best);
    }
  return m;
}

Reconstruction reconstruct(const KSpaceSamples& y_b, const CoilMaps& csm, const Trajectory& k,
                           const ReconConfig& cfg, const ScanConfig& scan) {
  cfg.check();
  Reconstruction out;
  out.dcf = pipe_menon(k, csm.nx(), cfg.dcf_sigma, cfg.dcf_iters);
  out.regridded = regrid(y_b, csm, k, out.dcf);
  const std::optional<RVector> w =
      cfg.rhs == RhsMode::dcf_adjoint ? std::optional<RVector>(out.dcf.w) : std::nullopt;
  out.lambda = resolve_lambda(cfg, csm, w, k.size());
  auto sense = cg_sense(y_b, csm, k, out.lambda, cfg.cg_iters, ComplexImage::zeros(csm.ny(), csm.nx()), cfg.rhs,
                        &out.dcf);
  out.sense = std::move(sense.image);
  out.residual_norms = std::move(sense.residual_norms);
  PostContext ctx{&k, scan, cfg.sharpen_alpha};
  out.final = post_reconstruct(out.sense, *make_post_reconstructor(cfg.plugin, ctx));
  return out;
}

}  // namespace sstraj
