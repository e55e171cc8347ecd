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

#include "config.hpp"

#include <set>

namespace sstraj::capi {

using nlohmann::json;

namespace {

// Reads one object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& parent, const std::string& key, const std::string& path) : path_(path) {
    if (!parent.contains(key)) return;
    obj_ = &parent.at(key);
    if (!obj_->is_object()) fail(Errc::invalid_argument, "config: '" + path_ + "' must be an object");
  }
  explicit Section(const json& root) : obj_(&root), path_("") {
    if (!root.is_object()) fail(Errc::invalid_argument, "config: top level must be an object");
  }
  // Rejects keys nobody asked for.
  void done() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items())
      if (!seen_.count(key)) fail(Errc::invalid_argument, "config: unknown key '" + full(key) + "'");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
        out = v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
          throw std::invalid_argument("expected a non-negative integer");
        out = v.get<T>();
      } else {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        out = v.get<T>();
      }
    } catch (const std::invalid_argument& e) {
      fail(Errc::invalid_argument, "config: '" + full(key) + "': " + e.what());
    }
  }

  // null selects the derived default.
  void get(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    if (!v.is_number()) fail(Errc::invalid_argument, "config: '" + full(key) + "': expected a number or null");
    out = v.get<double>();
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return obj_ ? Section(*obj_, key, full(key)) : Section(empty, key, full(key));
  }

 private:
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* obj_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

const char* rhs_name(RhsMode m) { return m == RhsMode::dcf_adjoint ? "dcf_adjoint" : "plain_adjoint"; }

void read_split(Section s, SplitConfig& split) {
  s.get("count", split.count);
  s.get("seed", split.seed);
  s.done();
}

}  // namespace

PipelineSettings Config::pipeline() const {
  PipelineSettings s;
  s.scan = scan;
  s.recon = recon;
  s.limits = limits;
  s.loss = loss;
  if (normalize_penalty) {
    s.loss.lambda_v /= limits.v_max();
    s.loss.lambda_a /= limits.a_max();
  }
  return s;
}

Config parse_config(const char* text) {
  Config c;
  if (!text || !*text) text = "{}";
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    fail(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  {
    Section top(root);
    {
      Section s = top.sub("sampling");
      s.get("n", c.sampling.n);
      s.get("fov", c.sampling.fov);
      s.get("accel", c.sampling.accel);
      s.get("decay", c.sampling.decay);
      s.get("seed", c.sampling.seed);
      s.get("dwell", c.sampling.dwell);
      s.get("two_opt_passes", c.sampling.two_opt_passes);
      s.done();
    }
    {
      Section s = top.sub("scan");
      s.get("te", c.scan.te);
      s.get("t2", c.scan.t2);
      s.get("noise_sigma", c.scan.noise_sigma);
      s.get("noise_seed", c.scan.noise_seed);
      s.get("blur_scale", c.scan.blur_scale);
      s.get("blur_total_decay", c.scan.blur_total_decay);
      s.get("apply_te_scale", c.scan.apply_te_scale);
      s.done();
    }
    {
      Section s = top.sub("recon");
      s.get("dcf_sigma", c.recon.dcf_sigma);
      s.get("dcf_iters", c.recon.dcf_iters);
      s.get("lambda", c.recon.lambda);
      s.get("lambda_rel", c.recon.lambda_rel);
      s.get("cg_iters", c.recon.cg_iters);
      std::string rhs = rhs_name(c.recon.rhs);
      s.get("rhs", rhs);
      if (rhs == "dcf_adjoint") c.recon.rhs = RhsMode::dcf_adjoint;
      else if (rhs == "plain_adjoint") c.recon.rhs = RhsMode::plain_adjoint;
      else fail(Errc::invalid_argument, "config: 'recon.rhs' must be \"dcf_adjoint\" or \"plain_adjoint\"");
      s.get("plugin", c.recon.plugin);
      s.get("sharpen_alpha", c.recon.sharpen_alpha);
      s.done();
    }
    {
      Section s = top.sub("limits");
      s.get("gamma", c.limits.gamma);
      s.get("g_max", c.limits.g_max);
      s.get("s_max", c.limits.s_max);
      s.done();
    }
    {
      Section s = top.sub("loss");
      s.get("beta", c.loss.beta);
      s.get("lambda_v", c.loss.lambda_v);
      s.get("lambda_a", c.loss.lambda_a);
      s.get("per_axis", c.loss.per_axis);
      s.get("normalize", c.normalize_penalty);
      s.done();
    }
    {
      Section s = top.sub("optim");
      OptimConfig& o = c.optim;
      s.get("steps", o.steps);
      s.get("batch", o.batch);
      s.get("lr", o.lr);
      s.get("lr_final_ratio", o.lr_final_ratio);
      s.get("adam_beta1", o.adam_beta1);
      s.get("adam_beta2", o.adam_beta2);
      s.get("adam_eps", o.adam_eps);
      s.get("cg_unroll", o.cg_unroll);
      s.get("seed", o.seed);
      s.get("clamp_to_nyquist", o.clamp_to_nyquist);
      s.get("pin_first", o.pin_first);
      s.get("constraint_margin", o.constraint_margin);
      s.get("auto_balance", o.auto_balance);
      s.get("val_every", o.val_every);
      s.get("divergence_factor", o.divergence_factor);
      s.done();
    }
    {
      Section s = top.sub("data");
      s.get("coils", c.data.coils);
      s.get("intensity_jitter", c.data.options.intensity_jitter);
      s.get("max_rotation_deg", c.data.options.max_rotation_deg);
      s.get("smooth_phase", c.data.options.smooth_phase);
      s.get("phase_amplitude", c.data.options.phase_amplitude);
      read_split(s.sub("train"), c.data.train);
      read_split(s.sub("validation"), c.data.validation);
      read_split(s.sub("test"), c.data.test);
      s.done();
    }
    {
      Section s = top.sub("grad_check");
      s.get("eps", c.grad_check.eps);
      s.get("probes", c.grad_check.probes);
      s.get("seed", c.grad_check.seed);
      s.done();
    }
    top.get("threads", c.threads);
    top.done();
  }

  c.scan.dwell = c.sampling.dwell;
  c.optim.threads = c.threads;
  if (c.sampling.n < 2) fail(Errc::invalid_argument, "config: 'sampling.n' must be >= 2");
  if (!(c.sampling.fov > 0)) fail(Errc::invalid_argument, "config: 'sampling.fov' must be > 0");
  if (!(c.sampling.dwell > 0)) fail(Errc::invalid_argument, "config: 'sampling.dwell' must be > 0");
  if (c.data.coils < 1) fail(Errc::invalid_argument, "config: 'data.coils' must be >= 1");
  if (c.threads < 1) fail(Errc::invalid_argument, "config: 'threads' must be >= 1");
  if (!(c.grad_check.eps > 0)) fail(Errc::invalid_argument, "config: 'grad_check.eps' must be > 0");
  if (c.grad_check.probes < 1) fail(Errc::invalid_argument, "config: 'grad_check.probes' must be >= 1");
  try {
    c.scan.check();
    c.recon.check();
    c.limits.check();
    c.loss.check();
    c.optim.check();
  } catch (const Error& e) {
    fail(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  return c;
}

json to_json(const Config& c) {
  const auto split = [](const SplitConfig& s) { return json{{"count", s.count}, {"seed", s.seed}}; };
  const OptimConfig& o = c.optim;
  return json{
      {"sampling",
       {{"n", c.sampling.n},
        {"fov", c.sampling.fov},
        {"accel", c.sampling.accel},
        {"decay", c.sampling.decay},
        {"seed", c.sampling.seed},
        {"dwell", c.sampling.dwell},
        {"two_opt_passes", c.sampling.two_opt_passes}}},
      {"scan",
       {{"te", c.scan.te},
        {"t2", c.scan.t2},
        {"noise_sigma", c.scan.noise_sigma},
        {"noise_seed", c.scan.noise_seed},
        {"blur_scale", optional_number(c.scan.blur_scale)},
        {"blur_total_decay", c.scan.blur_total_decay},
        {"apply_te_scale", c.scan.apply_te_scale}}},
      {"recon",
       {{"dcf_sigma", c.recon.dcf_sigma},
        {"dcf_iters", c.recon.dcf_iters},
        {"lambda", optional_number(c.recon.lambda)},
        {"lambda_rel", c.recon.lambda_rel},
        {"cg_iters", c.recon.cg_iters},
        {"rhs", rhs_name(c.recon.rhs)},
        {"plugin", c.recon.plugin},
        {"sharpen_alpha", c.recon.sharpen_alpha}}},
      {"limits", {{"gamma", c.limits.gamma}, {"g_max", c.limits.g_max}, {"s_max", c.limits.s_max}}},
      {"loss",
       {{"beta", c.loss.beta},
        {"lambda_v", c.loss.lambda_v},
        {"lambda_a", c.loss.lambda_a},
        {"per_axis", c.loss.per_axis},
        {"normalize", c.normalize_penalty}}},
      {"optim",
       {{"steps", o.steps},
        {"batch", o.batch},
        {"lr", optional_number(o.lr)},
        {"lr_final_ratio", o.lr_final_ratio},
        {"adam_beta1", o.adam_beta1},
        {"adam_beta2", o.adam_beta2},
        {"adam_eps", o.adam_eps},
        {"cg_unroll", o.cg_unroll},
        {"seed", o.seed},
        {"clamp_to_nyquist", o.clamp_to_nyquist},
        {"pin_first", o.pin_first},
        {"constraint_margin", o.constraint_margin},
        {"auto_balance", o.auto_balance},
        {"val_every", o.val_every},
        {"divergence_factor", o.divergence_factor}}},
      {"data",
       {{"coils", c.data.coils},
        {"intensity_jitter", c.data.options.intensity_jitter},
        {"max_rotation_deg", c.data.options.max_rotation_deg},
        {"smooth_phase", c.data.options.smooth_phase},
        {"phase_amplitude", c.data.options.phase_amplitude},
        {"train", split(c.data.train)},
        {"validation", split(c.data.validation)},
        {"test", split(c.data.test)}}},
      {"grad_check", {{"eps", c.grad_check.eps}, {"probes", c.grad_check.probes}, {"seed", c.grad_check.seed}}},
      {"threads", c.threads},
  };
}

}  // namespace sstraj::capi
