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

#include "sstraj/sstraj.h"

#include "config.hpp"
#include "sstraj/array_io.hpp"
#include "sstraj/sampling.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>

using nlohmann::json;
using namespace sstraj;
using sstraj::capi::Config;
using sstraj::capi::parse_config;

struct sstraj_array {
  Array a;
};

struct sstraj_trajectory {
  Trajectory k;
};

struct sstraj_dataset {
  std::vector<PhantomCase> cases;
  json meta = json::object();
};

namespace {

thread_local std::string last_error;

sstraj_status status_of(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return SSTRAJ_ERR_INVALID_ARGUMENT;
    case Errc::shape_mismatch: return SSTRAJ_ERR_SHAPE_MISMATCH;
    case Errc::non_finite_value: return SSTRAJ_ERR_NON_FINITE;
    case Errc::csm_not_normalized: return SSTRAJ_ERR_CSM_NOT_NORMALIZED;
    case Errc::accel_too_large: return SSTRAJ_ERR_ACCEL_TOO_LARGE;
    case Errc::empty_input: return SSTRAJ_ERR_EMPTY_INPUT;
    case Errc::singular_density: return SSTRAJ_ERR_SINGULAR_DENSITY;
    case Errc::cg_breakdown: return SSTRAJ_ERR_CG_BREAKDOWN;
    case Errc::divergence: return SSTRAJ_ERR_DIVERGENCE;
    case Errc::io: return SSTRAJ_ERR_IO;
    case Errc::format: return SSTRAJ_ERR_FORMAT;
    case Errc::unknown_plugin: return SSTRAJ_ERR_UNKNOWN_PLUGIN;
    case Errc::plugin_failed: return SSTRAJ_ERR_PLUGIN_FAILED;
  }
  return SSTRAJ_ERR_INTERNAL;
}

// Runs f, translating every exception into a status and last_error.
template <class F>
sstraj_status guarded(F&& f) noexcept {
  try {
    f();
    return SSTRAJ_OK;
  } catch (const Error& e) {
    last_error = e.what();
    // Config problems are reported as such, whatever module rejected them.
    if (e.code() == Errc::invalid_argument && last_error.rfind("config:", 0) == 0) return SSTRAJ_ERR_CONFIG;
    return status_of(e.code());
  } catch (const json::exception& e) {
    last_error = e.what();
    return SSTRAJ_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return SSTRAJ_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return SSTRAJ_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown exception";
    return SSTRAJ_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(Errc::invalid_argument, std::string(what) + " must not be NULL");
}

char* to_c_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const json& j) {
  if (out) *out = to_c_string(j.dump(2));
}

template <class T>
T* own(T* p, T** out) {
  *out = p;
  return p;
}

json evaluation_json(const Evaluation& e) {
  const Summary p = summarize(e.psnr), s = summarize(e.ssim);
  return json{{"psnr", e.psnr},
              {"ssim", e.ssim},
              {"task", e.task},
              {"mean_psnr", e.mean_psnr},
              {"std_psnr", p.stddev},
              {"mean_ssim", e.mean_ssim},
              {"std_ssim", s.stddev},
              {"mean_task", e.mean_task},
              {"constraint", e.constraint},
              {"total", e.total}};
}

json trajectory_json(const Trajectory& k, const Config& c) {
  const PipelineSettings s = c.pipeline();
  const ConstraintStats st = constraint_stats(k, s.limits, s.loss.per_axis);
  return json{{"samples", k.size()},
              {"path_length", path_length(k.points)},
              {"max_speed", st.max_speed},
              {"max_accel", st.max_accel},
              {"v_max", s.limits.v_max()},
              {"a_max", s.limits.a_max()},
              {"max_v_violation", st.max_v_violation},
              {"max_a_violation", st.max_a_violation},
              {"v_violations", st.v_violations},
              {"a_violations", st.a_violations},
              {"violations", st.v_violations + st.a_violations},
              {"constraint_loss", constraint_loss(k, s.limits, s.loss)}};
}

json record_json(const StepRecord& r) {
  json j{{"step", r.step},
         {"lr", r.lr},
         {"total", r.total},
         {"task", r.task},
         {"constraint", r.constraint},
         {"max_v_violation", r.max_v_violation},
         {"max_a_violation", r.max_a_violation},
         {"v_violations", r.v_violations},
         {"a_violations", r.a_violations}};
  if (r.validation) {
    j["val_psnr"] = r.validation->mean_psnr;
    j["val_ssim"] = r.validation->mean_ssim;
    j["val_total"] = r.validation->total;
  }
  return j;
}

const PhantomCase& case_at(const sstraj_dataset* d, size_t index) {
  require(d, "dataset");
  if (index >= d->cases.size())
    fail(Errc::invalid_argument, "case index " + std::to_string(index) + " out of range for a dataset of " +
                                     std::to_string(d->cases.size()));
  return d->cases[index];
}

void check_case_shape(const sstraj_dataset* d, const Config& c) {
  const PhantomCase& first = case_at(d, 0);
  if (first.image.ny() != c.sampling.n)
    fail(Errc::shape_mismatch, "dataset images are " + std::to_string(first.image.ny()) + "x" +
                                   std::to_string(first.image.nx()) + " but sampling.n is " +
                                   std::to_string(c.sampling.n));
}

void check_trajectory_fov(const Trajectory& k, const Config& c) {
  if (std::abs(k.fov - c.sampling.fov) > 1e-12 * c.sampling.fov)
    fail(Errc::invalid_argument, "config: trajectory fov " + std::to_string(k.fov) +
                                     " differs from sampling.fov " + std::to_string(c.sampling.fov));
}

}  // namespace

extern "C" {

const char* sstraj_version(void) { return "1.0.0"; }

const char* sstraj_last_error(void) { return last_error.c_str(); }

const char* sstraj_status_name(sstraj_status status) {
  switch (status) {
    case SSTRAJ_OK: return "ok";
    case SSTRAJ_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SSTRAJ_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case SSTRAJ_ERR_NON_FINITE: return "non-finite value";
    case SSTRAJ_ERR_CSM_NOT_NORMALIZED: return "coil maps not normalized";
    case SSTRAJ_ERR_ACCEL_TOO_LARGE: return "accel too large";
    case SSTRAJ_ERR_EMPTY_INPUT: return "empty input";
    case SSTRAJ_ERR_SINGULAR_DENSITY: return "singular density";
    case SSTRAJ_ERR_CG_BREAKDOWN: return "conjugate gradient breakdown";
    case SSTRAJ_ERR_DIVERGENCE: return "divergence";
    case SSTRAJ_ERR_IO: return "i/o error";
    case SSTRAJ_ERR_FORMAT: return "malformed file";
    case SSTRAJ_ERR_UNKNOWN_PLUGIN: return "unknown plugin";
    case SSTRAJ_ERR_PLUGIN_FAILED: return "plugin failed";
    case SSTRAJ_ERR_CONFIG: return "config error";
    case SSTRAJ_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void sstraj_string_free(char* s) { std::free(s); }

sstraj_status sstraj_config_resolve(const char* config_json, char** resolved_json) {
  return guarded([&] {
    require(resolved_json, "resolved_json");
    *resolved_json = to_c_string(capi::to_json(parse_config(config_json)).dump(2));
  });
}

// ---- arrays ---------------------------------------------------------------

sstraj_status sstraj_array_create(sstraj_dtype dtype, size_t rank, const uint64_t* dims, const double* values,
                                  sstraj_array** out) {
  return guarded([&] {
    require(out, "out");
    if (rank > 0) require(dims, "dims");
    if (dtype != SSTRAJ_COMPLEX128 && dtype != SSTRAJ_FLOAT64) fail(Errc::invalid_argument, "unknown dtype");
    auto h = std::make_unique<sstraj_array>();
    h->a.dtype = static_cast<DType>(dtype);
    h->a.dims.assign(dims, dims + rank);
    const std::size_t count = h->a.elements() * (dtype == SSTRAJ_COMPLEX128 ? 2 : 1);
    if (count > 0) require(values, "values");
    h->a.values.assign(values, values + count);
    *out = h.release();
  });
}

sstraj_status sstraj_array_read(const char* path, sstraj_array** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto h = std::make_unique<sstraj_array>();
    h->a = read_array(path);
    *out = h.release();
  });
}

sstraj_status sstraj_array_write(const sstraj_array* a, const char* path) {
  return guarded([&] {
    require(a, "array");
    require(path, "path");
    write_array(path, a->a);
  });
}

sstraj_dtype sstraj_array_dtype(const sstraj_array* a) { return static_cast<sstraj_dtype>(a->a.dtype); }
size_t sstraj_array_rank(const sstraj_array* a) { return a->a.dims.size(); }
const uint64_t* sstraj_array_dims(const sstraj_array* a) { return a->a.dims.data(); }
const double* sstraj_array_data(const sstraj_array* a) { return a->a.values.data(); }
uint64_t sstraj_array_elements(const sstraj_array* a) { return a->a.elements(); }
void sstraj_array_free(sstraj_array* a) { delete a; }

// ---- trajectories ---------------------------------------------------------

sstraj_status sstraj_trajectory_create(size_t m, const double* points, double dwell, double fov,
                                       sstraj_trajectory** out) {
  return guarded([&] {
    require(out, "out");
    if (m > 0) require(points, "points");
    auto h = std::make_unique<sstraj_trajectory>();
    h->k.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>>(
        points, static_cast<Index>(m), 2);
    h->k.dwell = dwell;
    h->k.fov = fov;
    validate(h->k);
    *out = h.release();
  });
}

sstraj_status sstraj_trajectory_read(const char* path, sstraj_trajectory** out, char** sidecar_json) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto h = std::make_unique<sstraj_trajectory>();
    std::string sidecar;
    h->k = read_trajectory(path, &sidecar);
    if (sidecar_json) *sidecar_json = to_c_string(sidecar);
    *out = h.release();
  });
}

sstraj_status sstraj_trajectory_write(const sstraj_trajectory* k, const char* path, const char* extra_json) {
  return guarded([&] {
    require(k, "trajectory");
    require(path, "path");
    write_trajectory(path, k->k, extra_json && *extra_json ? extra_json : "{}");
  });
}

size_t sstraj_trajectory_size(const sstraj_trajectory* k) { return static_cast<size_t>(k->k.size()); }

const double* sstraj_trajectory_points(const sstraj_trajectory* k) {
  // RMatrix is row-major, so the storage already is (kx, ky) pairs.
  static_assert(RMatrix::IsRowMajor);
  return k->k.points.data();
}

double sstraj_trajectory_dwell(const sstraj_trajectory* k) { return k->k.dwell; }
double sstraj_trajectory_fov(const sstraj_trajectory* k) { return k->k.fov; }
void sstraj_trajectory_free(sstraj_trajectory* k) { delete k; }

sstraj_status sstraj_trajectory_stats(const sstraj_trajectory* k, const char* config_json, char** stats_json) {
  return guarded([&] {
    require(k, "trajectory");
    require(stats_json, "stats_json");
    put_string(stats_json, trajectory_json(k->k, parse_config(config_json)));
  });
}

sstraj_status sstraj_init_trajectory(const char* config_json, sstraj_trajectory** out, sstraj_array** points,
                                     char** info_json) {
  return guarded([&] {
    require(out, "out");
    const Config c = parse_config(config_json);
    const capi::SamplingConfig& s = c.sampling;
    const PointSet ps = generate_vd_points(s.n, s.fov, s.accel, s.decay, s.seed);
    auto h = std::make_unique<sstraj_trajectory>();
    h->k = build_initial_trajectory(ps, s.dwell, s.fov, s.two_opt_passes);
    std::unique_ptr<sstraj_array> p;
    if (points) {
      p = std::make_unique<sstraj_array>();
      p->a = to_array(ps.points);
    }
    if (info_json) {
      json info = trajectory_json(h->k, c);
      info["raster_path_length"] = path_length(ps.points);
      put_string(info_json, info);
    }
    if (points) *points = p.release();
    *out = h.release();
  });
}

// ---- datasets -------------------------------------------------------------

sstraj_status sstraj_dataset_make(const char* config_json, const char* split, sstraj_dataset** out) {
  return guarded([&] {
    require(split, "split");
    require(out, "out");
    const Config c = parse_config(config_json);
    const std::string name = split;
    const capi::SplitConfig* sc = name == "train"        ? &c.data.train
                                  : name == "validation" ? &c.data.validation
                                  : name == "test"       ? &c.data.test
                                                         : nullptr;
    if (!sc) fail(Errc::invalid_argument, "config: unknown split '" + name + "' (train, validation, test)");
    auto h = std::make_unique<sstraj_dataset>();
    h->cases = make_dataset(sc->count, c.sampling.n, c.data.coils, sc->seed, c.data.options);
    h->meta = json{{"split", name}, {"count", sc->count}, {"seed", sc->seed}, {"n", c.sampling.n},
                   {"coils", c.data.coils}};
    *out = h.release();
  });
}

sstraj_status sstraj_dataset_read(const char* dir, sstraj_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    const std::filesystem::path root(dir);
    const Array images = read_array(root / "images.lsst");
    const Array coils = read_array(root / "coils.lsst");
    if (images.dims.size() != 3 || coils.dims.size() != 4 || images.dims[0] != coils.dims[0])
      fail(Errc::format, std::string("dataset ") + dir + " holds inconsistent images.lsst / coils.lsst");
    auto h = std::make_unique<sstraj_dataset>();
    std::ifstream meta(root / "dataset.json");
    if (meta) h->meta = json::parse(meta);
    for (std::uint64_t i = 0; i < images.dims[0]; ++i) {
      PhantomCase pc;
      pc.image = image_from_array(slice_array(images, i));
      pc.csm = coils_from_array(slice_array(coils, i));
      validate(pc.image, pc.csm);
      h->cases.push_back(std::move(pc));
    }
    if (h->cases.empty()) fail(Errc::empty_input, std::string("dataset ") + dir + " is empty");
    *out = h.release();
  });
}

sstraj_status sstraj_dataset_write(const sstraj_dataset* d, const char* dir, const char* extra_json, int force) {
  return guarded([&] {
    require(d, "dataset");
    require(dir, "dir");
    const std::filesystem::path root(dir);
    const std::filesystem::path files[] = {root / "images.lsst", root / "coils.lsst", root / "dataset.json"};
    if (!force)
      for (const auto& f : files)
        if (std::filesystem::exists(f)) fail(Errc::io, f.string() + " exists (use --force to overwrite)");
    std::filesystem::create_directories(root);
    std::vector<Array> images, coils;
    for (const PhantomCase& c : d->cases) {
      images.push_back(to_array(c.image));
      coils.push_back(to_array(c.csm));
    }
    write_array(files[0], stack_arrays(images));
    write_array(files[1], stack_arrays(coils));
    json meta = d->meta;
    if (extra_json && *extra_json) meta.update(json::parse(extra_json));
    std::ofstream f(files[2], std::ios::binary);
    f << meta.dump(2) << "\n";
    if (!f) fail(Errc::io, "failed writing " + files[2].string());
  });
}

size_t sstraj_dataset_size(const sstraj_dataset* d) { return d->cases.size(); }

sstraj_status sstraj_dataset_image(const sstraj_dataset* d, size_t index, sstraj_array** out) {
  return guarded([&] {
    require(out, "out");
    auto h = std::make_unique<sstraj_array>();
    h->a = to_array(case_at(d, index).image);
    *out = h.release();
  });
}

sstraj_status sstraj_dataset_coils(const sstraj_dataset* d, size_t index, sstraj_array** out) {
  return guarded([&] {
    require(out, "out");
    auto h = std::make_unique<sstraj_array>();
    h->a = to_array(case_at(d, index).csm);
    *out = h.release();
  });
}

void sstraj_dataset_free(sstraj_dataset* d) { delete d; }

// ---- inference ------------------------------------------------------------

sstraj_status sstraj_simulate(const sstraj_array* image, const sstraj_array* coils, const sstraj_trajectory* k,
                              const char* config_json, uint64_t case_index, sstraj_array** kspace) {
  return guarded([&] {
    require(image, "image");
    require(coils, "coils");
    require(k, "trajectory");
    require(kspace, "kspace");
    const Config c = parse_config(config_json);
    const ComplexImage x = image_from_array(image->a);
    const CoilMaps csm = coils_from_array(coils->a);
    validate(x, csm);
    auto h = std::make_unique<sstraj_array>();
    h->a = to_array(simulate(x, csm, k->k, c.pipeline().scan, case_index));
    *kspace = h.release();
  });
}

sstraj_status sstraj_reconstruct(const sstraj_array* kspace, const sstraj_array* coils, const sstraj_trajectory* k,
                                 const char* config_json, sstraj_array** regridded, sstraj_array** sense,
                                 sstraj_array** final_image, char** info_json) {
  return guarded([&] {
    require(kspace, "kspace");
    require(coils, "coils");
    require(k, "trajectory");
    const Config c = parse_config(config_json);
    const PipelineSettings s = c.pipeline();
    const Reconstruction r =
        reconstruct(kspace_from_array(kspace->a), coils_from_array(coils->a), k->k, s.recon, s.scan);
    std::unique_ptr<sstraj_array> a, b, f;
    if (regridded) (a = std::make_unique<sstraj_array>())->a = to_array(r.regridded);
    if (sense) (b = std::make_unique<sstraj_array>())->a = to_array(r.sense);
    if (final_image) (f = std::make_unique<sstraj_array>())->a = to_array(r.final);
    if (info_json)
      put_string(info_json, json{{"lambda", r.lambda}, {"cg_iters", c.recon.cg_iters},
                                 {"residual_norms", r.residual_norms}});
    if (regridded) *regridded = a.release();
    if (sense) *sense = b.release();
    if (final_image) *final_image = f.release();
  });
}

sstraj_status sstraj_evaluate_images(const sstraj_array* images, const sstraj_array* references,
                                     char** metrics_json) {
  return guarded([&] {
    require(images, "images");
    require(references, "references");
    require(metrics_json, "metrics_json");
    const Array& a = images->a;
    const Array& b = references->a;
    std::vector<Array> xs, refs;
    if (a.dims.size() == 2 && b.dims.size() == 2) {
      xs = {a};
      refs = {b};
    } else if (a.dims.size() == 3 && b.dims.size() == 3 && a.dims[0] == b.dims[0]) {
      for (std::uint64_t i = 0; i < a.dims[0]; ++i) {
        xs.push_back(slice_array(a, i));
        refs.push_back(slice_array(b, i));
      }
    } else {
      fail(Errc::shape_mismatch, "images and references must both be n x n or both count x n x n");
    }
    Evaluation e;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const ComplexImage x = image_from_array(xs[i]), ref = image_from_array(refs[i]);
      e.psnr.push_back(psnr(x, ref));
      e.ssim.push_back(ssim(x, ref));
      e.task.push_back(task_loss(x, ref));
    }
    e.mean_psnr = summarize(e.psnr).mean;
    e.mean_ssim = summarize(e.ssim).mean;
    e.mean_task = summarize(e.task).mean;
    e.total = e.mean_task;
    put_string(metrics_json, evaluation_json(e));
  });
}

sstraj_status sstraj_evaluate_trajectory(const sstraj_dataset* d, const sstraj_trajectory* k,
                                         const char* config_json, char** metrics_json) {
  return guarded([&] {
    require(k, "trajectory");
    require(metrics_json, "metrics_json");
    const Config c = parse_config(config_json);
    check_case_shape(d, c);
    const Evaluation e = evaluate_trajectory(d->cases, k->k, c.pipeline(), c.threads);
    json j = evaluation_json(e);
    j["trajectory"] = trajectory_json(k->k, c);
    put_string(metrics_json, j);
  });
}

// ---- training -------------------------------------------------------------

sstraj_status sstraj_optimize(const sstraj_dataset* train, const sstraj_dataset* validation,
                              const sstraj_trajectory* k0, const char* config_json, sstraj_progress_fn progress,
                              void* user, sstraj_trajectory** best, sstraj_trajectory** last, char** report_json) {
  return guarded([&] {
    require(train, "train");
    require(k0, "trajectory");
    const Config c = parse_config(config_json);
    check_case_shape(train, c);
    check_trajectory_fov(k0->k, c);
    static const std::vector<PhantomCase> no_cases;
    if (validation) check_case_shape(validation, c);
    ProgressFn fn;
    if (progress) fn = [&](const StepRecord& r) { progress(record_json(r).dump().c_str(), user); };
    const OptimReport r =
        optimize_trajectory(train->cases, validation ? validation->cases : no_cases, k0->k, c.pipeline(), c.optim, fn);

    std::unique_ptr<sstraj_trajectory> b, l;
    if (best) (b = std::make_unique<sstraj_trajectory>())->k = r.best;
    if (last) (l = std::make_unique<sstraj_trajectory>())->k = r.last;
    if (report_json) {
      json j{{"steps", r.records.size()},
             {"best_step", r.best_step},
             {"beta", r.beta},
             {"initial", trajectory_json(r.initial, c)},
             {"best", trajectory_json(r.best, c)},
             {"last", trajectory_json(r.last, c)}};
      if (validation) {
        j["initial_validation"] = evaluation_json(r.initial_validation);
        j["best_validation"] = evaluation_json(r.best_validation);
      }
      put_string(report_json, j);
    }
    if (best) *best = b.release();
    if (last) *last = l.release();
  });
}

sstraj_status sstraj_grad_check(const sstraj_dataset* d, size_t index, const sstraj_trajectory* k,
                                const char* config_json, char** report_json) {
  return guarded([&] {
    require(k, "trajectory");
    require(report_json, "report_json");
    const Config c = parse_config(config_json);
    const PhantomCase& pc = case_at(d, index);
    PipelineSettings s = c.pipeline();
    s.recon.cg_iters = c.optim.cg_unroll;
    const GradCheckReport r = grad_check(pc, k->k, s, c.grad_check.eps, c.grad_check.probes, c.grad_check.seed);
    json probes = json::array();
    for (const GradProbe& p : r.probes)
      probes.push_back(json{{"row", p.row},
                            {"col", p.col},
                            {"analytic", p.analytic},
                            {"numeric", p.numeric},
                            {"rel_error", p.rel_error},
                            {"kink", p.kink}});
    put_string(report_json, json{{"max_rel_error", r.max_rel_error},
                                 {"kinks", r.kinks},
                                 {"eps", c.grad_check.eps},
                                 {"cg_unroll", c.optim.cg_unroll},
                                 {"probes", probes}});
  });
}

}  // extern "C"
