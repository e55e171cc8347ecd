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

// sstraj: command-line front end. Talks to the library only through the C API.

#include "sstraj/sstraj.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- plumbing --------------------------------------------------------------

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(sstraj_status s) {
  switch (s) {
    case SSTRAJ_OK: return kOk;
    case SSTRAJ_ERR_CONFIG:
    case SSTRAJ_ERR_INVALID_ARGUMENT:
    case SSTRAJ_ERR_ACCEL_TOO_LARGE:
    case SSTRAJ_ERR_UNKNOWN_PLUGIN: return kConfig;
    case SSTRAJ_ERR_SHAPE_MISMATCH:
    case SSTRAJ_ERR_NON_FINITE:
    case SSTRAJ_ERR_CSM_NOT_NORMALIZED:
    case SSTRAJ_ERR_EMPTY_INPUT:
    case SSTRAJ_ERR_IO:
    case SSTRAJ_ERR_FORMAT:
    case SSTRAJ_ERR_PLUGIN_FAILED: return kData;
    case SSTRAJ_ERR_SINGULAR_DENSITY:
    case SSTRAJ_ERR_CG_BREAKDOWN:
    case SSTRAJ_ERR_DIVERGENCE: return kNumerical;
    case SSTRAJ_ERR_INTERNAL: return kInternal;
  }
  return kInternal;
}

void check(sstraj_status s) {
  if (s != SSTRAJ_OK) throw Failure{exit_code_for(s), std::string(sstraj_status_name(s)) + ": " + sstraj_last_error()};
}

struct ArrayDeleter {
  void operator()(sstraj_array* a) const { sstraj_array_free(a); }
};
struct TrajectoryDeleter {
  void operator()(sstraj_trajectory* k) const { sstraj_trajectory_free(k); }
};
struct DatasetDeleter {
  void operator()(sstraj_dataset* d) const { sstraj_dataset_free(d); }
};
using ArrayPtr = std::unique_ptr<sstraj_array, ArrayDeleter>;
using TrajectoryPtr = std::unique_ptr<sstraj_trajectory, TrajectoryDeleter>;
using DatasetPtr = std::unique_ptr<sstraj_dataset, DatasetDeleter>;

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  sstraj_string_free(s);
  return out;
}

ArrayPtr read_array(const std::string& path) {
  sstraj_array* a = nullptr;
  check(sstraj_array_read(path.c_str(), &a));
  return ArrayPtr(a);
}

TrajectoryPtr read_trajectory(const std::string& path) {
  sstraj_trajectory* k = nullptr;
  check(sstraj_trajectory_read(path.c_str(), &k, nullptr));
  return TrajectoryPtr(k);
}

DatasetPtr read_dataset(const std::string& dir) {
  sstraj_dataset* d = nullptr;
  check(sstraj_dataset_read(dir.c_str(), &d));
  return DatasetPtr(d);
}

void guard_output(const std::string& path, bool force) {
  if (!force && fs::exists(path)) throw Failure{kData, path + " exists (use --force to overwrite)"};
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Failure{kData, "failed writing " + path};
}

// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---- configuration ----------------------------------------------------------

struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;
  bool force = false;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("-c,--config", o.file, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", o.overrides, "Override a config key, e.g. --set optim.steps=100")->take_all();
  cmd->add_flag("-f,--force", o.force, "Overwrite existing outputs");
}

// Resolved configuration: defaults, then the file, then SSTRAJ_THREADS, then --set.
struct Resolved {
  std::string text;  // canonical JSON
  std::string hash;
  json doc;
};

Resolved resolve_config(const ConfigOptions& o) {
  json doc = json::object();
  if (!o.file.empty()) {
    std::ifstream f(o.file);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
      doc = json::parse(ss.str(), nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw Failure{kConfig, o.file + ": " + e.what()};
    }
    if (!doc.is_object()) throw Failure{kConfig, o.file + ": top level must be an object"};
  }
  if (const char* env = std::getenv("SSTRAJ_THREADS"); env && *env) {
    char* end = nullptr;
    const long t = std::strtol(env, &end, 10);
    if (*end || t < 1) throw Failure{kConfig, std::string("SSTRAJ_THREADS must be a positive integer, got '") + env + "'"};
    doc["threads"] = t;
  }
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{kConfig, "--set expects key=value, got '" + kv + "'"};
    const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;  // bare words are strings
    }
    json* node = &doc;
    std::stringstream path(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& next = (*node)[parts[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) throw Failure{kConfig, "--set " + key + ": '" + parts[i] + "' is not a section"};
      node = &next;
    }
    (*node)[parts.back()] = value;
  }
  char* resolved = nullptr;
  check(sstraj_config_resolve(doc.dump().c_str(), &resolved));
  Resolved r;
  r.text = take(resolved);
  r.hash = fnv1a_hex(r.text);
  r.doc = json::parse(r.text);
  return r;
}

json provenance(const std::string& command, const Resolved& cfg) {
  return json{{"command", command}, {"config_hash", cfg.hash}, {"version", sstraj_version()}};
}

// ---- images -----------------------------------------------------------------

// 8-bit binary PGM of |x|, scaled to the image maximum, optionally center-cropped.
void write_pgm(const std::string& path, const sstraj_array* a, long crop) {
  if (sstraj_array_rank(a) != 2 || sstraj_array_dtype(a) != SSTRAJ_COMPLEX128)
    throw Failure{kData, "only complex 2-D images can be dumped"};
  const std::uint64_t* dims = sstraj_array_dims(a);
  const long ny = static_cast<long>(dims[0]), nx = static_cast<long>(dims[1]);
  const double* v = sstraj_array_data(a);
  const long cy = crop > 0 ? std::min(crop, ny) : ny, cx = crop > 0 ? std::min(crop, nx) : nx;
  const long y0 = (ny - cy) / 2, x0 = (nx - cx) / 2;
  double peak = 0.0;
  for (long i = 0; i < ny * nx; ++i) peak = std::max(peak, std::hypot(v[2 * i], v[2 * i + 1]));
  std::ofstream f(path, std::ios::binary);
  f << "P5\n" << cx << " " << cy << "\n255\n";
  for (long y = y0; y < y0 + cy; ++y)
    for (long x = x0; x < x0 + cx; ++x) {
      const long i = y * nx + x;
      const double m = peak > 0 ? std::hypot(v[2 * i], v[2 * i + 1]) / peak : 0.0;
      f.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(m, 0.0, 1.0)))));
    }
  if (!f) throw Failure{kData, "failed writing " + path};
}

// ---- metrics table ----------------------------------------------------------

std::string metrics_table(const json& m) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %12s %10s %10s\n", "case", "PSNR [dB]", "SSIM", "loss");
  out << line;
  const auto& p = m.at("psnr");
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(line, sizeof line, "%-6zu %12.4f %10.6f %10.6f\n", i, p[i].get<double>(),
                  m.at("ssim")[i].get<double>(), m.at("task")[i].get<double>());
    out << line;
  }
  std::snprintf(line, sizeof line, "%-6s %5.2f ± %-5.2f %.4f ± %.4f\n", "mean", m.at("mean_psnr").get<double>(),
                m.at("std_psnr").get<double>(), m.at("mean_ssim").get<double>(), m.at("std_ssim").get<double>());
  out << line;
  return out.str();
}

void print_stats(const char* label, const json& s) {
  std::printf("%s: %ld samples, path %.4g cycles/m, max |v| %.4g (limit %.4g), max |a| %.4g (limit %.4g), "
              "violations %ld velocity + %ld acceleration, constraint loss %.6g\n",
              label, s.at("samples").get<long>(), s.at("path_length").get<double>(), s.at("max_speed").get<double>(),
              s.at("v_max").get<double>(), s.at("max_accel").get<double>(), s.at("a_max").get<double>(),
              s.at("v_violations").get<long>(), s.at("a_violations").get<long>(),
              s.at("constraint_loss").get<double>());
}

// ---- commands ---------------------------------------------------------------

struct InitTraj {
  ConfigOptions cfg;
  std::string out, points;

  void run() const {
    const Resolved c = resolve_config(cfg);
    guard_output(out, cfg.force);
    if (!points.empty()) guard_output(points, cfg.force);
    sstraj_trajectory* k = nullptr;
    sstraj_array* p = nullptr;
    char* info = nullptr;
    check(sstraj_init_trajectory(c.text.c_str(), &k, points.empty() ? nullptr : &p, &info));
    TrajectoryPtr kp(k);
    ArrayPtr pp(p);
    const json stats = json::parse(take(info));
    json side = provenance("init-traj", c);
    side["seed"] = c.doc["sampling"]["seed"];
    check(sstraj_trajectory_write(k, out.c_str(), side.dump().c_str()));
    if (pp) check(sstraj_array_write(pp.get(), points.c_str()));
    std::printf("tour length %.6g cycles/m (raster order %.6g)\n", stats.at("path_length").get<double>(),
                stats.at("raster_path_length").get<double>());
    print_stats("initial trajectory", stats);
    std::printf("wrote %s (config %s)\n", out.c_str(), c.hash.c_str());
  }
};

struct MakeDataset {
  ConfigOptions cfg;
  std::string split = "train", out;

  void run() const {
    const Resolved c = resolve_config(cfg);
    sstraj_dataset* d = nullptr;
    check(sstraj_dataset_make(c.text.c_str(), split.c_str(), &d));
    DatasetPtr dp(d);
    json extra = provenance("make-dataset", c);
    check(sstraj_dataset_write(d, out.c_str(), extra.dump().c_str(), cfg.force ? 1 : 0));
    std::printf("wrote %zu %s cases to %s (config %s)\n", sstraj_dataset_size(d), split.c_str(), out.c_str(),
                c.hash.c_str());
  }
};

struct Optimize {
  ConfigOptions cfg;
  std::string traj, train, validation, out, last, log, summary;
  bool quiet = false;

  struct LogSink {
    std::ofstream* file;
    bool quiet;
  };

  static void on_step(const char* record, void* user) {
    auto* sink = static_cast<LogSink*>(user);
    *sink->file << record << "\n";
    if (sink->quiet) return;
    const json r = json::parse(record);
    std::printf("step %4d  lr %-9.4g total %-10.6g task %-10.6g constraint %-10.6g viol %ld+%ld",
                r["step"].get<int>(), r["lr"].get<double>(), r["total"].get<double>(), r["task"].get<double>(),
                r["constraint"].get<double>(), r["v_violations"].get<long>(), r["a_violations"].get<long>());
    if (r.contains("val_psnr"))
      std::printf("  val PSNR %.4f SSIM %.4f", r["val_psnr"].get<double>(), r["val_ssim"].get<double>());
    std::printf("\n");
    std::fflush(stdout);
  }

  void run() const {
    const Resolved c = resolve_config(cfg);
    const std::string log_path = log.empty() ? out + ".log.jsonl" : log;
    const std::string summary_path = summary.empty() ? out + ".summary.json" : summary;
    for (const std::string& p : {out, log_path, summary_path}) guard_output(p, cfg.force);
    if (!last.empty()) guard_output(last, cfg.force);

    const TrajectoryPtr k0 = read_trajectory(traj);
    const DatasetPtr tr = read_dataset(train);
    const DatasetPtr va = validation.empty() ? nullptr : read_dataset(validation);

    std::ofstream log_file(log_path, std::ios::binary);
    if (!log_file) throw Failure{kData, "cannot open " + log_path};
    LogSink sink{&log_file, quiet};
    sstraj_trajectory *best = nullptr, *final_k = nullptr;
    char* report = nullptr;
    check(sstraj_optimize(tr.get(), va.get(), k0.get(), c.text.c_str(), &Optimize::on_step, &sink, &best,
                          last.empty() ? nullptr : &final_k, &report));
    TrajectoryPtr bp(best), lp(final_k);
    json rep = json::parse(take(report));

    json side = provenance("optimize", c);
    side["input"] = traj;
    side["best_step"] = rep["best_step"];
    check(sstraj_trajectory_write(best, out.c_str(), side.dump().c_str()));
    if (lp) {
      side["best_step"] = nullptr;
      check(sstraj_trajectory_write(lp.get(), last.c_str(), side.dump().c_str()));
    }
    rep["config_hash"] = c.hash;
    rep["trajectory"] = out;
    write_text(summary_path, rep.dump(2) + "\n");

    std::printf("---- summary (config %s) ----\n", c.hash.c_str());
    std::printf("best step %d of %d, beta %.6g\n", rep["best_step"].get<int>(), rep["steps"].get<int>(),
                rep["beta"].get<double>());
    print_stats("initial", rep["initial"]);
    print_stats("written", rep["best"]);
    if (rep.contains("best_validation")) {
      const json& a = rep["initial_validation"];
      const json& b = rep["best_validation"];
      std::printf("validation PSNR %.4f -> %.4f dB, SSIM %.6f -> %.6f\n", a["mean_psnr"].get<double>(),
                  b["mean_psnr"].get<double>(), a["mean_ssim"].get<double>(), b["mean_ssim"].get<double>());
    }
  }
};

// Image + coils either from explicit files or from a dataset case.
struct CaseInput {
  std::string dataset, image, coils;
  std::size_t index = 0;

  void add(CLI::App* cmd, bool need_image) {
    auto* d = cmd->add_option("--dataset", dataset, "Dataset directory");
    cmd->add_option("--index", index, "Case index within the dataset (also seeds the noise)");
    if (need_image) cmd->add_option("--image", image, "Image array file")->excludes(d);
    cmd->add_option("--coils", coils, "Coil map array file")->excludes(d);
  }

  ArrayPtr load_image() const {
    if (!image.empty()) return read_array(image);
    sstraj_array* a = nullptr;
    check(sstraj_dataset_image(read_dataset(require_dataset()).get(), index, &a));
    return ArrayPtr(a);
  }

  ArrayPtr load_coils() const {
    if (!coils.empty()) return read_array(coils);
    sstraj_array* a = nullptr;
    check(sstraj_dataset_coils(read_dataset(require_dataset()).get(), index, &a));
    return ArrayPtr(a);
  }

  const std::string& require_dataset() const {
    if (dataset.empty()) throw Failure{kConfig, "give --dataset or explicit --image/--coils files"};
    return dataset;
  }
};

struct Simulate {
  ConfigOptions cfg;
  CaseInput in;
  std::string traj, out;

  void run() const {
    const Resolved c = resolve_config(cfg);
    guard_output(out, cfg.force);
    const ArrayPtr x = in.load_image(), csm = in.load_coils();
    const TrajectoryPtr k = read_trajectory(traj);
    sstraj_array* y = nullptr;
    check(sstraj_simulate(x.get(), csm.get(), k.get(), c.text.c_str(), in.index, &y));
    ArrayPtr yp(y);
    check(sstraj_array_write(y, out.c_str()));
    std::printf("wrote %s (%" PRIu64 " coils x %" PRIu64 " samples, config %s)\n", out.c_str(),
                sstraj_array_dims(y)[0], sstraj_array_dims(y)[1], c.hash.c_str());
  }
};

struct Reconstruct {
  ConfigOptions cfg;
  CaseInput in;
  std::string kspace, traj, prefix;
  bool pgm = false;
  long crop = 0;

  void run() const {
    const Resolved c = resolve_config(cfg);
    const std::vector<std::string> names{prefix + "_regrid.lsst", prefix + "_sense.lsst", prefix + "_final.lsst"};
    for (const auto& n : names) guard_output(n, cfg.force);
    const ArrayPtr y = read_array(kspace), csm = in.load_coils();
    const TrajectoryPtr k = read_trajectory(traj);
    sstraj_array *a = nullptr, *b = nullptr, *f = nullptr;
    char* info = nullptr;
    check(sstraj_reconstruct(y.get(), csm.get(), k.get(), c.text.c_str(), &a, &b, &f, &info));
    ArrayPtr ap(a), bp(b), fp(f);
    const json meta = json::parse(take(info));
    const sstraj_array* images[] = {a, b, f};
    for (int i = 0; i < 3; ++i) {
      check(sstraj_array_write(images[i], names[i].c_str()));
      if (pgm) {
        std::string p = names[i].substr(0, names[i].size() - 5) + ".pgm";
        guard_output(p, cfg.force);
        write_pgm(p, images[i], crop);
      }
    }
    const auto& res = meta["residual_norms"];
    std::printf("lambda %.6g, %d CG iterations, residual %.4g -> %.4g\n", meta["lambda"].get<double>(),
                meta["cg_iters"].get<int>(), res.empty() ? 0.0 : res.front().get<double>(),
                res.empty() ? 0.0 : res.back().get<double>());
    std::printf("wrote %s_{regrid,sense,final}.lsst (config %s)\n", prefix.c_str(), c.hash.c_str());
  }
};

struct Evaluate {
  ConfigOptions cfg;
  std::string dataset, traj, images, references, out, dump_dir;
  long crop = 0;

  void run() const {
    const Resolved c = resolve_config(cfg);
    const std::string json_path = out.empty() ? "" : out + ".json";
    if (!out.empty()) {
      guard_output(out, cfg.force);
      guard_output(json_path, cfg.force);
    }
    json metrics;
    if (!images.empty() || !references.empty()) {
      if (images.empty() || references.empty()) throw Failure{kConfig, "--images and --references go together"};
      const ArrayPtr a = read_array(images), b = read_array(references);
      char* m = nullptr;
      check(sstraj_evaluate_images(a.get(), b.get(), &m));
      metrics = json::parse(take(m));
    } else {
      if (dataset.empty() || traj.empty()) throw Failure{kConfig, "give --dataset and --traj, or --images and --references"};
      const DatasetPtr d = read_dataset(dataset);
      const TrajectoryPtr k = read_trajectory(traj);
      char* m = nullptr;
      check(sstraj_evaluate_trajectory(d.get(), k.get(), c.text.c_str(), &m));
      metrics = json::parse(take(m));
      if (!dump_dir.empty()) dump(d.get(), k.get(), c);
    }
    metrics["config_hash"] = c.hash;
    const std::string table = metrics_table(metrics);
    std::fputs(table.c_str(), stdout);
    if (!out.empty()) {
      write_text(out, table);
      write_text(json_path, metrics.dump(2) + "\n");
    }
  }

  // Ground truth, regridding and final reconstruction of every case as PGM.
  void dump(const sstraj_dataset* d, const sstraj_trajectory* k, const Resolved& c) const {
    fs::create_directories(dump_dir);
    for (std::size_t i = 0; i < sstraj_dataset_size(d); ++i) {
      sstraj_array *x = nullptr, *csm = nullptr, *y = nullptr, *rg = nullptr, *fin = nullptr;
      check(sstraj_dataset_image(d, i, &x));
      ArrayPtr xp(x);
      check(sstraj_dataset_coils(d, i, &csm));
      ArrayPtr cp(csm);
      check(sstraj_simulate(x, csm, k, c.text.c_str(), i, &y));
      ArrayPtr yp(y);
      check(sstraj_reconstruct(y, csm, k, c.text.c_str(), &rg, nullptr, &fin, nullptr));
      ArrayPtr rp(rg), fp(fin);
      const std::string stem = (fs::path(dump_dir) / ("case" + std::to_string(i))).string();
      for (const auto& [suffix, img] : {std::pair{"_truth.pgm", x}, {"_regrid.pgm", rg}, {"_final.pgm", fin}}) {
        guard_output(stem + suffix, cfg.force);
        write_pgm(stem + suffix, img, crop);
      }
    }
  }
};

struct GradCheck {
  ConfigOptions cfg;
  std::string dataset, traj;
  std::size_t index = 0;

  void run() const {
    const Resolved c = resolve_config(cfg);
    const DatasetPtr d = read_dataset(dataset);
    const TrajectoryPtr k = read_trajectory(traj);
    char* r = nullptr;
    check(sstraj_grad_check(d.get(), index, k.get(), c.text.c_str(), &r));
    const json rep = json::parse(take(r));
    for (const json& p : rep["probes"])
      std::printf("k[%ld][%d]  analytic %+.10e  numeric %+.10e  rel %.3e%s\n", p["row"].get<long>(),
                  p["col"].get<int>(), p["analytic"].get<double>(), p["numeric"].get<double>(),
                  p["rel_error"].get<double>(), p["kink"].get<bool>() ? "  (kink, excluded)" : "");
    std::printf("max relative error %.3e over %zu probes (%d kinks), step %g k_max, unroll %d\n",
                rep["max_rel_error"].get<double>(), rep["probes"].size(), rep["kinks"].get<int>(),
                rep["eps"].get<double>(), rep["cg_unroll"].get<int>());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn physics-feasible k-space trajectories for single-shot MRI"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sstraj_version());

  InitTraj init;
  auto* c_init = app.add_subcommand("init-traj", "Variable-density draw ordered into a TSP path");
  add_config_options(c_init, init.cfg);
  c_init->add_option("-o,--out", init.out, "Trajectory file")->required();
  c_init->add_option("--points", init.points, "Also write the unordered point set");

  MakeDataset mk;
  auto* c_mk = app.add_subcommand("make-dataset", "Generate a phantom dataset split");
  add_config_options(c_mk, mk.cfg);
  c_mk->add_option("--split", mk.split, "train, validation or test")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  c_mk->add_option("-o,--out", mk.out, "Output directory")->required();

  Optimize opt;
  auto* c_opt = app.add_subcommand("optimize", "Learn a trajectory on a phantom dataset");
  add_config_options(c_opt, opt.cfg);
  c_opt->add_option("--traj", opt.traj, "Initial trajectory")->required()->check(CLI::ExistingFile);
  c_opt->add_option("--train", opt.train, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
  c_opt->add_option("--validation", opt.validation, "Validation dataset directory")->check(CLI::ExistingDirectory);
  c_opt->add_option("-o,--out", opt.out, "Best trajectory (by validation loss)")->required();
  c_opt->add_option("--last", opt.last, "Also write the final iterate");
  c_opt->add_option("--log", opt.log, "Per-step log (default <out>.log.jsonl)");
  c_opt->add_option("--summary", opt.summary, "Summary JSON (default <out>.summary.json)");
  c_opt->add_flag("-q,--quiet", opt.quiet, "Do not echo steps to stdout");

  Simulate sim;
  auto* c_sim = app.add_subcommand("simulate", "Blurred, noisy k-space for an image and trajectory");
  add_config_options(c_sim, sim.cfg);
  sim.in.add(c_sim, true);
  c_sim->add_option("--traj", sim.traj, "Trajectory file")->required()->check(CLI::ExistingFile);
  c_sim->add_option("-o,--out", sim.out, "k-space array file")->required();

  Reconstruct rec;
  auto* c_rec = app.add_subcommand("reconstruct", "Regridding, CG-SENSE and post-reconstruction");
  add_config_options(c_rec, rec.cfg);
  rec.in.add(c_rec, false);
  c_rec->add_option("--kspace", rec.kspace, "k-space array file")->required()->check(CLI::ExistingFile);
  c_rec->add_option("--traj", rec.traj, "Trajectory file")->required()->check(CLI::ExistingFile);
  c_rec->add_option("-o,--out-prefix", rec.prefix, "Writes <prefix>_{regrid,sense,final}.lsst")->required();
  c_rec->add_flag("--pgm", rec.pgm, "Also write magnitude PGM images");
  c_rec->add_option("--crop", rec.crop, "Center crop for PGM display (pixels, 0 = full)");

  Evaluate ev;
  auto* c_ev = app.add_subcommand("evaluate", "PSNR/SSIM table for a trajectory or for image files");
  add_config_options(c_ev, ev.cfg);
  c_ev->add_option("--dataset", ev.dataset, "Dataset directory")->check(CLI::ExistingDirectory);
  c_ev->add_option("--traj", ev.traj, "Trajectory file")->check(CLI::ExistingFile);
  c_ev->add_option("--images", ev.images, "Reconstructed image(s)")->check(CLI::ExistingFile);
  c_ev->add_option("--references", ev.references, "Reference image(s)")->check(CLI::ExistingFile);
  c_ev->add_option("-o,--out", ev.out, "Metrics table (JSON twin at <out>.json)");
  c_ev->add_option("--dump-dir", ev.dump_dir, "Write truth/regrid/final PGM images per case");
  c_ev->add_option("--crop", ev.crop, "Center crop for PGM display (pixels, 0 = full)");

  GradCheck gc;
  auto* c_gc = app.add_subcommand("grad-check", "Compare the trajectory gradient with finite differences");
  add_config_options(c_gc, gc.cfg);
  c_gc->add_option("--dataset", gc.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_gc->add_option("--index", gc.index, "Case index");
  c_gc->add_option("--traj", gc.traj, "Trajectory file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }

  try {
    if (c_init->parsed()) init.run();
    else if (c_mk->parsed()) mk.run();
    else if (c_opt->parsed()) opt.run();
    else if (c_sim->parsed()) sim.run();
    else if (c_rec->parsed()) rec.run();
    else if (c_ev->parsed()) ev.run();
    else if (c_gc->parsed()) gc.run();
  } catch (const Failure& f) {
    std::fprintf(stderr, "sstraj: %s\n", f.message.c_str());
    return f.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sstraj: %s\n", e.what());
    return kInternal;
  }
  return kOk;
}
