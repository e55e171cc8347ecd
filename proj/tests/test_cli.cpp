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

// Runs the command-line tool as a subprocess and inspects its outputs.

#include "sstraj/sstraj.h"

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "sstraj_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Runs `sstraj <args>` inside the work directory.
Run cli(const std::string& args, const std::string& env = "") {
  const fs::path out = workdir() / "stdout.txt", err = workdir() / "stderr.txt";
  const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" SSTRAJ_CLI_PATH "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void write_config(const std::string& name, const std::string& text) {
  std::ofstream(workdir() / name) << text;
}

const char* kSmall = R"({
  "sampling": {"n": 16, "accel": 4},
  "data": {"coils": 2, "train": {"count": 3}, "validation": {"count": 2}},
  "recon": {"cg_iters": 8},
  "optim": {"steps": 3, "batch": 2, "val_every": 1, "cg_unroll": 3}
})";

// Shared fixture files, created once.
void ensure_small_setup() {
  static bool done = false;
  if (done) return;
  write_config("small.json", kSmall);
  REQUIRE(cli("init-traj -c small.json -o k0.lsst").code == 0);
  REQUIRE(cli("make-dataset -c small.json --split train -o train").code == 0);
  REQUIRE(cli("make-dataset -c small.json --split validation -o val").code == 0);
  done = true;
}

json stats_of(const fs::path& traj) {
  sstraj_trajectory* k = nullptr;
  REQUIRE(sstraj_trajectory_read(traj.c_str(), &k, nullptr) == SSTRAJ_OK);
  char* s = nullptr;
  REQUIRE(sstraj_trajectory_stats(k, nullptr, &s) == SSTRAJ_OK);
  const json j = json::parse(s);
  sstraj_string_free(s);
  sstraj_trajectory_free(k);
  return j;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("init-traj", "[cli]")
{
  const Run a = cli("init-traj -f -o default.lsst --points default_points.lsst");
  REQUIRE(a.code == 0);
  CHECK(a.out.find("tour length") != std::string::npos);
  CHECK(a.out.find("constraint loss") != std::string::npos);

  sstraj_trajectory* k = nullptr;
  char* side = nullptr;
  REQUIRE(sstraj_trajectory_read((workdir() / "default.lsst").c_str(), &k, &side) == SSTRAJ_OK);
  CHECK(sstraj_trajectory_size(k) == 512);
  const double* p = sstraj_trajectory_points(k);
  // First point nearest the origin: the origin itself is always drawn.
  CHECK(std::hypot(p[0], p[1]) == 0.0);
  const json sidecar = json::parse(side);
  sstraj_string_free(side);
  sstraj_trajectory_free(k);
  CHECK(sidecar["command"] == "init-traj");
  CHECK(sidecar["config_hash"].get<std::string>().size() == 16);

  SECTION("Reruns are byte-identical")
  {
    REQUIRE(cli("init-traj -o again.lsst --points again_points.lsst").code == 0);
    CHECK(slurp(workdir() / "again.lsst") == slurp(workdir() / "default.lsst"));
    CHECK(slurp(workdir() / "again.lsst.json") == slurp(workdir() / "default.lsst.json"));
    CHECK(slurp(workdir() / "again_points.lsst") == slurp(workdir() / "default_points.lsst"));
  }

  SECTION("Existing outputs need --force")
  {
    const Run r = cli("init-traj -o default.lsst");
    CHECK(r.code == 3);
    CHECK(r.err.find("--force") != std::string::npos);
    CHECK(cli("init-traj -o default.lsst --force").code == 0);
  }

  SECTION("Acceleration too large")
  {
    const Run r = cli("init-traj -o huge.lsst --set sampling.accel=4096");
    CHECK(r.code == 2);
    CHECK(r.err.find("accel too large") != std::string::npos);
  }
}

TEST_CASE("Configuration errors", "[cli]")
{
  write_config("typo.json", "{\n  \"optim\": {\n    \"stpes\": 3\n  }\n}\n");
  Run r = cli("init-traj -c typo.json -o t.lsst");
  CHECK(r.code == 2);
  CHECK(r.err.find("optim.stpes") != std::string::npos);

  write_config("broken.json", "{\n  \"optim\": {\n    \"steps\": 3,\n  }\n}\n");
  r = cli("init-traj -c broken.json -o t.lsst");
  CHECK(r.code == 2);
  CHECK(r.err.find("line 4") != std::string::npos);

  CHECK(cli("init-traj -o t.lsst --set optim.steps=zero").code == 2);
  CHECK(cli("init-traj -o t.lsst --set nonsense").code == 2);
  CHECK(cli("init-traj -o t.lsst", "SSTRAJ_THREADS=abc").code == 2);
  CHECK(cli("no-such-command").code == 2);
  CHECK(cli("optimize --traj missing.lsst --train . -o x.lsst").code == 2);
}

TEST_CASE("optimize", "[cli]")
{
  ensure_small_setup();

  SECTION("Log, summary and file agree")
  {
    const Run r = cli("optimize -c small.json --traj k0.lsst --train train --validation val -o k1.lsst -q -f");
    REQUIRE(r.code == 0);
    CHECK(count_lines(slurp(workdir() / "k1.lsst.log.jsonl")) == 3);
    const json summary = json::parse(slurp(workdir() / "k1.lsst.summary.json"));
    const json recomputed = stats_of(workdir() / "k1.lsst");
    CHECK(summary["best"]["v_violations"] == recomputed["v_violations"]);
    CHECK(summary["best"]["a_violations"] == recomputed["a_violations"]);
    CHECK(summary["best"]["max_v_violation"] == recomputed["max_v_violation"]);
    CHECK(r.out.find("validation PSNR") != std::string::npos);

    SECTION("Identical configs give identical files")
    {
      REQUIRE(cli("optimize -c small.json --traj k0.lsst --train train --validation val -o k2.lsst -q").code == 0);
      CHECK(slurp(workdir() / "k1.lsst") == slurp(workdir() / "k2.lsst"));
      CHECK(slurp(workdir() / "k1.lsst.log.jsonl") == slurp(workdir() / "k2.lsst.log.jsonl"));
    }

    SECTION("Thread count does not change the result")
    {
      REQUIRE(cli("optimize -c small.json --traj k0.lsst --train train --validation val -o k3.lsst -q",
                  "SSTRAJ_THREADS=3")
                  .code == 0);
      CHECK(slurp(workdir() / "k1.lsst") == slurp(workdir() / "k3.lsst"));
    }

    SECTION("Reconstruct then evaluate reproduces the validation pass")
    {
      for (int i = 0; i < 2; ++i) {
        const std::string s = std::to_string(i);
        REQUIRE(cli("simulate -c small.json --dataset val --index " + s + " --traj k1.lsst -o y" + s + ".lsst").code == 0);
        REQUIRE(cli("reconstruct -c small.json --dataset val --index " + s + " --kspace y" + s +
                    ".lsst --traj k1.lsst -o r" + s)
                    .code == 0);
      }
      // Reference images straight from the dataset.
      sstraj_dataset* d = nullptr;
      REQUIRE(sstraj_dataset_read((workdir() / "val").c_str(), &d) == SSTRAJ_OK);
      for (int i = 0; i < 2; ++i) {
        sstraj_array* x = nullptr;
        REQUIRE(sstraj_dataset_image(d, i, &x) == SSTRAJ_OK);
        REQUIRE(sstraj_array_write(x, (workdir() / ("x" + std::to_string(i) + ".lsst")).c_str()) == SSTRAJ_OK);
        sstraj_array_free(x);
      }
      sstraj_dataset_free(d);
      for (int i = 0; i < 2; ++i) {
        const std::string s = std::to_string(i);
        REQUIRE(cli("evaluate --images r" + s + "_final.lsst --references x" + s + ".lsst -o m" + s + ".txt").code == 0);
        const json m = json::parse(slurp(workdir() / ("m" + s + ".txt.json")));
        CHECK(std::abs(m["psnr"][0].get<double>() - summary["best_validation"]["psnr"][i].get<double>()) <= 1e-9);
        CHECK(std::abs(m["ssim"][0].get<double>() - summary["best_validation"]["ssim"][i].get<double>()) <= 1e-9);
      }
      REQUIRE(cli("evaluate -c small.json --dataset val --traj k1.lsst -o all.txt --dump-dir dump --crop 12").code == 0);
      const json all = json::parse(slurp(workdir() / "all.txt.json"));
      CHECK(std::abs(all["mean_psnr"].get<double>() - summary["best_validation"]["mean_psnr"].get<double>()) <= 1e-9);
      CHECK(slurp(workdir() / "all.txt").find("±") != std::string::npos);
      const std::string pgm = slurp(workdir() / "dump" / "case1_final.pgm");
      CHECK(pgm.rfind("P5\n12 12\n255\n", 0) == 0);
      CHECK(pgm.size() == 13 + 144);
    }
  }

  SECTION("One step at zero learning rate is a byte-for-byte no-op")
  {
    REQUIRE(cli("optimize -c small.json --traj k0.lsst --train train -o same.lsst -q --set optim.steps=1 optim.lr=0")
                .code == 0);
    CHECK(slurp(workdir() / "same.lsst") == slurp(workdir() / "k0.lsst"));
    CHECK(count_lines(slurp(workdir() / "same.lsst.log.jsonl")) == 1);
  }

  SECTION("Divergence exits with the numerical status")
  {
    const Run r = cli("optimize -c small.json --traj k0.lsst --train train -o div.lsst -q --set optim.lr=1e9 "
                      "optim.clamp_to_nyquist=false optim.divergence_factor=1.01 optim.steps=5");
    CHECK(r.code == 4);
    CHECK(r.err.find("diverg") != std::string::npos);
  }
}

TEST_CASE("evaluate and grad-check", "[cli]")
{
  ensure_small_setup();

  SECTION("Identity evaluation")
  {
    sstraj_dataset* d = nullptr;
    REQUIRE(sstraj_dataset_read((workdir() / "val").c_str(), &d) == SSTRAJ_OK);
    sstraj_array* x = nullptr;
    REQUIRE(sstraj_dataset_image(d, 0, &x) == SSTRAJ_OK);
    REQUIRE(sstraj_array_write(x, (workdir() / "truth0.lsst").c_str()) == SSTRAJ_OK);
    sstraj_array_free(x);
    sstraj_dataset_free(d);
    REQUIRE(cli("evaluate --images truth0.lsst --references truth0.lsst -o ident.txt").code == 0);
    const json m = json::parse(slurp(workdir() / "ident.txt.json"));
    CHECK(m["psnr"][0] == 300.0);
    CHECK(std::abs(m["ssim"][0].get<double>() - 1.0) <= 1e-12);
  }

  SECTION("Degenerate pipeline through files")
  {
    // Fully sampled Cartesian trajectory, blur off, 30 CG iterations, no regularization.
    const int n = 16;
    const double fov = 0.2;
    std::vector<double> pts;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        pts.push_back((ix - n / 2) / fov);
        pts.push_back((iy - n / 2) / fov);
      }
    sstraj_trajectory* k = nullptr;
    REQUIRE(sstraj_trajectory_create(n * n, pts.data(), 1e-6, fov, &k) == SSTRAJ_OK);
    REQUIRE(sstraj_trajectory_write(k, (workdir() / "cart.lsst").c_str(), nullptr) == SSTRAJ_OK);
    sstraj_trajectory_free(k);
    write_config("degenerate.json", R"({"sampling": {"n": 16}, "scan": {"blur_scale": 0},
                                        "recon": {"cg_iters": 30, "lambda": 0}})");
    REQUIRE(cli("simulate -c degenerate.json --dataset val --index 0 --traj cart.lsst -o ycart.lsst").code == 0);
    REQUIRE(cli("reconstruct -c degenerate.json --dataset val --index 0 --kspace ycart.lsst --traj cart.lsst -o "
                "cart --pgm")
                .code == 0);
    CHECK(fs::exists(workdir() / "cart_final.pgm"));

    sstraj_array *a = nullptr, *b = nullptr;
    sstraj_dataset* d = nullptr;
    REQUIRE(sstraj_array_read((workdir() / "cart_final.lsst").c_str(), &a) == SSTRAJ_OK);
    REQUIRE(sstraj_dataset_read((workdir() / "val").c_str(), &d) == SSTRAJ_OK);
    REQUIRE(sstraj_dataset_image(d, 0, &b) == SSTRAJ_OK);
    double diff = 0, ref = 0;
    for (uint64_t i = 0; i < 2 * sstraj_array_elements(a); ++i) {
      const double u = sstraj_array_data(a)[i], v = sstraj_array_data(b)[i];
      diff += (u - v) * (u - v);
      ref += v * v;
    }
    CHECK(std::sqrt(diff / ref) <= 1e-6);
    sstraj_array_free(a);
    sstraj_array_free(b);
    sstraj_dataset_free(d);
  }

  SECTION("Gradient check")
  {
    const Run r = cli("grad-check -c small.json --dataset val --traj k0.lsst --set grad_check.probes=4 loss.beta=0");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("max relative error") != std::string::npos);
  }

  SECTION("Malformed inputs")
  {
    std::ofstream(workdir() / "junk.lsst") << "not an array";
    const Run r = cli("evaluate --images junk.lsst --references junk.lsst");
    CHECK(r.code == 3);
    CHECK(cli("evaluate --dataset val").code == 2);
  }
}
