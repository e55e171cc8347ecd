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

// Run configuration: one JSON document with a section per module. Parsing
// rejects unknown keys and wrong types with the dotted key path.

#include "sstraj/metrics.hpp"
#include "sstraj/optim.hpp"
#include "sstraj/phantom.hpp"
#include "sstraj/recon.hpp"
#include "sstraj/sampling.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace sstraj::capi {

struct SamplingConfig {
  Index n = 64;
  double fov = 0.2;  // m
  double accel = 8.0;
  double decay = 3.0;
  std::uint64_t seed = 0;
  double dwell = 1e-6;  // s
  int two_opt_passes = kDefaultTwoOptPasses;
};

struct SplitConfig {
  Index count = 1;
  std::uint64_t seed = 0;
};

struct DataConfig {
  Index coils = 4;
  DatasetOptions options;
  SplitConfig train{16, 1000}, validation{6, 2000}, test{20, 3000};
};

struct GradCheckConfig {
  double eps = 1e-5;  // fraction of k_max
  int probes = 20;
  std::uint64_t seed = 0;
};

struct Config {
  SamplingConfig sampling;
  ScanConfig scan;
  ReconConfig recon;
  PhysicsLimits limits;
  LossWeights loss;
  // Divide lambda_v by v_max and lambda_a by a_max so the penalty counts
  // violations in units of the limits.
  bool normalize_penalty = false;
  OptimConfig optim;
  DataConfig data;
  GradCheckConfig grad_check;
  int threads = 1;

  // Settings with the normalization applied.
  PipelineSettings pipeline() const;
};

// Parses `text` (NULL or empty means defaults). Throws Error with
// Errc::invalid_argument on malformed input; messages carry line/column for
// syntax errors and the key path otherwise.
Config parse_config(const char* text);

nlohmann::json to_json(const Config& c);

}  // namespace sstraj::capi
