// Copyright 2026 The Duap Authors. All Rights Reserved.
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

#ifndef DUAP_CONFIG_HPP_
#define DUAP_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "duap/optimizer.hpp"

namespace duap {

// Flat view of the dotted-key configuration file. Defaults follow the
// attack's reference settings.
struct RunConfig {
  std::uint32_t sample_rate = 16000;  // audio.sample_rate
  int frame = 512;                    // audio.frame
  int hop = 256;                      // audio.hop

  std::size_t delta_length = 16000;   // perturbation.length
  double epsilon = 0.05;              // perturbation.epsilon
  double init_scale = 0.1;            // perturbation.init_scale

  std::string asr_surrogate = "toy-asr";  // asr.surrogate
  std::string target_text;                // asr.target_text

  std::vector<std::string> sr_surrogates = {
      "toy-embedder-a", "toy-embedder-b"};  // sr.surrogates
  std::string target_speaker;               // sr.target_speaker
  double momentum = 0.9;                    // sr.momentum
  double eps_var = 1e-8;                    // sr.eps_var
  std::string enrollment_manifest;          // sr.enrollment_manifest

  bool psy_enabled = true;  // psy.enabled

  double lambda1 = 5.0;               // optimizer.lambda1
  double lambda2 = 0.003;             // optimizer.lambda2
  std::string solver = "adaptive-moment";  // optimizer.solver
  double step_size = 0.001;           // optimizer.step_size
  std::size_t iterations = 300;       // optimizer.iterations
  std::size_t batch_size = 16;        // optimizer.batch_size
  std::uint64_t seed = 0;             // optimizer.seed

  std::string train_manifest;   // paths.train_manifest
  std::string eval_manifest;    // paths.eval_manifest
  std::string output_dir = "out";  // paths.output_dir

  std::string mos_command;  // eval.mos_command
};

// One `key = value` per line, full-line # comments, unknown and
// duplicate keys rejected. Throws ConfigError carrying the key path.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

enum class RunMode { kTrain, kEvaluate, kAnalyze };

// Cross-field validation with per-mode required fields; throws
// ConfigError naming the offending key.
void validate_config(const RunConfig& config, RunMode mode);

AttackConfig to_attack_config(const RunConfig& config);

}  // namespace duap

#endif  // DUAP_CONFIG_HPP_
