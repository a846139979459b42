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

#ifndef DUAP_OPTIMIZER_HPP_
#define DUAP_OPTIMIZER_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "duap/asr_objective.hpp"
#include "duap/audio.hpp"
#include "duap/perturbation.hpp"
#include "duap/psychoacoustic.hpp"
#include "duap/sr_objective.hpp"
#include "duap/surrogates.hpp"

namespace duap {

enum class Solver { kPgdSign, kAdaptiveMoment };

struct AttackConfig {
  double lambda1 = 5.0;            // speaker loss weight
  double lambda2 = 0.003;          // hearing-threshold penalty weight
  double epsilon = 0.05;           // l-infinity budget
  double step_size = 0.001;        // PGD alpha / adaptive learning rate
  std::size_t iterations = 300;
  std::size_t batch_size = 16;
  Solver solver = Solver::kAdaptiveMoment;
  std::uint64_t seed = 0;

  std::size_t delta_length = 16000;
  int sample_rate = 16000;
  double init_fraction = 0.1;      // of epsilon, for the uniform init

  double ema_momentum = 0.9;
  double ema_eps_var = 1e-8;

  int psy_frame = 512;
  int psy_hop = 256;
};

// Throws on violated sign or range constraints. iterations == 0 is
// allowed here (a zero-iteration run returns the initialization); the
// command-line layer is stricter.
void validate_attack_config(const AttackConfig& config);

struct TraceRecord {
  std::size_t iteration = 0;
  double asr_loss = 0.0;
  double sr_loss = 0.0;
  double psy_loss = 0.0;
  double total = 0.0;
  double linf = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
};

// Tab-separated, one row per iteration, values printed with %.17g so a
// replay with the same seed is byte-identical.
void write_trace(const TrainTrace& trace, const std::string& path);

struct TotalLossResult {
  double total = 0.0;
  double asr = 0.0;
  double sr = 0.0;
  double psy = 0.0;
  std::vector<double> grad_delta;  // length L
  EmaState state;
};

// The weighted joint objective over one batch. Holds the models, the
// targets, and a cache of per-clip masking thresholds (keyed by clip id;
// thresholds depend only on clean audio).
class JointObjective {
 public:
  JointObjective(std::shared_ptr<const AsrSurrogate> asr, AsrTarget asr_target,
                 std::vector<std::shared_ptr<SpeakerEmbedder>> embedders,
                 PrototypeTable table, SrTarget sr_target, int psy_frame,
                 int psy_hop);

  // total = asr + lambda1 * sr + lambda2 * psy, with the matching
  // gradient sum. A zero lambda skips its term entirely (the component
  // is reported as 0 and, for sr, the statistics are left untouched).
  // With freeze_stats the sr statistics are used as-is instead of
  // observed first, making the value differentiable for gradient checks.
  TotalLossResult total_loss(std::span<const AudioClip> clips,
                             const UniversalPerturbation& p,
                             const AttackConfig& config,
                             const EmaState& state,
                             bool freeze_stats = false);

  std::size_t ensemble_size() const { return embedders_.size(); }
  const std::vector<std::shared_ptr<SpeakerEmbedder>>& embedders() const {
    return embedders_;
  }
  const PrototypeTable& prototype_table() const { return table_; }

  const MaskingThreshold& threshold_for(const AudioClip& clip);

 private:
  std::shared_ptr<const AsrSurrogate> asr_;
  AsrTarget asr_target_;
  std::vector<std::shared_ptr<SpeakerEmbedder>> embedders_;
  PrototypeTable table_;
  SrTarget sr_target_;
  int psy_frame_;
  int psy_hop_;
  std::map<std::string, MaskingThreshold> threshold_cache_;
};

// One sign step inside the budget: delta <- clamp(delta - alpha *
// sign(g), -eps, eps), with sign(0) = 0.
UniversalPerturbation pgd_step(const UniversalPerturbation& p,
                               std::span<const double> grad_delta,
                               const AttackConfig& config);

struct MomentState {
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t step = 0;
};

MomentState make_moment_state(std::size_t length);

// Bias-corrected adaptive-moment step (beta1 0.9, beta2 0.999,
// stabilizer 1e-8) followed by the same projection.
UniversalPerturbation adaptive_step(const UniversalPerturbation& p,
                                    std::span<const double> grad_delta,
                                    MomentState* moments,
                                    const AttackConfig& config);

struct TrainResult {
  UniversalPerturbation perturbation;
  TrainTrace trace;
};

// Full optimization loop: epoch-shuffled batches, one objective
// evaluation and one solver step per iteration, trace row per
// iteration. The budget invariant is asserted after every step.
TrainResult train(std::span<const AudioClip> clips, JointObjective* objective,
                  const AttackConfig& config);

}  // namespace duap

#endif  // DUAP_OPTIMIZER_HPP_
