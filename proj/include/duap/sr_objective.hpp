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

#ifndef DUAP_SR_OBJECTIVE_HPP_
#define DUAP_SR_OBJECTIVE_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "duap/audio.hpp"
#include "duap/perturbation.hpp"
#include "duap/surrogates.hpp"

namespace duap {

// Speaker centroids in each embedder's space. prototypes[k][j] is the
// unit-norm prototype of speakers[j] under models[k].
struct PrototypeTable {
  std::vector<std::string> models;
  std::vector<std::string> speakers;
  std::vector<std::vector<std::vector<double>>> prototypes;

  std::size_t model_index(const std::string& name) const;
  std::size_t speaker_index(const std::string& id) const;
};

// Running mean and second moment of each model's raw loss stream. step
// counts how many observations have been folded in.
struct EmaState {
  std::vector<double> mu;
  std::vector<double> sigma;
  double momentum = 0.9;
  double eps_var = 1e-8;
  std::uint64_t step = 0;
};

EmaState make_ema_state(std::size_t n_models, double momentum = 0.9,
                        double eps_var = 1e-8);

// Identity the perturbation should force on every clip.
struct SrTarget {
  std::string speaker_id;
};

// Per-speaker centroids: normalize(mean of enrollment embeddings), one
// table row per embedder. Speakers keep first-appearance order.
PrototypeTable build_prototypes(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    std::span<const AudioClip> enrollment);

// Loads every manifest entry at `sample_rate` and delegates to the
// in-memory overload.
PrototypeTable build_prototypes(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const DatasetManifest& enrollment, std::uint32_t sample_rate);

// Similarity logits z_j = dot(embedding, prototype_j) for one model row.
std::vector<double> prototype_logits(const PrototypeTable& table,
                                     std::size_t model,
                                     std::span<const double> embedding);

// Embeds `audio` with `embedder` and scores it against that embedder's
// row of the table.
std::vector<double> speaker_logits(const SpeakerEmbedder& embedder,
                                   const PrototypeTable& table,
                                   std::span<const double> audio);

// Softmax cross-entropy of the target speaker given similarity logits,
// computed with max-subtraction.
double raw_ce(std::span<const double> logits, std::size_t target_index);

// One update of both running moments; step is incremented. Rejects
// non-finite losses.
EmaState update_ema(const EmaState& state,
                    std::span<const double> raw_losses);

// Seeds the moments with the first observation (so the first normalized
// loss is exactly zero), then behaves like update_ema.
EmaState ema_observe(const EmaState& state,
                     std::span<const double> raw_losses);

struct DneResult {
  double loss = 0.0;                // mean of truncated normalized losses
  std::vector<double> normalized;   // (raw - mu) / std, before truncation
  std::vector<double> std_dev;      // sqrt(sigma - mu^2 + eps_var)
  std::vector<bool> active;         // normalized >= 0
};

// Normalized, truncated ensemble loss under frozen statistics. Requires
// at least one prior observation in `state`.
DneResult dne_loss(const EmaState& state,
                   std::span<const double> raw_losses);

struct SrLossResult {
  double loss = 0.0;
  std::vector<double> grad_delta;  // length L
  EmaState state;                  // statistics after this observation
  std::vector<double> raw;         // per-model batch-mean cross-entropy
  std::vector<double> normalized;
  std::vector<double> std_dev;
  std::vector<bool> active;
};

// Full ensemble loss for one batch: per-model batch-mean raw CE on the
// perturbed clips, EMA observation, then the truncated normalized mean.
// The gradient treats the statistics as constants and skips truncated
// models.
SrLossResult sr_loss(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const EmaState& state,
    std::span<const AudioClip> clips, const UniversalPerturbation& p,
    const SrTarget& target);

// Same loss with the statistics held fixed instead of observed, so the
// value is a plain function of the perturbation. This is the form whose
// gradient is exactly the stop-gradient one finite differences can
// check. Requires a state with at least one observation.
SrLossResult sr_loss_frozen(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const EmaState& state,
    std::span<const AudioClip> clips, const UniversalPerturbation& p,
    const SrTarget& target);

}  // namespace duap

#endif  // DUAP_SR_OBJECTIVE_HPP_
