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

#include "duap/sr_objective.hpp"

#include <algorithm>
#include <cmath>

#include "duap/common.hpp"

namespace duap {

std::size_t PrototypeTable::model_index(const std::string& name) const {
  const auto it = std::find(models.begin(), models.end(), name);
  if (it == models.end()) {
    throw Error("model not in prototype table: " + name);
  }
  return static_cast<std::size_t>(it - models.begin());
}

std::size_t PrototypeTable::speaker_index(const std::string& id) const {
  const auto it = std::find(speakers.begin(), speakers.end(), id);
  if (it == speakers.end()) {
    throw Error("speaker not in prototype table: " + id);
  }
  return static_cast<std::size_t>(it - speakers.begin());
}

EmaState make_ema_state(std::size_t n_models, double momentum,
                        double eps_var) {
  if (n_models == 0) throw Error("ensemble needs at least one model");
  if (!(momentum > 0.0 && momentum < 1.0)) {
    throw Error("momentum must lie in (0, 1)");
  }
  if (!(eps_var > 0.0)) throw Error("eps_var must be positive");
  EmaState state;
  state.mu.assign(n_models, 0.0);
  state.sigma.assign(n_models, 0.0);
  state.momentum = momentum;
  state.eps_var = eps_var;
  state.step = 0;
  return state;
}

PrototypeTable build_prototypes(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    std::span<const AudioClip> enrollment) {
  if (embedders.empty()) throw Error("ensemble needs at least one model");
  if (enrollment.empty()) throw Error("enrollment set is empty");

  PrototypeTable table;
  std::vector<std::vector<std::size_t>> clips_of;  // per speaker
  for (std::size_t i = 0; i < enrollment.size(); ++i) {
    const std::string& sp = enrollment[i].speaker_id;
    if (sp.empty()) {
      throw Error("enrollment clip '" + enrollment[i].id +
                  "' has no speaker id");
    }
    const auto it = std::find(table.speakers.begin(), table.speakers.end(),
                              sp);
    if (it == table.speakers.end()) {
      table.speakers.push_back(sp);
      clips_of.push_back({i});
    } else {
      clips_of[static_cast<std::size_t>(it - table.speakers.begin())]
          .push_back(i);
    }
  }

  for (const auto& embedder : embedders) {
    table.models.push_back(embedder->name());
    std::vector<std::vector<double>> row;
    row.reserve(table.speakers.size());
    for (std::size_t j = 0; j < table.speakers.size(); ++j) {
      std::vector<double> mean(embedder->embedding_dim(), 0.0);
      for (const std::size_t ci : clips_of[j]) {
        std::vector<double> e;
        try {
          e = embedder->embed(enrollment[ci].samples);
        } catch (const Error& err) {
          throw Error("enrollment clip '" + enrollment[ci].id +
                      "': " + err.what());
        }
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += e[d];
      }
      for (double& v : mean) v /= static_cast<double>(clips_of[j].size());
      double norm = 0.0;
      for (double v : mean) norm += v * v;
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        throw Error("degenerate prototype for speaker '" +
                    table.speakers[j] + "' under model '" +
                    embedder->name() + "'");
      }
      for (double& v : mean) v /= norm;
      row.push_back(std::move(mean));
    }
    table.prototypes.push_back(std::move(row));
  }
  return table;
}

PrototypeTable build_prototypes(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const DatasetManifest& enrollment, std::uint32_t sample_rate) {
  std::vector<AudioClip> clips;
  clips.reserve(enrollment.entries.size());
  for (const ManifestEntry& entry : enrollment.entries) {
    AudioClip clip = load_wav(resolve_manifest_path(enrollment, entry),
                              sample_rate);
    clip.id = entry.path;
    clip.transcript = entry.transcript;
    clip.speaker_id = entry.speaker_id;
    clips.push_back(std::move(clip));
  }
  return build_prototypes(embedders, clips);
}

std::vector<double> prototype_logits(const PrototypeTable& table,
                                     std::size_t model,
                                     std::span<const double> embedding) {
  if (model >= table.models.size()) {
    throw Error("model index out of range");
  }
  const auto& row = table.prototypes[model];
  std::vector<double> z(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j].size() != embedding.size()) {
      throw Error("embedding dimension " +
                  std::to_string(embedding.size()) +
                  " does not match prototype dimension " +
                  std::to_string(row[j].size()) + " of model " +
                  table.models[model]);
    }
    double dot = 0.0;
    for (std::size_t d = 0; d < embedding.size(); ++d) {
      dot += embedding[d] * row[j][d];
    }
    z[j] = dot;
  }
  return z;
}

std::vector<double> speaker_logits(const SpeakerEmbedder& embedder,
                                   const PrototypeTable& table,
                                   std::span<const double> audio) {
  const std::size_t k = table.model_index(embedder.name());
  const std::vector<double> e = embedder.embed(audio);
  return prototype_logits(table, k, e);
}

double raw_ce(std::span<const double> logits, std::size_t target_index) {
  if (logits.empty()) throw Error("empty logit vector");
  if (target_index >= logits.size()) {
    throw Error("target speaker index out of range");
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (const double z : logits) denom += std::exp(z - zmax);
  return std::log(denom) - (logits[target_index] - zmax);
}

EmaState update_ema(const EmaState& state,
                    std::span<const double> raw_losses) {
  if (raw_losses.size() != state.mu.size()) {
    throw Error("raw loss count does not match ensemble size");
  }
  for (const double raw : raw_losses) {
    if (!std::isfinite(raw)) throw Error("non-finite raw loss");
  }
  EmaState next = state;
  const double m = state.momentum;
  for (std::size_t k = 0; k < raw_losses.size(); ++k) {
    next.mu[k] = m * state.mu[k] + (1.0 - m) * raw_losses[k];
    next.sigma[k] =
        m * state.sigma[k] + (1.0 - m) * raw_losses[k] * raw_losses[k];
  }
  next.step = state.step + 1;
  return next;
}

EmaState ema_observe(const EmaState& state,
                     std::span<const double> raw_losses) {
  if (state.step > 0) return update_ema(state, raw_losses);
  if (raw_losses.size() != state.mu.size()) {
    throw Error("raw loss count does not match ensemble size");
  }
  for (const double raw : raw_losses) {
    if (!std::isfinite(raw)) throw Error("non-finite raw loss");
  }
  EmaState next = state;
  for (std::size_t k = 0; k < raw_losses.size(); ++k) {
    next.mu[k] = raw_losses[k];
    next.sigma[k] = raw_losses[k] * raw_losses[k];
  }
  next.step = 1;
  return next;
}

DneResult dne_loss(const EmaState& state,
                   std::span<const double> raw_losses) {
  if (state.step == 0) {
    throw Error("ensemble statistics have no observations yet");
  }
  if (raw_losses.size() != state.mu.size()) {
    throw Error("raw loss count does not match ensemble size");
  }
  DneResult result;
  const std::size_t n = raw_losses.size();
  result.normalized.resize(n);
  result.std_dev.resize(n);
  result.active.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double variance =
        state.sigma[k] - state.mu[k] * state.mu[k] + state.eps_var;
    if (!(variance > 0.0)) {
      throw Error("ensemble variance is not positive");
    }
    result.std_dev[k] = std::sqrt(variance);
    result.normalized[k] = (raw_losses[k] - state.mu[k]) / result.std_dev[k];
    result.active[k] = result.normalized[k] >= 0.0;
    result.loss += std::max(0.0, result.normalized[k]);
  }
  result.loss /= static_cast<double>(n);
  return result;
}

namespace {

SrLossResult sr_loss_impl(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const EmaState& state,
    std::span<const AudioClip> clips, const UniversalPerturbation& p,
    const SrTarget& target, bool observe) {
  if (embedders.empty()) throw Error("ensemble needs at least one model");
  if (clips.empty()) throw Error("sr loss over an empty batch");
  if (embedders.size() != state.mu.size()) {
    throw Error("ensemble size does not match statistics state");
  }
  const std::size_t target_idx = table.speaker_index(target.speaker_id);
  const std::size_t n_models = embedders.size();
  const auto batch = static_cast<double>(clips.size());

  SrLossResult result;
  result.raw.assign(n_models, 0.0);
  // Per-model gradient of the batch-mean raw loss; scaled by the frozen
  // 1 / std after the statistics update below.
  std::vector<std::vector<double>> raw_grads(
      n_models, std::vector<double>(p.length(), 0.0));

  for (std::size_t k = 0; k < n_models; ++k) {
    const SpeakerEmbedder& embedder = *embedders[k];
    const std::size_t model_row = table.model_index(embedder.name());
    for (const AudioClip& clip : clips) {
      try {
        const AudioClip adv = apply(p, clip);
        const std::vector<double> e = embedder.embed(adv.samples);
        const std::vector<double> z =
            prototype_logits(table, model_row, e);
        result.raw[k] += raw_ce(z, target_idx);

        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (const double zz : z) denom += std::exp(zz - zmax);
        std::vector<double> grad_e(e.size(), 0.0);
        for (std::size_t j = 0; j < z.size(); ++j) {
          const double gz = std::exp(z[j] - zmax) / denom -
                            (j == target_idx ? 1.0 : 0.0);
          const auto& proto = table.prototypes[model_row][j];
          for (std::size_t d = 0; d < e.size(); ++d) {
            grad_e[d] += gz * proto[d];
          }
        }
        const std::vector<double> grad_audio =
            embedder.embed_backward(adv.samples, grad_e);
        const std::vector<double> folded =
            fold_gradient(p, clip, grad_audio);
        for (std::size_t i = 0; i < folded.size(); ++i) {
          raw_grads[k][i] += folded[i];
        }
      } catch (const Error& e) {
        throw Error("model '" + embedder.name() + "', clip '" + clip.id +
                    "': " + e.what());
      }
    }
    result.raw[k] /= batch;
    for (double& g : raw_grads[k]) g /= batch;
  }

  result.state = observe ? ema_observe(state, result.raw) : state;
  const DneResult dne = dne_loss(result.state, result.raw);
  result.loss = dne.loss;
  result.normalized = dne.normalized;
  result.std_dev = dne.std_dev;
  result.active = dne.active;

  result.grad_delta.assign(p.length(), 0.0);
  for (std::size_t k = 0; k < n_models; ++k) {
    if (!result.active[k]) continue;
    const double scale =
        1.0 / (result.std_dev[k] * static_cast<double>(n_models));
    for (std::size_t i = 0; i < p.length(); ++i) {
      result.grad_delta[i] += scale * raw_grads[k][i];
    }
  }
  return result;
}

}  // namespace

SrLossResult sr_loss(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const EmaState& state,
    std::span<const AudioClip> clips, const UniversalPerturbation& p,
    const SrTarget& target) {
  return sr_loss_impl(embedders, table, state, clips, p, target, true);
}

SrLossResult sr_loss_frozen(
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const EmaState& state,
    std::span<const AudioClip> clips, const UniversalPerturbation& p,
    const SrTarget& target) {
  return sr_loss_impl(embedders, table, state, clips, p, target, false);
}

}  // namespace duap
