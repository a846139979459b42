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

#include "duap/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "duap/common.hpp"

namespace duap {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kMomentStabilizer = 1e-8;

void check_gradient(std::span<const double> grad, std::size_t length) {
  if (grad.size() != length) {
    throw Error("gradient length does not match perturbation");
  }
  for (const double g : grad) {
    if (!std::isfinite(g)) throw Error("non-finite gradient entry");
  }
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void validate_attack_config(const AttackConfig& config) {
  if (config.lambda1 < 0.0) throw Error("lambda1 must be >= 0");
  if (config.lambda2 < 0.0) throw Error("lambda2 must be >= 0");
  if (!(config.epsilon > 0.0)) throw Error("epsilon must be positive");
  if (!(config.step_size > 0.0)) throw Error("step size must be positive");
  if (config.batch_size == 0) throw Error("batch size must be positive");
  if (config.delta_length == 0) {
    throw Error("perturbation length must be positive");
  }
  if (config.sample_rate <= 0) throw Error("sample rate must be positive");
  if (!(config.init_fraction >= 0.0 && config.init_fraction <= 1.0)) {
    throw Error("init fraction must lie in [0, 1]");
  }
  if (!(config.ema_momentum > 0.0 && config.ema_momentum < 1.0)) {
    throw Error("ema momentum must lie in (0, 1)");
  }
  if (!(config.ema_eps_var > 0.0)) throw Error("ema eps_var must be positive");
  if (config.lambda2 > 0.0) {
    if (!is_power_of_two(static_cast<std::size_t>(config.psy_frame))) {
      throw Error("psy frame length must be a power of two");
    }
    if (config.psy_hop <= 0 || config.psy_hop > config.psy_frame) {
      throw Error("psy hop must lie in (0, frame]");
    }
  }
}

void write_trace(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace: " + path);
  out << "# iteration\tasr\tsr\tpsy\ttotal\tlinf\n";
  for (const TraceRecord& r : trace.records) {
    out << r.iteration << '\t' << format_g17(r.asr_loss) << '\t'
        << format_g17(r.sr_loss) << '\t' << format_g17(r.psy_loss) << '\t'
        << format_g17(r.total) << '\t' << format_g17(r.linf) << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

JointObjective::JointObjective(
    std::shared_ptr<const AsrSurrogate> asr, AsrTarget asr_target,
    std::vector<std::shared_ptr<SpeakerEmbedder>> embedders,
    PrototypeTable table, SrTarget sr_target, int psy_frame, int psy_hop)
    : asr_(std::move(asr)),
      asr_target_(std::move(asr_target)),
      embedders_(std::move(embedders)),
      table_(std::move(table)),
      sr_target_(std::move(sr_target)),
      psy_frame_(psy_frame),
      psy_hop_(psy_hop) {
  if (asr_ == nullptr) throw Error("joint objective needs an asr surrogate");
}

const MaskingThreshold& JointObjective::threshold_for(const AudioClip& clip) {
  if (clip.id.empty()) {
    throw Error("clip needs an id for threshold caching");
  }
  const auto it = threshold_cache_.find(clip.id);
  if (it != threshold_cache_.end()) return it->second;
  return threshold_cache_
      .emplace(clip.id, masking_threshold(clip, psy_frame_, psy_hop_))
      .first->second;
}

TotalLossResult JointObjective::total_loss(std::span<const AudioClip> clips,
                                           const UniversalPerturbation& p,
                                           const AttackConfig& config,
                                           const EmaState& state,
                                           bool freeze_stats) {
  TotalLossResult result;
  result.state = state;
  result.grad_delta.assign(p.length(), 0.0);

  {
    const AsrLossResult asr =
        asr_loss(*asr_, clips, p, asr_target_);
    result.asr = asr.loss;
    for (std::size_t i = 0; i < p.length(); ++i) {
      result.grad_delta[i] += asr.grad_delta[i];
    }
  }

  if (config.lambda1 > 0.0) {
    const SrLossResult sr =
        freeze_stats
            ? sr_loss_frozen(embedders_, table_, state, clips, p, sr_target_)
            : sr_loss(embedders_, table_, state, clips, p, sr_target_);
    result.sr = sr.loss;
    result.state = sr.state;
    for (std::size_t i = 0; i < p.length(); ++i) {
      result.grad_delta[i] += config.lambda1 * sr.grad_delta[i];
    }
  }

  if (config.lambda2 > 0.0) {
    double psy_sum = 0.0;
    std::vector<double> psy_grad(p.length(), 0.0);
    for (const AudioClip& clip : clips) {
      try {
        const MaskingThreshold& threshold = threshold_for(clip);
        const PsyLossResult one = psy_loss(clip, p, threshold);
        psy_sum += one.loss;
        for (std::size_t i = 0; i < p.length(); ++i) {
          psy_grad[i] += one.grad_delta[i];
        }
      } catch (const Error& e) {
        throw Error("hearing-threshold term, clip '" + clip.id +
                    "': " + e.what());
      }
    }
    const auto batch = static_cast<double>(clips.size());
    result.psy = psy_sum / batch;
    for (std::size_t i = 0; i < p.length(); ++i) {
      result.grad_delta[i] += config.lambda2 * psy_grad[i] / batch;
    }
  }

  result.total = result.asr + config.lambda1 * result.sr +
                 config.lambda2 * result.psy;
  return result;
}

UniversalPerturbation pgd_step(const UniversalPerturbation& p,
                               std::span<const double> grad_delta,
                               const AttackConfig& config) {
  check_gradient(grad_delta, p.length());
  UniversalPerturbation next = p;
  for (std::size_t i = 0; i < next.delta.size(); ++i) {
    const double g = grad_delta[i];
    const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
    next.delta[i] -= config.step_size * sign;
  }
  project_linf_inplace(&next);
  return next;
}

MomentState make_moment_state(std::size_t length) {
  MomentState state;
  state.first.assign(length, 0.0);
  state.second.assign(length, 0.0);
  state.step = 0;
  return state;
}

UniversalPerturbation adaptive_step(const UniversalPerturbation& p,
                                    std::span<const double> grad_delta,
                                    MomentState* moments,
                                    const AttackConfig& config) {
  check_gradient(grad_delta, p.length());
  if (moments == nullptr || moments->first.size() != p.length()) {
    throw Error("moment state does not match perturbation length");
  }
  moments->step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(moments->step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(moments->step));

  UniversalPerturbation next = p;
  for (std::size_t i = 0; i < next.delta.size(); ++i) {
    const double g = grad_delta[i];
    moments->first[i] = kBeta1 * moments->first[i] + (1.0 - kBeta1) * g;
    moments->second[i] = kBeta2 * moments->second[i] + (1.0 - kBeta2) * g * g;
    const double m_hat = moments->first[i] / bc1;
    const double v_hat = moments->second[i] / bc2;
    next.delta[i] -=
        config.step_size * m_hat / (std::sqrt(v_hat) + kMomentStabilizer);
  }
  project_linf_inplace(&next);
  return next;
}

TrainResult train(std::span<const AudioClip> clips, JointObjective* objective,
                  const AttackConfig& config) {
  validate_attack_config(config);
  if (objective == nullptr) throw Error("train needs an objective");
  if (clips.empty()) throw Error("training set is empty");

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.perturbation =
      init_perturbation(config.delta_length, config.epsilon,
                        config.sample_rate, rng, config.init_fraction);

  EmaState state = make_ema_state(
      std::max<std::size_t>(objective->ensemble_size(), 1),
      config.ema_momentum, config.ema_eps_var);
  MomentState moments = make_moment_state(config.delta_length);

  std::vector<std::size_t> order(clips.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // forces a shuffle on first use

  std::vector<AudioClip> batch;
  batch.reserve(config.batch_size);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    try {
      batch.clear();
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        batch.push_back(clips[order[cursor++]]);
      }

      const TotalLossResult loss = objective->total_loss(
          batch, result.perturbation, config, state);
      state = loss.state;

      result.perturbation =
          config.solver == Solver::kPgdSign
              ? pgd_step(result.perturbation, loss.grad_delta, config)
              : adaptive_step(result.perturbation, loss.grad_delta, &moments,
                              config);

      const double linf = result.perturbation.linf_norm();
      if (!(linf <= config.epsilon)) {
        throw Error("budget invariant violated: ||delta||_inf = " +
                    format_g17(linf));
      }
      result.trace.records.push_back({it, loss.asr, loss.sr, loss.psy,
                                      loss.total, linf});
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace duap
