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

#include "duap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "duap/common.hpp"

namespace duap {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t histogram_bin(double c) {
  const double unit = (c + 1.0) / 2.0;
  const auto bin = static_cast<long long>(
      std::floor(unit * static_cast<double>(kCosineHistogramBins)));
  return static_cast<std::size_t>(std::clamp<long long>(
      bin, 0, static_cast<long long>(kCosineHistogramBins) - 1));
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v,
              bool* degenerate) {
  if (u.size() != v.size()) {
    throw Error("cosine arguments have different lengths");
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (degenerate != nullptr) *degenerate = false;
  if (nu == 0.0 || nv == 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

GradientStudy gradient_study(const GradientFn& grad_a,
                             const GradientFn& grad_b,
                             std::span<const AudioClip> clips,
                             const AttackConfig& config,
                             std::size_t n_samples) {
  if (n_samples == 0) throw Error("study needs at least one sample");
  if (clips.empty()) throw Error("study needs at least one clip");
  validate_attack_config(config);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> ball(-config.epsilon,
                                              config.epsilon);
  std::vector<std::size_t> order(clips.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  GradientStudy study;
  study.samples.reserve(n_samples);
  double sum = 0.0;
  double sum_sq = 0.0;

  for (std::size_t s = 0; s < n_samples; ++s) {
    UniversalPerturbation p;
    p.epsilon = config.epsilon;
    p.sample_rate = config.sample_rate;
    p.delta.resize(config.delta_length);
    for (double& d : p.delta) d = ball(rng);

    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t take = std::min(config.batch_size, clips.size());
    std::vector<AudioClip> batch;
    batch.reserve(take);
    for (std::size_t i = 0; i < take; ++i) batch.push_back(clips[order[i]]);

    const std::vector<double> ga = grad_a(batch, p);
    const std::vector<double> gb = grad_b(batch, p);
    bool degenerate = false;
    const double c = cosine(ga, gb, &degenerate);

    study.samples.push_back({s, c, degenerate});
    study.histogram[histogram_bin(c)] += 1;
    if (degenerate) {
      study.degenerate += 1;
    } else {
      sum += c;
      sum_sq += c * c;
    }
  }

  const std::size_t used = n_samples - study.degenerate;
  if (used > 0) {
    study.mean = sum / static_cast<double>(used);
    const double var =
        std::max(0.0, sum_sq / static_cast<double>(used) -
                          study.mean * study.mean);
    study.std_dev = std::sqrt(var);
  }
  return study;
}

GradientStudy attack_gradient_study(
    const AsrSurrogate& asr, const AsrTarget& asr_target,
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const SrTarget& sr_target,
    std::span<const AudioClip> clips, const AttackConfig& config,
    std::size_t n_samples) {
  const GradientFn asr_grad =
      [&asr, &asr_target](std::span<const AudioClip> batch,
                          const UniversalPerturbation& p) {
        return asr_loss(asr, batch, p, asr_target).grad_delta;
      };
  const GradientFn sr_grad =
      [embedders, &table, &sr_target, &config](
          std::span<const AudioClip> batch, const UniversalPerturbation& p) {
        EmaState state = make_ema_state(embedders.size(), config.ema_momentum,
                                        config.ema_eps_var);
        return sr_loss(embedders, table, state, batch, p, sr_target)
            .grad_delta;
      };
  return gradient_study(asr_grad, sr_grad, clips, config, n_samples);
}

void write_cosine_samples(const GradientStudy& study,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write cosine samples: " + path);
  out << "# sample\tcosine\tdegenerate\n";
  for (const CosineSample& s : study.samples) {
    out << s.iteration << '\t' << format_g17(s.cosine) << '\t'
        << (s.degenerate ? 1 : 0) << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

void write_cosine_histogram(const GradientStudy& study,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write histogram: " + path);
  out << "# mean = " << format_g17(study.mean) << '\n';
  out << "# std_dev = " << format_g17(study.std_dev) << '\n';
  out << "# samples = " << study.samples.size() << '\n';
  out << "# degenerate = " << study.degenerate << '\n';
  out << "# bin_low\tbin_high\tcount\n";
  for (std::size_t b = 0; b < study.histogram.size(); ++b) {
    const double lo =
        -1.0 + 2.0 * static_cast<double>(b) /
                   static_cast<double>(kCosineHistogramBins);
    const double hi =
        -1.0 + 2.0 * static_cast<double>(b + 1) /
                   static_cast<double>(kCosineHistogramBins);
    out << format_g17(lo) << '\t' << format_g17(hi) << '\t'
        << study.histogram[b] << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace duap
