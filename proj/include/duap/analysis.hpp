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

#ifndef DUAP_ANALYSIS_HPP_
#define DUAP_ANALYSIS_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "duap/asr_objective.hpp"
#include "duap/audio.hpp"
#include "duap/optimizer.hpp"
#include "duap/perturbation.hpp"
#include "duap/sr_objective.hpp"
#include "duap/surrogates.hpp"

namespace duap {

inline constexpr std::size_t kCosineHistogramBins = 50;

struct CosineSample {
  std::size_t iteration = 0;
  double cosine = 0.0;
  bool degenerate = false;
};

// dot(u, v) / (|u| |v|); a pair with an exactly-zero vector is defined
// as 0 and flagged through `degenerate` when given.
double cosine(std::span<const double> u, std::span<const double> v,
              bool* degenerate = nullptr);

struct GradientStudy {
  std::vector<CosineSample> samples;
  double mean = 0.0;     // over non-degenerate samples
  double std_dev = 0.0;  // population deviation over the same
  std::size_t degenerate = 0;
  std::array<std::size_t, kCosineHistogramBins> histogram{};  // over [-1, 1]
};

// Maps a batch and a perturbation to a gradient of length L.
using GradientFn = std::function<std::vector<double>(
    std::span<const AudioClip>, const UniversalPerturbation&)>;

// Cosine distribution between two gradient fields at n_samples random
// states: each sample draws a fresh perturbation uniform in the epsilon
// ball and a fresh batch. Degenerate samples land in the histogram but
// stay out of mean and deviation.
GradientStudy gradient_study(const GradientFn& grad_a, const GradientFn& grad_b,
                             std::span<const AudioClip> clips,
                             const AttackConfig& config,
                             std::size_t n_samples);

// The study instantiated for the attack's two task gradients: the
// transcription loss gradient against the ensemble speaker loss gradient
// (fresh statistics per sample; the statistics scale does not move the
// cosine).
GradientStudy attack_gradient_study(
    const AsrSurrogate& asr, const AsrTarget& asr_target,
    std::span<const std::shared_ptr<SpeakerEmbedder>> embedders,
    const PrototypeTable& table, const SrTarget& sr_target,
    std::span<const AudioClip> clips, const AttackConfig& config,
    std::size_t n_samples);

// One row per sample: iteration, cosine, degenerate flag.
void write_cosine_samples(const GradientStudy& study, const std::string& path);

// Histogram table with the summary as leading comment lines.
void write_cosine_histogram(const GradientStudy& study,
                            const std::string& path);

}  // namespace duap

#endif  // DUAP_ANALYSIS_HPP_
