// Copyright 2026 The Duap Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DUAP_PERTURBATION_HPP_
#define DUAP_PERTURBATION_HPP_

#include <random>
#include <span>
#include <string>
#include <vector>

#include "duap/audio.hpp"

namespace duap {

// Fixed-length universal perturbation with its l-inf budget. The vector is
// tiled and truncated onto clips of any length when applied.
struct UniversalPerturbation {
  std::vector<double> delta;
  double epsilon = 0.0;
  int sample_rate = 0;

  std::size_t length() const { return delta.size(); }
  double linf_norm() const;
};

// Uniform init in [-epsilon * init_fraction, +epsilon * init_fraction].
UniversalPerturbation init_perturbation(std::size_t length, double epsilon,
                                        int sample_rate, std::mt19937_64& rng,
                                        double init_fraction = 0.1);

// x_adv[i] = clamp(x[i] + delta[i mod L], -1, 1). Length preserving.
AudioClip apply(const UniversalPerturbation& p, const AudioClip& clip);

// The tiled perturbation before the [-1, 1] clamp, at clip length.
std::vector<double> tiled_delta(const UniversalPerturbation& p,
                                std::size_t clip_length);

// Clamps every component to [-epsilon, +epsilon]. Idempotent.
UniversalPerturbation project_linf(const UniversalPerturbation& p);
void project_linf_inplace(UniversalPerturbation* p);

// Folds a gradient w.r.t. the perturbed audio back onto delta: tile
// positions sum, and samples pinned by the [-1, 1] clamp contribute zero.
std::vector<double> fold_gradient(const UniversalPerturbation& p,
                                  const AudioClip& clip,
                                  std::span<const double> grad_audio);

// Binary container: magic "DUAP1", uint32 sample_rate, uint32 L,
// float64 epsilon, then L float64 samples, all little-endian.
void save_perturbation(const UniversalPerturbation& p, const std::string& path);
UniversalPerturbation load_perturbation(const std::string& path);

}  // namespace duap

#endif  // DUAP_PERTURBATION_HPP_
