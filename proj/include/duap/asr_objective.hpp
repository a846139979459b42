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

#ifndef DUAP_ASR_OBJECTIVE_HPP_
#define DUAP_ASR_OBJECTIVE_HPP_

#include <span>
#include <string>
#include <vector>

#include "duap/audio.hpp"
#include "duap/perturbation.hpp"
#include "duap/surrogates.hpp"

namespace duap {

// Transcription the perturbation should force on every clip.
struct AsrTarget {
  std::string text;
};

struct AsrLossResult {
  double loss = 0.0;
  std::vector<double> grad_delta;  // length L
};

// Batch-mean target cross-entropy of the perturbed clips, with the
// gradient folded back onto the perturbation (tile positions summed,
// clamped samples masked).
AsrLossResult asr_loss(const AsrSurrogate& surrogate,
                       std::span<const AudioClip> clips,
                       const UniversalPerturbation& p, const AsrTarget& target);

}  // namespace duap

#endif  // DUAP_ASR_OBJECTIVE_HPP_
