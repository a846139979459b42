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

#include "duap/asr_objective.hpp"

#include "duap/common.hpp"

namespace duap {

AsrLossResult asr_loss(const AsrSurrogate& surrogate,
                       std::span<const AudioClip> clips,
                       const UniversalPerturbation& p,
                       const AsrTarget& target) {
  if (clips.empty()) throw Error("asr loss over an empty batch");

  AsrLossResult result;
  result.grad_delta.assign(p.length(), 0.0);
  for (const AudioClip& clip : clips) {
    try {
      const AudioClip adv = apply(p, clip);
      std::vector<double> grad_audio;
      result.loss += surrogate.target_loss(adv.samples, target.text,
                                           &grad_audio);
      const std::vector<double> folded = fold_gradient(p, clip, grad_audio);
      for (std::size_t i = 0; i < folded.size(); ++i) {
        result.grad_delta[i] += folded[i];
      }
    } catch (const Error& e) {
      throw Error("clip '" + clip.id + "': " + e.what());
    }
  }
  const auto batch = static_cast<double>(clips.size());
  result.loss /= batch;
  for (double& g : result.grad_delta) g /= batch;
  return result;
}

}  // namespace duap
