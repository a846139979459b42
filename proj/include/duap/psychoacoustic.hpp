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

#ifndef DUAP_PSYCHOACOUSTIC_HPP_
#define DUAP_PSYCHOACOUSTIC_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "duap/audio.hpp"
#include "duap/perturbation.hpp"

namespace duap {

// Per-bin masking threshold of a clean clip, as linear STFT magnitudes.
// Shape and parameters mirror the Spectrogram of the same clip.
struct MaskingThreshold {
  std::vector<double> thresholds;  // row-major [frames x bins]
  std::size_t frames = 0;
  std::size_t bins = 0;
  int frame_length = 0;
  int hop_length = 0;
  std::uint32_t sample_rate = 0;

  double at(std::size_t t, std::size_t f) const {
    return thresholds[t * bins + f];
  }
};

// Bark index of a frequency: 13 atan(0.00076 f) + 3.5 atan((f/7500)^2).
double bark_scale(double freq_hz);

// Absolute threshold of hearing in dB SPL, clamped below at -20 dB.
// Frequencies under 20 Hz evaluate at 20 Hz so the DC bin stays finite.
double ath_db(double freq_hz);

// Magnitude of a full-scale bin-centered sine under the Hann window;
// anchors the 96 dB SPL reference.
double magnitude_reference(int frame_length);

double magnitude_to_db(double magnitude, double reference);
double db_to_magnitude(double db, double reference);

// Tonal masker bins of one frame's PSD: strict local maxima (left
// neighbor strictly below, right neighbor not above) that also stand at
// least 7 dB over the bins two away, where those exist.
std::vector<std::size_t> find_tonal_maskers(std::span<const double> psd_db);

// Individual masking contribution of one masker at another bin: the
// masker level shifted by -6.025 - 0.275 z_m and decayed at 27 dB/Bark
// below the masker, 10 dB/Bark above it.
double masker_threshold_db(double masker_bark, double masker_level_db,
                           double bin_bark);

// Threshold per frame: tonal maskers spread and power-summed, floored at
// the absolute threshold of hearing, converted back to linear magnitude.
MaskingThreshold masking_threshold(const AudioClip& clean, int frame_length,
                                   int hop_length);

struct PsyLossResult {
  double loss = 0.0;
  std::vector<double> grad_delta;  // length L
};

// Hinge penalty on the tiled perturbation's STFT magnitude: sum over all
// (t, f) of max(0, |X_delta| - T). The gradient flows through active
// bins only and folds over tile positions.
PsyLossResult psy_loss(const AudioClip& clean, const UniversalPerturbation& p,
                       const MaskingThreshold& threshold);

// Writes T(t,f) with the shared time-frequency matrix container.
void save_threshold(const MaskingThreshold& threshold,
                    const std::string& path);

}  // namespace duap

#endif  // DUAP_PSYCHOACOUSTIC_HPP_
