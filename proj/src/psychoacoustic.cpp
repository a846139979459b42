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

#include "duap/psychoacoustic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "duap/common.hpp"
#include "duap/fft.hpp"

namespace duap {

namespace {

constexpr double kSplReferenceDb = 96.0;
constexpr double kAthFloorDb = -20.0;
constexpr double kMinAthFreqHz = 20.0;
constexpr double kTonalMarginDb = 7.0;
// Zero-magnitude bins map to a PSD far below every masking curve.
constexpr double kMagnitudeFloor = 1e-20;

}  // namespace

double bark_scale(double freq_hz) {
  return 13.0 * std::atan(0.00076 * freq_hz) +
         3.5 * std::atan((freq_hz / 7500.0) * (freq_hz / 7500.0));
}

double ath_db(double freq_hz) {
  const double f = std::max(freq_hz, kMinAthFreqHz) / 1000.0;
  const double v = 3.64 * std::pow(f, -0.8) -
                   6.5 * std::exp(-0.6 * (f - 3.3) * (f - 3.3)) +
                   1e-3 * f * f * f * f;
  return std::max(v, kAthFloorDb);
}

double magnitude_reference(int frame_length) {
  // A full-scale sine centered on a bin contributes amplitude/2 at that
  // bin; the Hann window halves it again: N/2 * 1/2.
  return static_cast<double>(frame_length) / 4.0;
}

double magnitude_to_db(double magnitude, double reference) {
  return kSplReferenceDb +
         20.0 * std::log10(std::max(magnitude, kMagnitudeFloor) / reference);
}

double db_to_magnitude(double db, double reference) {
  return reference * std::pow(10.0, (db - kSplReferenceDb) / 20.0);
}

std::vector<std::size_t> find_tonal_maskers(
    std::span<const double> psd_db) {
  std::vector<std::size_t> maskers;
  if (psd_db.size() < 3) return maskers;
  for (std::size_t k = 1; k + 1 < psd_db.size(); ++k) {
    if (!(psd_db[k] > psd_db[k - 1] && psd_db[k] >= psd_db[k + 1])) {
      continue;
    }
    if (k >= 2 && psd_db[k] < psd_db[k - 2] + kTonalMarginDb) continue;
    if (k + 2 < psd_db.size() && psd_db[k] < psd_db[k + 2] + kTonalMarginDb) {
      continue;
    }
    maskers.push_back(k);
  }
  return maskers;
}

double masker_threshold_db(double masker_bark, double masker_level_db,
                           double bin_bark) {
  const double dz = bin_bark - masker_bark;
  const double slope = dz < 0.0 ? 27.0 * dz : -10.0 * dz;
  return masker_level_db - 6.025 - 0.275 * masker_bark + slope;
}

MaskingThreshold masking_threshold(const AudioClip& clean, int frame_length,
                                   int hop_length) {
  const Spectrogram spec = stft(clean, frame_length, hop_length);

  MaskingThreshold out;
  out.frames = spec.frames;
  out.bins = spec.bins;
  out.frame_length = frame_length;
  out.hop_length = hop_length;
  out.sample_rate = clean.sample_rate;
  out.thresholds.resize(spec.frames * spec.bins);

  const double m_ref = magnitude_reference(frame_length);
  std::vector<double> bin_bark(spec.bins);
  std::vector<double> bin_ath(spec.bins);
  for (std::size_t f = 0; f < spec.bins; ++f) {
    const double freq = static_cast<double>(f) * clean.sample_rate /
                        static_cast<double>(frame_length);
    bin_bark[f] = bark_scale(freq);
    bin_ath[f] = ath_db(freq);
  }

  std::vector<double> psd(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t f = 0; f < spec.bins; ++f) {
      psd[f] = magnitude_to_db(spec.at(t, f), m_ref);
    }
    const std::vector<std::size_t> maskers = find_tonal_maskers(psd);
    for (std::size_t f = 0; f < spec.bins; ++f) {
      double power = 0.0;
      for (const std::size_t m : maskers) {
        const double th =
            masker_threshold_db(bin_bark[m], psd[m], bin_bark[f]);
        power += std::pow(10.0, th / 10.0);
      }
      double db = bin_ath[f];
      if (power > 0.0) {
        db = std::max(db, 10.0 * std::log10(power));
      }
      out.thresholds[t * spec.bins + f] = db_to_magnitude(db, m_ref);
    }
  }
  return out;
}

PsyLossResult psy_loss(const AudioClip& clean, const UniversalPerturbation& p,
                       const MaskingThreshold& threshold) {
  if (p.sample_rate != static_cast<int>(clean.sample_rate)) {
    throw Error("perturbation sample rate does not match clip");
  }
  if (threshold.sample_rate != clean.sample_rate) {
    throw Error("threshold sample rate does not match clip");
  }
  const std::size_t n = clean.samples.size();
  const int frame = threshold.frame_length;
  const int hop = threshold.hop_length;
  const std::size_t frames = stft_frame_count(n, hop);
  const std::size_t bins = static_cast<std::size_t>(frame) / 2 + 1;
  if (frames != threshold.frames || bins != threshold.bins) {
    throw Error("threshold shape does not match the clip's spectrogram");
  }

  const std::vector<double> tiled = tiled_delta(p, n);
  const std::vector<std::complex<double>> spec =
      stft_complex(tiled, frame, hop);

  PsyLossResult result;
  result.grad_delta.assign(p.length(), 0.0);

  const std::vector<double> win = hann_window(frame);
  const Fft fft(static_cast<std::size_t>(frame));
  const int half = frame / 2;
  std::vector<double> grad_tiled(n, 0.0);
  std::vector<std::complex<double>> cot(frame);

  for (std::size_t t = 0; t < frames; ++t) {
    bool any_active = false;
    std::fill(cot.begin(), cot.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t f = 0; f < bins; ++f) {
      const std::complex<double> v = spec[t * bins + f];
      const double mag = std::abs(v);
      const double excess = mag - threshold.at(t, f);
      if (excess > 0.0) {
        result.loss += excess;
        cot[f] = v / mag;
        any_active = true;
      }
    }
    if (!any_active) continue;
    // d|X_f|/du_n = Re(X_f e^{+2 pi i f n / N}) / |X_f| over the kept
    // bins, which is the real part of an unnormalized inverse transform.
    fft.inverse(&cot);
    const long long start = static_cast<long long>(t) * hop - half;
    for (int i = 0; i < frame; ++i) {
      grad_tiled[mirror_index(start + i, n)] += win[i] * cot[i].real();
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    result.grad_delta[i % p.length()] += grad_tiled[i];
  }
  return result;
}

void save_threshold(const MaskingThreshold& threshold,
                    const std::string& path) {
  save_tf_matrix(path, threshold.frames, threshold.bins,
                 threshold.thresholds);
}

}  // namespace duap
