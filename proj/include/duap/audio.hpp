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

#ifndef DUAP_AUDIO_HPP_
#define DUAP_AUDIO_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace duap {

// Mono waveform with samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string id;
  std::string transcript;   // reference text, may be empty
  std::string speaker_id;   // may be empty
};

// Magnitude spectrogram, row-major frames x bins with bins = frame/2 + 1.
struct Spectrogram {
  std::vector<double> magnitudes;
  std::size_t frames = 0;
  std::size_t bins = 0;
  int frame_length = 0;
  int hop_length = 0;
  int sample_rate = 0;

  double at(std::size_t t, std::size_t f) const {
    return magnitudes[t * bins + f];
  }
};

struct ManifestEntry {
  std::string path;
  std::string transcript;
  std::string speaker_id;
};

// One record per audio file: path<TAB>transcript<TAB>speaker_id.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string base_dir;  // directory of the manifest file; relative paths resolve against it
};

// Reads a 16-bit PCM RIFF WAV. Multichannel input keeps channel 0 and
// records a warning. When target_rate is nonzero and differs from the file
// rate, the signal is resampled with a windowed-sinc kernel.
AudioClip load_wav(const std::string& path, int target_rate = 0,
                   std::vector<std::string>* warnings = nullptr);

// Writes clip.samples as 16-bit PCM mono. Reloading reproduces the samples
// within one int16 quantization step (1/32768).
void save_wav(const AudioClip& clip, const std::string& path);

// Windowed-sinc resampler. Output values are clamped to [-1, 1].
std::vector<double> resample(std::span<const double> x, int src_rate,
                             int dst_rate);

// Periodic Hann window, w[n] = 0.5 - 0.5*cos(2*pi*n/n_size).
std::vector<double> hann_window(int n_size);

// Maps padded-signal position (offset -half .. n+half-1 relative to the
// signal start) into [0, n) by single reflection at each boundary.
// Callers guarantee n > half (enforced by the STFT length check).
std::size_t mirror_index(long long pos, std::size_t n);

// Number of STFT frames for a length-n signal: n / hop + 1.
std::size_t stft_frame_count(std::size_t n, int hop_length);

// Complex STFT of the reflect-padded signal: Hann-windowed frames of
// frame_length samples every hop_length, DFT bins 0..frame/2 kept,
// row-major frames x (frame/2 + 1). The signal must be at least
// frame_length/2 + 1 samples so the reflection padding is well defined.
std::vector<std::complex<double>> stft_complex(std::span<const double> x,
                                               int frame_length,
                                               int hop_length);

Spectrogram stft(std::span<const double> x, int sample_rate, int frame_length,
                 int hop_length);
Spectrogram stft(const AudioClip& clip, int frame_length, int hop_length);

DatasetManifest read_manifest(const std::string& path);

// Resolves a manifest entry path against the manifest directory.
std::string resolve_manifest_path(const DatasetManifest& manifest,
                                  const ManifestEntry& entry);

struct TfMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, widened from float32
};

// Binary time-frequency matrix container shared by spectrogram and
// threshold dumps: magic "DUAPTF1", uint32 rows, uint32 cols, then
// rows*cols float32 values row-major, little-endian.
void save_tf_matrix(const std::string& path, std::size_t rows,
                    std::size_t cols, std::span<const double> values);
TfMatrix load_tf_matrix(const std::string& path);

}  // namespace duap

#endif  // DUAP_AUDIO_HPP_
