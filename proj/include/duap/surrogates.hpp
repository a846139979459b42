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

#ifndef DUAP_SURROGATES_HPP_
#define DUAP_SURROGATES_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "duap/fft.hpp"

namespace duap {

// Differentiable stand-in for an ASR system. Implementations expose the
// loss of forcing a target transcription on a waveform, together with the
// gradient of that loss with respect to the samples.
class AsrSurrogate {
 public:
  virtual ~AsrSurrogate() = default;

  virtual const std::string& name() const = 0;
  virtual const std::string& vocabulary() const = 0;

  // Cross-entropy of `target_text` on `audio`. When `grad_audio` is
  // non-null it is resized to audio.size() and filled with d loss / d x.
  virtual double target_loss(std::span<const double> audio,
                             const std::string& target_text,
                             std::vector<double>* grad_audio) const = 0;

  // Greedy decode of the model's own output, used by the evaluation
  // harness as the reference transcriber.
  virtual std::string transcribe(std::span<const double> audio) const = 0;
};

// Differentiable stand-in for a speaker verification embedder. Produces a
// unit-norm embedding and supports vector-Jacobian products against it.
class SpeakerEmbedder {
 public:
  virtual ~SpeakerEmbedder() = default;

  virtual const std::string& name() const = 0;
  virtual std::size_t embedding_dim() const = 0;

  virtual std::vector<double> embed(std::span<const double> audio) const = 0;

  // Returns d(grad_embedding . embed(audio)) / d audio.
  virtual std::vector<double> embed_backward(
      std::span<const double> audio,
      std::span<const double> grad_embedding) const = 0;
};

// Log filterbank energies over non-overlapping rectangular frames. Shared
// front end of the toy models; kept deliberately small so that analytic
// gradients stay cheap to verify.
class FilterbankFeatures {
 public:
  // `frame_length` must be a power of two. Filters are triangles spaced
  // on a mel-warped axis up to the Nyquist of `sample_rate`.
  FilterbankFeatures(std::size_t frame_length, std::size_t n_filters,
                     std::uint32_t sample_rate = 16000);

  std::size_t frame_length() const { return frame_length_; }
  std::size_t n_filters() const { return n_filters_; }

  // Number of complete frames in a clip; audio shorter than one frame is
  // rejected by compute().
  std::size_t frame_count(std::size_t n_samples) const {
    return n_samples / frame_length_;
  }

  // Row-major [frames x n_filters] matrix of log(filter energy + floor).
  std::vector<double> compute(std::span<const double> audio) const;

  // Adjoint of compute(): maps d loss / d features (same layout as the
  // compute() result) back to d loss / d audio. Samples beyond the last
  // complete frame get zero gradient.
  std::vector<double> backward(std::span<const double> audio,
                               std::span<const double> grad_features) const;

  double filter_weight(std::size_t filter, std::size_t bin) const {
    return weights_[filter * n_bins_ + bin];
  }

 private:
  std::size_t frame_length_;
  std::size_t n_bins_;
  std::size_t n_filters_;
  std::vector<double> weights_;  // [n_filters x n_bins]
  Fft fft_;
};

// Linear softmax decoder over log filterbank frames with a fixed random
// projection. Frame t of the audio is aligned to character floor(t * T /
// frames) of the target string.
class ToyAsr : public AsrSurrogate {
 public:
  // An empty `name` becomes "toy-asr-<seed>".
  explicit ToyAsr(std::uint64_t seed, std::size_t frame_length = 256,
                  std::size_t n_filters = 16,
                  std::string vocabulary = "abcdefghijklmnopqrstuvwxyz ",
                  std::string name = "");

  // Uses `projection` ([vocab x n_filters], row major) instead of a random
  // one. Mainly useful for pinning down logits in tests.
  ToyAsr(std::vector<double> projection, std::size_t frame_length,
         std::size_t n_filters, std::string vocabulary, std::string name);

  const std::string& name() const override { return name_; }
  const std::string& vocabulary() const override { return vocabulary_; }

  double target_loss(std::span<const double> audio,
                     const std::string& target_text,
                     std::vector<double>* grad_audio) const override;

  std::string transcribe(std::span<const double> audio) const override;

 private:
  std::vector<double> frame_logits(std::span<const double> features,
                                   std::size_t frame) const;

  std::string name_;
  std::string vocabulary_;
  FilterbankFeatures features_;
  std::vector<double> projection_;  // [vocab x n_filters]
};

// Mean-pooled filterbank statistics pushed through a fixed random linear
// map, tanh, and length normalization.
class ToyEmbedder : public SpeakerEmbedder {
 public:
  // An empty `name` becomes "toy-embedder-<seed>".
  explicit ToyEmbedder(std::uint64_t seed, std::size_t embedding_dim = 16,
                       std::size_t frame_length = 256,
                       std::size_t n_filters = 16, std::string name = "");

  const std::string& name() const override { return name_; }
  std::size_t embedding_dim() const override { return embedding_dim_; }

  std::vector<double> embed(std::span<const double> audio) const override;

  std::vector<double> embed_backward(
      std::span<const double> audio,
      std::span<const double> grad_embedding) const override;

 private:
  struct Forward {
    std::vector<double> mean_features;
    std::vector<double> pre_activation;
    std::vector<double> activation;
    std::vector<double> embedding;
    double activation_norm = 0.0;
    std::size_t n_frames = 0;
  };
  Forward run_forward(std::span<const double> audio) const;

  std::string name_;
  std::size_t embedding_dim_;
  FilterbankFeatures features_;
  std::vector<double> projection_;  // [embedding_dim x n_filters]
};

// Name-keyed factories for surrogate models, preloaded with the builtin
// toys so configs can refer to models by stable names.
class SurrogateRegistry {
 public:
  using AsrFactory = std::function<std::shared_ptr<AsrSurrogate>()>;
  using EmbedderFactory = std::function<std::shared_ptr<SpeakerEmbedder>()>;

  // Registry with "toy-asr" and "toy-embedder-a/b/c" preregistered.
  static SurrogateRegistry with_builtins();

  void register_asr(const std::string& name, AsrFactory factory);
  void register_embedder(const std::string& name, EmbedderFactory factory);

  std::shared_ptr<AsrSurrogate> make_asr(const std::string& name) const;
  std::shared_ptr<SpeakerEmbedder> make_embedder(const std::string& name) const;

  std::vector<std::string> asr_names() const;
  std::vector<std::string> embedder_names() const;

 private:
  std::map<std::string, AsrFactory> asr_factories_;
  std::map<std::string, EmbedderFactory> embedder_factories_;
};

}  // namespace duap

#endif  // DUAP_SURROGATES_HPP_
