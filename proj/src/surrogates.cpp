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

#include "duap/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "duap/common.hpp"

namespace duap {

namespace {

constexpr double kEnergyFloor = 1e-6;
constexpr double kNormFloor = 1e-12;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> random_matrix(std::uint64_t seed, std::size_t rows,
                                  std::size_t cols, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> m(rows * cols);
  for (auto& v : m) v = dist(rng);
  return m;
}

}  // namespace

FilterbankFeatures::FilterbankFeatures(std::size_t frame_length,
                                       std::size_t n_filters,
                                       std::uint32_t sample_rate)
    : frame_length_(frame_length),
      n_bins_(frame_length / 2 + 1),
      n_filters_(n_filters),
      fft_(frame_length) {
  if (n_filters == 0) throw Error("filterbank needs at least one filter");
  weights_.assign(n_filters_ * n_bins_, 0.0);

  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(n_filters_ + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) /
                         static_cast<double>(n_filters_ + 1));
  }

  const double bin_hz = static_cast<double>(sample_rate) /
                        static_cast<double>(frame_length_);
  for (std::size_t m = 0; m < n_filters_; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < n_bins_; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < mid) {
        w = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      if (w > 0.0) any = true;
      weights_[m * n_bins_ + k] = w;
    }
    // Narrow triangles can fall between bins at coarse resolutions; pin
    // such filters to their nearest bin so no feature goes dead.
    if (!any) {
      const auto k = static_cast<std::size_t>(std::min(
          static_cast<double>(n_bins_ - 1), std::round(mid / bin_hz)));
      weights_[m * n_bins_ + k] = 1.0;
    }
  }
}

std::vector<double> FilterbankFeatures::compute(
    std::span<const double> audio) const {
  const std::size_t frames = frame_count(audio.size());
  if (frames == 0) {
    throw Error("audio shorter than one analysis frame (" +
                std::to_string(frame_length_) + " samples)");
  }
  std::vector<double> features(frames * n_filters_);
  std::vector<std::complex<double>> buf(frame_length_);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < frame_length_; ++n) {
      buf[n] = audio[t * frame_length_ + n];
    }
    fft_.forward(&buf);
    for (std::size_t m = 0; m < n_filters_; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k < n_bins_; ++k) {
        energy += weights_[m * n_bins_ + k] * std::norm(buf[k]);
      }
      features[t * n_filters_ + m] = std::log(energy + kEnergyFloor);
    }
  }
  return features;
}

std::vector<double> FilterbankFeatures::backward(
    std::span<const double> audio,
    std::span<const double> grad_features) const {
  const std::size_t frames = frame_count(audio.size());
  if (frames == 0) {
    throw Error("audio shorter than one analysis frame (" +
                std::to_string(frame_length_) + " samples)");
  }
  if (grad_features.size() != frames * n_filters_) {
    throw Error("feature gradient shape mismatch");
  }
  std::vector<double> grad_audio(audio.size(), 0.0);
  std::vector<std::complex<double>> buf(frame_length_);
  std::vector<std::complex<double>> cot(frame_length_);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < frame_length_; ++n) {
      buf[n] = audio[t * frame_length_ + n];
    }
    fft_.forward(&buf);
    std::vector<double> grad_energy(n_filters_);
    for (std::size_t m = 0; m < n_filters_; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k < n_bins_; ++k) {
        energy += weights_[m * n_bins_ + k] * std::norm(buf[k]);
      }
      grad_energy[m] =
          grad_features[t * n_filters_ + m] / (energy + kEnergyFloor);
    }
    std::fill(cot.begin(), cot.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t k = 0; k < n_bins_; ++k) {
      double w = 0.0;
      for (std::size_t m = 0; m < n_filters_; ++m) {
        w += grad_energy[m] * weights_[m * n_bins_ + k];
      }
      cot[k] = 2.0 * w * buf[k];
    }
    // d|X_k|^2 / dx_n = 2 Re(X_k e^{+2 pi i k n / N}), so the per-frame
    // gradient is the real part of an unnormalized inverse transform.
    fft_.inverse(&cot);
    for (std::size_t n = 0; n < frame_length_; ++n) {
      grad_audio[t * frame_length_ + n] = cot[n].real();
    }
  }
  return grad_audio;
}

ToyAsr::ToyAsr(std::uint64_t seed, std::size_t frame_length,
               std::size_t n_filters, std::string vocabulary,
               std::string name)
    : name_(name.empty() ? "toy-asr-" + std::to_string(seed)
                         : std::move(name)),
      vocabulary_(std::move(vocabulary)),
      features_(frame_length, n_filters),
      projection_(
          random_matrix(seed, vocabulary_.size(), n_filters, 0.1)) {
  if (vocabulary_.empty()) throw Error("vocabulary is empty");
}

ToyAsr::ToyAsr(std::vector<double> projection, std::size_t frame_length,
               std::size_t n_filters, std::string vocabulary,
               std::string name)
    : name_(std::move(name)),
      vocabulary_(std::move(vocabulary)),
      features_(frame_length, n_filters),
      projection_(std::move(projection)) {
  if (vocabulary_.empty()) throw Error("vocabulary is empty");
  if (projection_.size() != vocabulary_.size() * n_filters) {
    throw Error("projection shape mismatch");
  }
}

std::vector<double> ToyAsr::frame_logits(std::span<const double> features,
                                         std::size_t frame) const {
  const std::size_t nf = features_.n_filters();
  std::vector<double> logits(vocabulary_.size(), 0.0);
  for (std::size_t v = 0; v < vocabulary_.size(); ++v) {
    double z = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      z += projection_[v * nf + f] * features[frame * nf + f];
    }
    logits[v] = z;
  }
  return logits;
}

double ToyAsr::target_loss(std::span<const double> audio,
                           const std::string& target_text,
                           std::vector<double>* grad_audio) const {
  if (target_text.empty()) {
    throw Error("target transcription is empty");
  }
  std::vector<std::size_t> target_idx(target_text.size());
  for (std::size_t i = 0; i < target_text.size(); ++i) {
    const auto pos = vocabulary_.find(target_text[i]);
    if (pos == std::string::npos) {
      throw Error(std::string("target contains character outside "
                              "vocabulary: '") +
                  target_text[i] + "'");
    }
    target_idx[i] = pos;
  }

  const std::vector<double> features = features_.compute(audio);
  const std::size_t frames = features_.frame_count(audio.size());
  const std::size_t nf = features_.n_filters();
  const std::size_t vocab = vocabulary_.size();

  double loss = 0.0;
  std::vector<double> grad_features;
  if (grad_audio != nullptr) grad_features.assign(frames * nf, 0.0);

  for (std::size_t t = 0; t < frames; ++t) {
    const std::vector<double> logits = frame_logits(features, t);
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - zmax);
    const double log_denom = std::log(denom);

    const std::size_t c = target_idx[t * target_text.size() / frames];
    loss += log_denom - (logits[c] - zmax);

    if (grad_audio != nullptr) {
      for (std::size_t v = 0; v < vocab; ++v) {
        const double p = std::exp(logits[v] - zmax) / denom;
        const double gz =
            (p - (v == c ? 1.0 : 0.0)) / static_cast<double>(frames);
        for (std::size_t f = 0; f < nf; ++f) {
          grad_features[t * nf + f] += gz * projection_[v * nf + f];
        }
      }
    }
  }
  loss /= static_cast<double>(frames);

  if (grad_audio != nullptr) {
    *grad_audio = features_.backward(audio, grad_features);
  }
  return loss;
}

std::string ToyAsr::transcribe(std::span<const double> audio) const {
  const std::vector<double> features = features_.compute(audio);
  const std::size_t frames = features_.frame_count(audio.size());
  std::string out;
  char prev = '\0';
  for (std::size_t t = 0; t < frames; ++t) {
    const std::vector<double> logits = frame_logits(features, t);
    const auto best = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    const char c = vocabulary_[best];
    if (c != prev) out.push_back(c);
    prev = c;
  }
  return out;
}

ToyEmbedder::ToyEmbedder(std::uint64_t seed, std::size_t embedding_dim,
                         std::size_t frame_length, std::size_t n_filters,
                         std::string name)
    : name_(name.empty() ? "toy-embedder-" + std::to_string(seed)
                         : std::move(name)),
      embedding_dim_(embedding_dim),
      features_(frame_length, n_filters),
      projection_(random_matrix(seed, embedding_dim, n_filters, 0.05)) {
  if (embedding_dim == 0) throw Error("embedding dimension must be positive");
}

ToyEmbedder::Forward ToyEmbedder::run_forward(
    std::span<const double> audio) const {
  Forward fw;
  const std::vector<double> features = features_.compute(audio);
  fw.n_frames = features_.frame_count(audio.size());
  const std::size_t nf = features_.n_filters();

  fw.mean_features.assign(nf, 0.0);
  for (std::size_t t = 0; t < fw.n_frames; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      fw.mean_features[f] += features[t * nf + f];
    }
  }
  for (double& v : fw.mean_features) v /= static_cast<double>(fw.n_frames);

  fw.pre_activation.assign(embedding_dim_, 0.0);
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    double u = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      u += projection_[d * nf + f] * fw.mean_features[f];
    }
    fw.pre_activation[d] = u;
  }

  fw.activation.resize(embedding_dim_);
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    fw.activation[d] = std::tanh(fw.pre_activation[d]);
  }

  double norm_sq = 0.0;
  for (double v : fw.activation) norm_sq += v * v;
  double norm = std::sqrt(norm_sq);
  if (norm < kNormFloor) {
    // All-zero activations only arise for pathological inputs; nudge one
    // coordinate so the embedding stays well defined.
    fw.activation[0] += kNormFloor;
    norm_sq = 0.0;
    for (double v : fw.activation) norm_sq += v * v;
    norm = std::sqrt(norm_sq);
  }
  fw.activation_norm = norm;

  fw.embedding.resize(embedding_dim_);
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    fw.embedding[d] = fw.activation[d] / norm;
  }
  return fw;
}

std::vector<double> ToyEmbedder::embed(std::span<const double> audio) const {
  return run_forward(audio).embedding;
}

std::vector<double> ToyEmbedder::embed_backward(
    std::span<const double> audio,
    std::span<const double> grad_embedding) const {
  if (grad_embedding.size() != embedding_dim_) {
    throw Error("embedding gradient shape mismatch");
  }
  const Forward fw = run_forward(audio);
  const std::size_t nf = features_.n_filters();

  double dot = 0.0;
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    dot += grad_embedding[d] * fw.embedding[d];
  }
  std::vector<double> grad_act(embedding_dim_);
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    grad_act[d] =
        (grad_embedding[d] - dot * fw.embedding[d]) / fw.activation_norm;
  }
  std::vector<double> grad_pre(embedding_dim_);
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    const double th = fw.activation[d];
    grad_pre[d] = grad_act[d] * (1.0 - th * th);
  }
  std::vector<double> grad_mean(nf, 0.0);
  for (std::size_t d = 0; d < embedding_dim_; ++d) {
    for (std::size_t f = 0; f < nf; ++f) {
      grad_mean[f] += projection_[d * nf + f] * grad_pre[d];
    }
  }
  std::vector<double> grad_features(fw.n_frames * nf);
  for (std::size_t t = 0; t < fw.n_frames; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      grad_features[t * nf + f] =
          grad_mean[f] / static_cast<double>(fw.n_frames);
    }
  }
  return features_.backward(audio, grad_features);
}

SurrogateRegistry SurrogateRegistry::with_builtins() {
  SurrogateRegistry reg;
  reg.register_asr("toy-asr", [] {
    return std::make_shared<ToyAsr>(7, 256, 16,
                                    "abcdefghijklmnopqrstuvwxyz ", "toy-asr");
  });
  reg.register_embedder("toy-embedder-a", [] {
    return std::make_shared<ToyEmbedder>(101, 16, 256, 16, "toy-embedder-a");
  });
  reg.register_embedder("toy-embedder-b", [] {
    return std::make_shared<ToyEmbedder>(202, 16, 256, 16, "toy-embedder-b");
  });
  reg.register_embedder("toy-embedder-c", [] {
    return std::make_shared<ToyEmbedder>(303, 16, 256, 16, "toy-embedder-c");
  });
  return reg;
}

void SurrogateRegistry::register_asr(const std::string& name,
                                     AsrFactory factory) {
  if (!asr_factories_.emplace(name, std::move(factory)).second) {
    throw Error("asr surrogate already registered: " + name);
  }
}

void SurrogateRegistry::register_embedder(const std::string& name,
                                          EmbedderFactory factory) {
  if (!embedder_factories_.emplace(name, std::move(factory)).second) {
    throw Error("speaker embedder already registered: " + name);
  }
}

namespace {

std::string joined_keys(const std::vector<std::string>& names) {
  std::ostringstream os;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) os << ", ";
    os << names[i];
  }
  return os.str();
}

}  // namespace

std::shared_ptr<AsrSurrogate> SurrogateRegistry::make_asr(
    const std::string& name) const {
  const auto it = asr_factories_.find(name);
  if (it == asr_factories_.end()) {
    throw Error("unknown asr surrogate: " + name +
                " (known: " + joined_keys(asr_names()) + ")");
  }
  return it->second();
}

std::shared_ptr<SpeakerEmbedder> SurrogateRegistry::make_embedder(
    const std::string& name) const {
  const auto it = embedder_factories_.find(name);
  if (it == embedder_factories_.end()) {
    throw Error("unknown speaker embedder: " + name +
                " (known: " + joined_keys(embedder_names()) + ")");
  }
  return it->second();
}

std::vector<std::string> SurrogateRegistry::asr_names() const {
  std::vector<std::string> names;
  names.reserve(asr_factories_.size());
  for (const auto& [name, _] : asr_factories_) names.push_back(name);
  return names;
}

std::vector<std::string> SurrogateRegistry::embedder_names() const {
  std::vector<std::string> names;
  names.reserve(embedder_factories_.size());
  for (const auto& [name, _] : embedder_factories_) names.push_back(name);
  return names;
}

}  // namespace duap
