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

#include "duap/perturbation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "duap/common.hpp"

namespace duap {

namespace {

// The on-disk format is little-endian and written with raw field copies.
static_assert(std::endian::native == std::endian::little);

constexpr char kMagic[5] = {'D', 'U', 'A', 'P', '1'};

void check_valid(const UniversalPerturbation& p) {
  if (p.delta.empty() || p.epsilon <= 0.0 || p.sample_rate <= 0) {
    throw Error("invalid perturbation state");
  }
}

}  // namespace

double UniversalPerturbation::linf_norm() const {
  double m = 0.0;
  for (double d : delta) m = std::max(m, std::abs(d));
  return m;
}

UniversalPerturbation init_perturbation(std::size_t length, double epsilon,
                                        int sample_rate, std::mt19937_64& rng,
                                        double init_fraction) {
  if (length == 0 || epsilon <= 0.0 || sample_rate <= 0) {
    throw Error("invalid perturbation parameters");
  }
  UniversalPerturbation p;
  p.epsilon = epsilon;
  p.sample_rate = sample_rate;
  p.delta.resize(length);
  const double scale = epsilon * init_fraction;
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& d : p.delta) d = dist(rng);
  return p;
}

AudioClip apply(const UniversalPerturbation& p, const AudioClip& clip) {
  check_valid(p);
  if (clip.sample_rate != p.sample_rate) {
    throw Error("sample-rate mismatch: clip " +
                std::to_string(clip.sample_rate) + " Hz vs perturbation " +
                std::to_string(p.sample_rate) + " Hz");
  }
  AudioClip out = clip;
  const std::size_t n_delta = p.delta.size();
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] =
        std::clamp(clip.samples[i] + p.delta[i % n_delta], -1.0, 1.0);
  }
  return out;
}

std::vector<double> tiled_delta(const UniversalPerturbation& p,
                                std::size_t clip_length) {
  check_valid(p);
  std::vector<double> out(clip_length);
  const std::size_t n_delta = p.delta.size();
  for (std::size_t i = 0; i < clip_length; ++i) {
    out[i] = p.delta[i % n_delta];
  }
  return out;
}

UniversalPerturbation project_linf(const UniversalPerturbation& p) {
  UniversalPerturbation out = p;
  project_linf_inplace(&out);
  return out;
}

void project_linf_inplace(UniversalPerturbation* p) {
  check_valid(*p);
  for (double& d : p->delta) d = std::clamp(d, -p->epsilon, p->epsilon);
}

std::vector<double> fold_gradient(const UniversalPerturbation& p,
                                  const AudioClip& clip,
                                  std::span<const double> grad_audio) {
  check_valid(p);
  if (grad_audio.size() != clip.samples.size()) {
    throw Error("fold_gradient: gradient/clip length mismatch");
  }
  std::vector<double> grad(p.delta.size(), 0.0);
  const std::size_t n_delta = p.delta.size();
  for (std::size_t i = 0; i < grad_audio.size(); ++i) {
    const double perturbed = clip.samples[i] + p.delta[i % n_delta];
    if (perturbed >= -1.0 && perturbed <= 1.0) {
      grad[i % n_delta] += grad_audio[i];
    }
  }
  return grad;
}

void save_perturbation(const UniversalPerturbation& p,
                       const std::string& path) {
  check_valid(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t rate = static_cast<uint32_t>(p.sample_rate);
  const uint32_t length = static_cast<uint32_t>(p.delta.size());
  out.write(reinterpret_cast<const char*>(&rate), 4);
  out.write(reinterpret_cast<const char*>(&length), 4);
  out.write(reinterpret_cast<const char*>(&p.epsilon), 8);
  out.write(reinterpret_cast<const char*>(p.delta.data()),
            static_cast<std::streamsize>(p.delta.size() * 8));
  if (!out) throw Error("write failed: " + path);
}

UniversalPerturbation load_perturbation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open perturbation file: " + path);
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0) {
    throw Error("bad magic in perturbation file (wrong format or version): " +
                path);
  }
  uint32_t rate = 0, length = 0;
  UniversalPerturbation p;
  if (!in.read(reinterpret_cast<char*>(&rate), 4) ||
      !in.read(reinterpret_cast<char*>(&length), 4) ||
      !in.read(reinterpret_cast<char*>(&p.epsilon), 8)) {
    throw Error("truncated perturbation file: " + path);
  }
  if (rate == 0 || length == 0 || !(p.epsilon > 0.0)) {
    throw Error("corrupt perturbation header: " + path);
  }
  p.sample_rate = static_cast<int>(rate);
  p.delta.resize(length);
  if (!in.read(reinterpret_cast<char*>(p.delta.data()),
               static_cast<std::streamsize>(length) * 8)) {
    throw Error("truncated perturbation payload: " + path);
  }
  return p;
}

}  // namespace duap
