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

#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "duap/common.hpp"
#include "duap/perturbation.hpp"
#include "toy_fixtures.hpp"

namespace {

duap::UniversalPerturbation make_p(std::vector<double> delta, double eps,
                                   int rate = 16000) {
  duap::UniversalPerturbation p;
  p.delta = std::move(delta);
  p.epsilon = eps;
  p.sample_rate = rate;
  return p;
}

}  // namespace

TEST_CASE("initialization stays inside the scaled ball and is seeded") {
  std::mt19937_64 rng(42);
  const auto p = duap::init_perturbation(1000, 0.05, 16000, rng, 0.1);
  CHECK(p.length() == 1000);
  CHECK(p.epsilon == 0.05);
  CHECK(p.sample_rate == 16000);
  CHECK(p.linf_norm() <= 0.005);
  // Not the zero vector.
  CHECK(p.linf_norm() > 0.0);

  std::mt19937_64 rng2(42);
  const auto q = duap::init_perturbation(1000, 0.05, 16000, rng2, 0.1);
  CHECK(q.delta == p.delta);

  std::mt19937_64 rng3(43);
  const auto r = duap::init_perturbation(1000, 0.05, 16000, rng3, 0.1);
  CHECK(r.delta != p.delta);

  CHECK_THROWS_AS(duap::init_perturbation(0, 0.05, 16000, rng, 0.1),
                  duap::Error);
  CHECK_THROWS_AS(duap::init_perturbation(10, 0.0, 16000, rng, 0.1),
                  duap::Error);
}

TEST_CASE("apply tiles, truncates, and clamps") {
  const auto p = make_p({0.1, -0.2, 0.3}, 0.5);

  duap::AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.99};
  const duap::AudioClip out = duap::apply(p, clip);
  REQUIRE(out.samples.size() == 8);
  CHECK(out.samples[0] == doctest::Approx(0.1));
  CHECK(out.samples[1] == doctest::Approx(-0.2));
  CHECK(out.samples[2] == doctest::Approx(0.3));
  CHECK(out.samples[3] == doctest::Approx(0.1));   // second tile
  CHECK(out.samples[6] == doctest::Approx(0.1));   // third tile, truncated
  CHECK(out.samples[7] == doctest::Approx(0.79));  // 0.99 + delta[1]

  duap::AudioClip shorty;
  shorty.sample_rate = 16000;
  shorty.samples = {0.98, -0.95};
  const auto clamped = duap::apply(make_p({0.1, -0.2}, 0.5), shorty);
  CHECK(clamped.samples[0] == doctest::Approx(1.0));    // 1.08 clamped
  CHECK(clamped.samples[1] == doctest::Approx(-1.0));   // -1.15 clamped

  duap::AudioClip wrong;
  wrong.sample_rate = 8000;
  wrong.samples = {0.0};
  CHECK_THROWS_WITH_AS(duap::apply(p, wrong),
                       doctest::Contains("sample-rate mismatch"), duap::Error);
}

TEST_CASE("tiled_delta exposes the pre-clamp tiling") {
  const auto p = make_p({0.1, -0.2}, 0.5);
  const auto t = duap::tiled_delta(p, 5);
  CHECK(t == std::vector<double>{0.1, -0.2, 0.1, -0.2, 0.1});
  CHECK(duap::tiled_delta(p, 1) == std::vector<double>{0.1});
}

TEST_CASE("projection clamps to the budget and is idempotent") {
  auto p = make_p({0.2, -0.9, 0.04, -0.05}, 0.05);
  const auto q = duap::project_linf(p);
  CHECK(q.delta == std::vector<double>{0.05, -0.05, 0.04, -0.05});
  CHECK(q.linf_norm() <= q.epsilon);
  const auto r = duap::project_linf(q);
  CHECK(r.delta == q.delta);

  duap::project_linf_inplace(&p);
  CHECK(p.delta == q.delta);
}

TEST_CASE("fold_gradient sums tile positions") {
  const auto p = make_p({0.01, 0.02}, 0.05);
  duap::AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = {0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<double> g = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  const auto folded = duap::fold_gradient(p, clip, g);
  REQUIRE(folded.size() == 2);
  CHECK(folded[0] == doctest::Approx(1.0 + 100.0 + 10000.0));
  CHECK(folded[1] == doctest::Approx(10.0 + 1000.0));

  CHECK_THROWS_AS(duap::fold_gradient(p, clip, std::vector<double>(3, 0.0)),
                  duap::Error);
}

TEST_CASE("fold_gradient masks samples pinned by the clamp") {
  const auto p = make_p({0.05, -0.05}, 0.05);
  duap::AudioClip clip;
  clip.sample_rate = 16000;
  // 0.98 + 0.05 pins high; -0.97 - 0.05 pins low; the rest stay inside.
  clip.samples = {0.98, -0.97, 0.0, 0.0};
  const std::vector<double> g = {5.0, 7.0, 11.0, 13.0};
  const auto folded = duap::fold_gradient(p, clip, g);
  CHECK(folded[0] == doctest::Approx(11.0));
  CHECK(folded[1] == doctest::Approx(13.0));

  // The boundary itself still passes gradient: 0.95 + 0.05 == 1.0.
  duap::AudioClip edge;
  edge.sample_rate = 16000;
  edge.samples = {0.95};
  const auto at_edge =
      duap::fold_gradient(make_p({0.05}, 0.05), edge, std::vector<double>{3.0});
  CHECK(at_edge[0] == doctest::Approx(3.0));
}

TEST_CASE("fold_gradient agrees with finite differences through apply") {
  // Smooth scalar readout of the perturbed audio: sum of squares.
  std::mt19937_64 rng(9);
  duap::AudioClip clip =
      duap_test::make_speech_clip(rng, 37, 16000, 0.5, "fd");
  auto p = duap::init_perturbation(16, 0.05, 16000, rng, 0.5);

  const duap::AudioClip perturbed = duap::apply(p, clip);
  std::vector<double> grad_audio(perturbed.samples.size());
  for (std::size_t i = 0; i < grad_audio.size(); ++i) {
    grad_audio[i] = 2.0 * perturbed.samples[i];
  }
  const auto analytic = duap::fold_gradient(p, clip, grad_audio);

  const auto fd = duap_test::central_differences(
      p, 1e-6, [&](const duap::UniversalPerturbation& q) {
        const duap::AudioClip y = duap::apply(q, clip);
        double s = 0.0;
        for (double v : y.samples) s += v * v;
        return s;
      });
  CHECK(duap_test::max_relative_error(analytic, fd) < 1e-7);
}

TEST_CASE("perturbation file round trip is exact") {
  const std::string dir = duap_test::scratch_dir("pert");
  std::mt19937_64 rng(17);
  const auto p = duap::init_perturbation(64, 0.05, 16000, rng, 1.0);
  const std::string path = dir + "/p.duap";
  duap::save_perturbation(p, path);
  const auto q = duap::load_perturbation(path);
  CHECK(q.delta == p.delta);
  CHECK(q.epsilon == p.epsilon);
  CHECK(q.sample_rate == p.sample_rate);
}

TEST_CASE("perturbation loader rejects corrupt files") {
  const std::string dir = duap_test::scratch_dir("pert");
  CHECK_THROWS_AS(duap::load_perturbation(dir + "/missing.duap"), duap::Error);

  {
    std::ofstream out(dir + "/magic.duap", std::ios::binary);
    out << "NOTDUAP_________________";
  }
  CHECK_THROWS_WITH_AS(duap::load_perturbation(dir + "/magic.duap"),
                       doctest::Contains("wrong format or version"),
                       duap::Error);

  std::mt19937_64 rng(18);
  const auto p = duap::init_perturbation(32, 0.05, 16000, rng, 1.0);
  duap::save_perturbation(p, dir + "/full.duap");
  std::ifstream in(dir + "/full.duap", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());

  {
    std::ofstream out(dir + "/head.duap", std::ios::binary);
    out.write(bytes.data(), 9);
  }
  CHECK_THROWS_WITH_AS(duap::load_perturbation(dir + "/head.duap"),
                       doctest::Contains("truncated perturbation file"),
                       duap::Error);

  {
    std::ofstream out(dir + "/cut.duap", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
  }
  CHECK_THROWS_WITH_AS(duap::load_perturbation(dir + "/cut.duap"),
                       doctest::Contains("truncated perturbation payload"),
                       duap::Error);
}
