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

#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "duap/common.hpp"
#include "duap/config.hpp"
#include "toy_fixtures.hpp"

namespace {

// The field a validation or parse failure is pinned to.
std::string failing_field(const std::function<void()>& op) {
  try {
    op();
  } catch (const duap::ConfigError& e) {
    return e.field();
  }
  return "";
}

duap::RunConfig valid_base() {
  duap::RunConfig c;
  c.target_text = "open the door";
  c.target_speaker = "spk0";
  c.enrollment_manifest = "enroll.tsv";
  c.train_manifest = "train.tsv";
  c.eval_manifest = "eval.tsv";
  return c;
}

}  // namespace

TEST_CASE("an empty config file yields the reference settings") {
  const auto c = duap::parse_config_text("");
  CHECK(c.sample_rate == 16000);
  CHECK(c.frame == 512);
  CHECK(c.hop == 256);
  CHECK(c.delta_length == 16000);
  CHECK(c.epsilon == 0.05);
  CHECK(c.init_scale == 0.1);
  CHECK(c.asr_surrogate == "toy-asr");
  CHECK(c.target_text.empty());
  CHECK(c.sr_surrogates ==
        std::vector<std::string>{"toy-embedder-a", "toy-embedder-b"});
  CHECK(c.target_speaker.empty());
  CHECK(c.momentum == 0.9);
  CHECK(c.eps_var == 1e-8);
  CHECK(c.enrollment_manifest.empty());
  CHECK(c.psy_enabled);
  CHECK(c.lambda1 == 5.0);
  CHECK(c.lambda2 == 0.003);
  CHECK(c.solver == "adaptive-moment");
  CHECK(c.step_size == 0.001);
  CHECK(c.iterations == 300);
  CHECK(c.batch_size == 16);
  CHECK(c.seed == 0);
  CHECK(c.train_manifest.empty());
  CHECK(c.eval_manifest.empty());
  CHECK(c.output_dir == "out");
  CHECK(c.mos_command.empty());
}

TEST_CASE("every key is parsed into its field") {
  const std::string text =
      "# full example\n"
      "audio.sample_rate = 8000\n"
      "audio.frame = 256\n"
      "audio.hop = 128\r\n"
      "\n"
      "perturbation.length = 4000\n"
      "perturbation.epsilon = 0.02\n"
      "perturbation.init_scale = 0.5\n"
      "asr.surrogate = toy-asr\n"
      "asr.target_text = send the funds\n"
      "sr.surrogates = toy-embedder-a, toy-embedder-b , toy-embedder-c\n"
      "sr.target_speaker = spk7\n"
      "sr.momentum = 0.8\n"
      "sr.eps_var = 1e-6\n"
      "sr.enrollment_manifest = data/enroll.tsv\n"
      "psy.enabled = false\n"
      "optimizer.lambda1 = 2.5\n"
      "optimizer.lambda2 = 0.01\n"
      "optimizer.solver = pgd-sign\n"
      "optimizer.step_size = 0.005\n"
      "optimizer.iterations = 42\n"
      "optimizer.batch_size = 4\n"
      "optimizer.seed = 1234\n"
      "paths.train_manifest = data/train.tsv\n"
      "paths.eval_manifest = data/eval.tsv\n"
      "paths.output_dir = results\n"
      "eval.mos_command = sh score.sh\n";
  const auto c = duap::parse_config_text(text);
  CHECK(c.sample_rate == 8000);
  CHECK(c.frame == 256);
  CHECK(c.hop == 128);
  CHECK(c.delta_length == 4000);
  CHECK(c.epsilon == 0.02);
  CHECK(c.init_scale == 0.5);
  CHECK(c.target_text == "send the funds");
  CHECK(c.sr_surrogates ==
        std::vector<std::string>{"toy-embedder-a", "toy-embedder-b",
                                 "toy-embedder-c"});
  CHECK(c.target_speaker == "spk7");
  CHECK(c.momentum == 0.8);
  CHECK(c.eps_var == 1e-6);
  CHECK(c.enrollment_manifest == "data/enroll.tsv");
  CHECK_FALSE(c.psy_enabled);
  CHECK(c.lambda1 == 2.5);
  CHECK(c.lambda2 == 0.01);
  CHECK(c.solver == "pgd-sign");
  CHECK(c.step_size == 0.005);
  CHECK(c.iterations == 42);
  CHECK(c.batch_size == 4);
  CHECK(c.seed == 1234);
  CHECK(c.train_manifest == "data/train.tsv");
  CHECK(c.eval_manifest == "data/eval.tsv");
  CHECK(c.output_dir == "results");
  CHECK(c.mos_command == "sh score.sh");
}

TEST_CASE("parse failures name the key or the line") {
  CHECK(failing_field([] {
          duap::parse_config_text("bogus.key = 1\n");
        }) == "bogus.key");
  CHECK(failing_field([] {
          duap::parse_config_text("optimizer.seed = 1\noptimizer.seed = 2\n");
        }) == "optimizer.seed");
  CHECK(failing_field([] {
          duap::parse_config_text("audio.frame = 512\nno equals sign\n");
        }) == "line 2");
  CHECK(failing_field([] { duap::parse_config_text(" = 3\n"); }) == "line 1");
  CHECK(failing_field([] {
          duap::parse_config_text("audio.sample_rate = fast\n");
        }) == "audio.sample_rate");
  CHECK(failing_field([] {
          duap::parse_config_text("audio.sample_rate = -1\n");
        }) == "audio.sample_rate");
  CHECK(failing_field([] {
          duap::parse_config_text("perturbation.epsilon = 0.05x\n");
        }) == "perturbation.epsilon");
  CHECK(failing_field([] {
          duap::parse_config_text("optimizer.iterations = -3\n");
        }) == "optimizer.iterations");
  CHECK(failing_field([] {
          duap::parse_config_text("psy.enabled = yes\n");
        }) == "psy.enabled");
  CHECK(failing_field([] {
          duap::parse_config_text("sr.surrogates = a,,b\n");
        }) == "sr.surrogates");
  CHECK(failing_field([] {
          duap::parse_config_text("sr.surrogates = ,\n");
        }) == "sr.surrogates");

  // The what() string leads with the field.
  try {
    duap::parse_config_text("psy.enabled = maybe\n");
    FAIL("expected a config error");
  } catch (const duap::ConfigError& e) {
    CHECK(std::string(e.what()).rfind("psy.enabled: ", 0) == 0);
  }
}

TEST_CASE("config files load through the same parser") {
  const std::string dir = duap_test::scratch_dir("config");
  const std::string path = dir + "/run.conf";
  {
    std::ofstream out(path);
    out << "optimizer.seed = 77\n";
  }
  const auto c = duap::parse_config_file(path);
  CHECK(c.seed == 77);
  CHECK(failing_field([&] {
          duap::parse_config_file(dir + "/missing.conf");
        }) == dir + "/missing.conf");
}

TEST_CASE("cross-field validation pins failures to their key") {
  const auto base = valid_base();
  for (const auto mode :
       {duap::RunMode::kTrain, duap::RunMode::kEvaluate,
        duap::RunMode::kAnalyze}) {
    CHECK_NOTHROW(duap::validate_config(base, mode));
  }

  const auto field_for = [&](auto mutate, duap::RunMode mode) {
    auto c = valid_base();
    mutate(c);
    return failing_field([&] { duap::validate_config(c, mode); });
  };
  const auto train = duap::RunMode::kTrain;

  CHECK(field_for([](auto& c) { c.frame = 500; }, train) == "audio.frame");
  CHECK(field_for([](auto& c) { c.frame = -512; }, train) == "audio.frame");
  CHECK(field_for([](auto& c) { c.hop = 0; }, train) == "audio.hop");
  CHECK(field_for([](auto& c) { c.hop = 1024; }, train) == "audio.hop");
  CHECK(field_for([](auto& c) { c.delta_length = 0; }, train) ==
        "perturbation.length");
  CHECK(field_for([](auto& c) { c.epsilon = 0.0; }, train) ==
        "perturbation.epsilon");
  CHECK(field_for([](auto& c) { c.init_scale = 1.5; }, train) ==
        "perturbation.init_scale");
  CHECK(field_for([](auto& c) { c.asr_surrogate.clear(); }, train) ==
        "asr.surrogate");
  CHECK(field_for([](auto& c) { c.sr_surrogates.clear(); }, train) ==
        "sr.surrogates");
  CHECK(field_for([](auto& c) { c.momentum = 1.0; }, train) == "sr.momentum");
  CHECK(field_for([](auto& c) { c.eps_var = 0.0; }, train) == "sr.eps_var");
  CHECK(field_for([](auto& c) { c.lambda1 = -1.0; }, train) ==
        "optimizer.lambda1");
  CHECK(field_for([](auto& c) { c.lambda2 = -1.0; }, train) ==
        "optimizer.lambda2");
  CHECK(field_for([](auto& c) { c.solver = "sgd"; }, train) ==
        "optimizer.solver");
  CHECK(field_for([](auto& c) { c.step_size = 0.0; }, train) ==
        "optimizer.step_size");
  CHECK(field_for([](auto& c) { c.batch_size = 0; }, train) ==
        "optimizer.batch_size");
  CHECK(field_for([](auto& c) { c.output_dir.clear(); }, train) ==
        "paths.output_dir");
}

TEST_CASE("required fields depend on the run mode") {
  const auto train = duap::RunMode::kTrain;
  const auto evaluate = duap::RunMode::kEvaluate;
  const auto analyze = duap::RunMode::kAnalyze;

  // The speaker target and enrollment list are needed everywhere.
  for (const auto mode : {train, evaluate, analyze}) {
    auto c = valid_base();
    c.enrollment_manifest.clear();
    CHECK(failing_field([&] { duap::validate_config(c, mode); }) ==
          "sr.enrollment_manifest");
    c = valid_base();
    c.target_speaker.clear();
    CHECK(failing_field([&] { duap::validate_config(c, mode); }) ==
          "sr.target_speaker");
  }

  // The transcription target and training data only matter when the
  // perturbation is being fitted or studied.
  auto c = valid_base();
  c.target_text.clear();
  CHECK(failing_field([&] { duap::validate_config(c, train); }) ==
        "asr.target_text");
  CHECK(failing_field([&] { duap::validate_config(c, analyze); }) ==
        "asr.target_text");
  CHECK_NOTHROW(duap::validate_config(c, evaluate));

  c = valid_base();
  c.train_manifest.clear();
  CHECK(failing_field([&] { duap::validate_config(c, train); }) ==
        "paths.train_manifest");
  CHECK(failing_field([&] { duap::validate_config(c, analyze); }) ==
        "paths.train_manifest");
  CHECK_NOTHROW(duap::validate_config(c, evaluate));

  c = valid_base();
  c.eval_manifest.clear();
  CHECK(failing_field([&] { duap::validate_config(c, evaluate); }) ==
        "paths.eval_manifest");
  CHECK_NOTHROW(duap::validate_config(c, train));

  c = valid_base();
  c.iterations = 0;
  CHECK(failing_field([&] { duap::validate_config(c, train); }) ==
        "optimizer.iterations");
  CHECK_NOTHROW(duap::validate_config(c, evaluate));
  CHECK_NOTHROW(duap::validate_config(c, analyze));
}

TEST_CASE("run settings map onto the attack settings") {
  auto c = valid_base();
  c.lambda1 = 2.5;
  c.lambda2 = 0.01;
  c.epsilon = 0.02;
  c.step_size = 0.005;
  c.iterations = 42;
  c.batch_size = 4;
  c.solver = "pgd-sign";
  c.seed = 1234;
  c.delta_length = 4000;
  c.sample_rate = 8000;
  c.init_scale = 0.5;
  c.momentum = 0.8;
  c.eps_var = 1e-6;
  c.frame = 256;
  c.hop = 128;

  const auto a = duap::to_attack_config(c);
  CHECK(a.lambda1 == 2.5);
  CHECK(a.lambda2 == 0.01);
  CHECK(a.epsilon == 0.02);
  CHECK(a.step_size == 0.005);
  CHECK(a.iterations == 42);
  CHECK(a.batch_size == 4);
  CHECK(a.solver == duap::Solver::kPgdSign);
  CHECK(a.seed == 1234);
  CHECK(a.delta_length == 4000);
  CHECK(a.sample_rate == 8000);
  CHECK(a.init_fraction == 0.5);
  CHECK(a.ema_momentum == 0.8);
  CHECK(a.ema_eps_var == 1e-6);
  CHECK(a.psy_frame == 256);
  CHECK(a.psy_hop == 128);

  c.solver = "adaptive-moment";
  CHECK(duap::to_attack_config(c).solver == duap::Solver::kAdaptiveMoment);

  // Disabling the hearing-threshold term zeroes its weight.
  c.psy_enabled = false;
  CHECK(duap::to_attack_config(c).lambda2 == 0.0);
}
