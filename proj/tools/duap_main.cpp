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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "duap/analysis.hpp"
#include "duap/audio.hpp"
#include "duap/common.hpp"
#include "duap/config.hpp"
#include "duap/evaluation.hpp"
#include "duap/optimizer.hpp"
#include "duap/perturbation.hpp"
#include "duap/psychoacoustic.hpp"
#include "duap/sr_objective.hpp"
#include "duap/surrogates.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct GlobalFlags {
  std::string config_path;
  std::string out_dir;       // overrides paths.output_dir when set
  std::int64_t seed = -1;    // overrides optimizer.seed when >= 0
};

struct Stack {
  std::shared_ptr<duap::AsrSurrogate> asr;
  std::vector<std::shared_ptr<duap::SpeakerEmbedder>> embedders;
  duap::PrototypeTable table;
};

duap::RunConfig load_run_config(const GlobalFlags& flags,
                                duap::RunMode mode) {
  if (flags.config_path.empty()) {
    throw duap::ConfigError("--config", "required");
  }
  duap::RunConfig rc = duap::parse_config_file(flags.config_path);
  if (!flags.out_dir.empty()) rc.output_dir = flags.out_dir;
  if (flags.seed >= 0) rc.seed = static_cast<std::uint64_t>(flags.seed);
  duap::validate_config(rc, mode);
  return rc;
}

Stack build_stack(const duap::RunConfig& rc) {
  const duap::SurrogateRegistry registry =
      duap::SurrogateRegistry::with_builtins();
  Stack stack;
  try {
    stack.asr = registry.make_asr(rc.asr_surrogate);
  } catch (const duap::Error& e) {
    throw duap::ConfigError("asr.surrogate", e.what());
  }
  for (const std::string& name : rc.sr_surrogates) {
    try {
      stack.embedders.push_back(registry.make_embedder(name));
    } catch (const duap::Error& e) {
      throw duap::ConfigError("sr.surrogates", e.what());
    }
  }
  duap::DatasetManifest enrollment;
  try {
    enrollment = duap::read_manifest(rc.enrollment_manifest);
  } catch (const duap::Error& e) {
    throw duap::ConfigError("sr.enrollment_manifest", e.what());
  }
  stack.table =
      duap::build_prototypes(stack.embedders, enrollment, rc.sample_rate);
  try {
    stack.table.speaker_index(rc.target_speaker);
  } catch (const duap::Error&) {
    throw duap::ConfigError("sr.target_speaker",
                            "'" + rc.target_speaker +
                                "' is not in the enrollment set");
  }
  return stack;
}

void check_target_text(const duap::RunConfig& rc,
                       const duap::AsrSurrogate& asr) {
  if (rc.target_text.empty()) return;
  const std::string& vocab = asr.vocabulary();
  for (const char c : rc.target_text) {
    if (vocab.find(c) == std::string::npos) {
      throw duap::ConfigError("asr.target_text",
                              std::string("character '") + c +
                                  "' is outside the surrogate vocabulary");
    }
  }
}

std::vector<duap::AudioClip> load_clips(const std::string& manifest_path,
                                        std::uint32_t sample_rate) {
  const duap::DatasetManifest manifest = duap::read_manifest(manifest_path);
  std::vector<duap::AudioClip> clips;
  clips.reserve(manifest.entries.size());
  for (const duap::ManifestEntry& entry : manifest.entries) {
    duap::AudioClip clip = duap::load_wav(
        duap::resolve_manifest_path(manifest, entry), sample_rate);
    clip.id = entry.path;
    clip.transcript = entry.transcript;
    clip.speaker_id = entry.speaker_id;
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::string out_path(const duap::RunConfig& rc, const std::string& name) {
  std::filesystem::create_directories(rc.output_dir);
  return (std::filesystem::path(rc.output_dir) / name).string();
}

int cmd_train(const GlobalFlags& flags) {
  const duap::RunConfig rc = load_run_config(flags, duap::RunMode::kTrain);
  const Stack stack = build_stack(rc);
  check_target_text(rc, *stack.asr);
  const std::vector<duap::AudioClip> clips =
      load_clips(rc.train_manifest, rc.sample_rate);

  duap::JointObjective objective(stack.asr, {rc.target_text},
                                 stack.embedders, stack.table,
                                 {rc.target_speaker}, rc.frame, rc.hop);
  const duap::TrainResult result =
      duap::train(clips, &objective, duap::to_attack_config(rc));

  const std::string delta_path = out_path(rc, "perturbation.duap");
  const std::string trace_path = out_path(rc, "trace.tsv");
  duap::save_perturbation(result.perturbation, delta_path);
  duap::write_trace(result.trace, trace_path);

  if (!result.trace.records.empty()) {
    std::printf("initial total %.6g, final total %.6g over %zu iterations\n",
                result.trace.records.front().total,
                result.trace.records.back().total,
                result.trace.records.size());
  }
  std::printf("wrote %s\n", delta_path.c_str());
  std::printf("wrote %s\n", trace_path.c_str());
  return kExitOk;
}

int cmd_evaluate(const GlobalFlags& flags,
                 const std::string& perturbation_path) {
  const duap::RunConfig rc =
      load_run_config(flags, duap::RunMode::kEvaluate);

  duap::UniversalPerturbation p;
  try {
    p = duap::load_perturbation(perturbation_path);
  } catch (const duap::Error& e) {
    throw duap::ConfigError("perturbation", e.what());
  }
  if (p.sample_rate != static_cast<int>(rc.sample_rate)) {
    throw duap::ConfigError(
        "perturbation", "file sample rate " + std::to_string(p.sample_rate) +
                            " does not match audio.sample_rate " +
                            std::to_string(rc.sample_rate));
  }

  const Stack stack = build_stack(rc);
  const std::vector<duap::AudioClip> clips =
      load_clips(rc.eval_manifest, rc.sample_rate);

  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, duap::SroaAsrResult>> asr_results;
  asr_results.emplace_back(
      stack.asr->name(),
      duap::sroa_asr(*stack.asr, clips, p, 0.5, &warnings));

  const duap::SrTarget target{rc.target_speaker};
  std::vector<std::pair<std::string, duap::SroaSrResult>> sr_results;
  for (const auto& embedder : stack.embedders) {
    sr_results.emplace_back(
        embedder->name(),
        duap::sroa_sr(*embedder, stack.table, clips, p, target, &warnings));
  }

  std::vector<std::pair<std::string, double>> clip_snrs;
  for (const duap::AudioClip& clip : clips) {
    try {
      clip_snrs.emplace_back(clip.id, duap::snr_db(clip, p));
    } catch (const duap::Error& e) {
      warnings.push_back("clip '" + clip.id + "': " + e.what());
    }
  }

  const duap::MosResult mos =
      duap::mos_hook(clips, p, rc.mos_command, out_path(rc, "mos_wavs"));

  duap::EvalReport report =
      duap::build_report(asr_results, sr_results, clip_snrs, mos);
  report.warnings.insert(report.warnings.end(), warnings.begin(),
                         warnings.end());

  const std::string report_path = out_path(rc, "report.txt");
  duap::write_report(report, report_path);
  std::printf("wrote %s\n", report_path.c_str());
  for (const auto& [model, rate] : report.sroa_asr) {
    std::printf("sroa_asr %s %.4f\n", model.c_str(), rate);
  }
  for (const auto& [model, rate] : report.sroa_sr) {
    std::printf("sroa_sr %s %.4f\n", model.c_str(), rate);
  }
  return kExitOk;
}

int cmd_analyze(const GlobalFlags& flags, std::size_t n_samples) {
  if (n_samples == 0) {
    throw duap::ConfigError("--samples", "must be at least 1");
  }
  const duap::RunConfig rc =
      load_run_config(flags, duap::RunMode::kAnalyze);
  const Stack stack = build_stack(rc);
  check_target_text(rc, *stack.asr);
  const std::vector<duap::AudioClip> clips =
      load_clips(rc.train_manifest, rc.sample_rate);

  const duap::GradientStudy study = duap::attack_gradient_study(
      *stack.asr, {rc.target_text}, stack.embedders, stack.table,
      {rc.target_speaker}, clips, duap::to_attack_config(rc), n_samples);

  const std::string samples_path = out_path(rc, "cosines.tsv");
  const std::string histogram_path = out_path(rc, "cosine_histogram.tsv");
  duap::write_cosine_samples(study, samples_path);
  duap::write_cosine_histogram(study, histogram_path);
  std::printf("mean cosine %.6g, std %.6g, %zu samples (%zu degenerate)\n",
              study.mean, study.std_dev, study.samples.size(),
              study.degenerate);
  std::printf("wrote %s\n", samples_path.c_str());
  std::printf("wrote %s\n", histogram_path.c_str());
  return kExitOk;
}

int cmd_apply(const std::string& perturbation_path,
              const std::string& input_path,
              const std::string& output_path) {
  duap::UniversalPerturbation p;
  try {
    p = duap::load_perturbation(perturbation_path);
  } catch (const duap::Error& e) {
    throw duap::ConfigError("perturbation", e.what());
  }
  duap::AudioClip clip;
  try {
    clip = duap::load_wav(input_path);
  } catch (const duap::Error& e) {
    throw duap::ConfigError("input", e.what());
  }
  const duap::AudioClip adv = duap::apply(p, clip);
  duap::save_wav(adv, output_path);
  std::printf("wrote %s\n", output_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"universal audio perturbation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "configuration file");
  app.add_option("--out", flags.out_dir, "output directory override");
  app.add_option("--seed", flags.seed, "seed override");

  CLI::App* train = app.add_subcommand("train", "optimize a perturbation");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score a perturbation on a dataset");
  std::string eval_perturbation;
  evaluate->add_option("--perturbation", eval_perturbation,
                       "perturbation file")
      ->required();

  CLI::App* analyze =
      app.add_subcommand("analyze", "gradient direction study");
  std::size_t n_samples = 200;
  analyze->add_option("--samples", n_samples, "number of random draws");

  CLI::App* apply_cmd =
      app.add_subcommand("apply", "add a perturbation to one wav");
  std::string apply_perturbation;
  std::string apply_input;
  std::string apply_output;
  apply_cmd->add_option("--perturbation", apply_perturbation,
                        "perturbation file")
      ->required();
  apply_cmd->add_option("--input", apply_input, "clean wav")->required();
  apply_cmd->add_option("--output", apply_output, "perturbed wav")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (train->parsed()) return cmd_train(flags);
    if (evaluate->parsed()) return cmd_evaluate(flags, eval_perturbation);
    if (analyze->parsed()) return cmd_analyze(flags, n_samples);
    if (apply_cmd->parsed()) {
      return cmd_apply(apply_perturbation, apply_input, apply_output);
    }
  } catch (const duap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const duap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
