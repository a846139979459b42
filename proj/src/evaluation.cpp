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

#include "duap/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "duap/common.hpp"

namespace duap {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void warn(std::vector<std::string>* warnings, const std::string& message) {
  if (warnings != nullptr) warnings->push_back(message);
}

}  // namespace

double cer(const std::string& reference, const std::string& hypothesis) {
  if (reference.empty()) throw Error("empty reference transcript");
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  std::vector<std::size_t> prev(m + 1);
  std::vector<std::size_t> cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub =
          prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

std::string normalize_transcript(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      pending_space = true;
    }
    // Punctuation and other bytes are dropped without breaking words.
  }
  return out;
}

SroaAsrResult sroa_asr(const AsrSurrogate& asr,
                       std::span<const AudioClip> clips,
                       const UniversalPerturbation& p, double threshold,
                       std::vector<std::string>* warnings) {
  SroaAsrResult result;
  std::size_t successes = 0;
  for (const AudioClip& clip : clips) {
    ClipAsrEval row;
    row.clip_id = clip.id;
    const std::string reference = normalize_transcript(clip.transcript);
    if (reference.empty()) {
      warn(warnings, "clip '" + clip.id +
                         "': empty reference transcript, skipped");
      result.clips.push_back(std::move(row));
      continue;
    }
    try {
      const AudioClip adv = apply(p, clip);
      row.hypothesis = asr.transcribe(adv.samples);
      row.cer_value = cer(reference, normalize_transcript(row.hypothesis));
      row.ok = true;
      row.success = row.cer_value >= threshold;
    } catch (const Error& e) {
      warn(warnings, "clip '" + clip.id + "': transcription failed (" +
                         e.what() + "), skipped");
      result.clips.push_back(std::move(row));
      continue;
    }
    result.evaluated += 1;
    if (row.success) successes += 1;
    result.clips.push_back(std::move(row));
  }
  if (result.evaluated > 0) {
    result.rate = static_cast<double>(successes) /
                  static_cast<double>(result.evaluated);
  }
  return result;
}

std::string csi_predict(const SpeakerEmbedder& embedder,
                        const PrototypeTable& table,
                        std::span<const double> audio) {
  const std::vector<double> z = speaker_logits(embedder, table, audio);
  const auto best = static_cast<std::size_t>(
      std::max_element(z.begin(), z.end()) - z.begin());
  return table.speakers[best];
}

SroaSrResult sroa_sr(const SpeakerEmbedder& embedder,
                     const PrototypeTable& table,
                     std::span<const AudioClip> clips,
                     const UniversalPerturbation& p, const SrTarget& target,
                     std::vector<std::string>* warnings) {
  table.speaker_index(target.speaker_id);  // membership check
  SroaSrResult result;
  std::size_t successes = 0;
  for (const AudioClip& clip : clips) {
    ClipSrEval row;
    row.clip_id = clip.id;
    try {
      const AudioClip adv = apply(p, clip);
      row.predicted = csi_predict(embedder, table, adv.samples);
      row.ok = true;
      row.success = row.predicted == target.speaker_id;
    } catch (const Error& e) {
      warn(warnings, "clip '" + clip.id + "': identification failed (" +
                         e.what() + "), skipped");
      result.clips.push_back(std::move(row));
      continue;
    }
    result.evaluated += 1;
    if (row.success) successes += 1;
    result.clips.push_back(std::move(row));
  }
  if (result.evaluated > 0) {
    result.rate = static_cast<double>(successes) /
                  static_cast<double>(result.evaluated);
  }
  return result;
}

double snr_db(const AudioClip& clean, const UniversalPerturbation& p) {
  double signal = 0.0;
  for (const double s : clean.samples) signal += s * s;
  if (signal == 0.0) throw Error("silent clip has no defined snr");
  const std::vector<double> noise_samples =
      tiled_delta(p, clean.samples.size());
  double noise = 0.0;
  for (const double d : noise_samples) noise += d * d;
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

MosResult mos_hook(std::span<const AudioClip> clips,
                   const UniversalPerturbation& p, const std::string& command,
                   const std::string& wav_dir) {
  MosResult result;
  if (command.empty()) {
    result.warnings.push_back("no mos command configured");
    return result;
  }
  try {
    std::filesystem::create_directories(wav_dir);
    std::size_t index = 0;
    for (const AudioClip& clip : clips) {
      const AudioClip adv = apply(p, clip);
      const std::string name = "clip_" + std::to_string(index++) + ".wav";
      save_wav(adv, (std::filesystem::path(wav_dir) / name).string());
    }
  } catch (const Error& e) {
    result.warnings.push_back(std::string("mos wav emission failed: ") +
                              e.what());
    return result;
  }

  const std::string cmdline = command + " '" + wav_dir + "'";
  FILE* pipe = popen(cmdline.c_str(), "r");
  if (pipe == nullptr) {
    result.warnings.push_back("mos command could not be started");
    return result;
  }
  std::string output;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) {
    output.append(buf, got);
  }
  const int status = pclose(pipe);
  if (status != 0) {
    result.warnings.push_back("mos command exited with status " +
                              std::to_string(status));
    return result;
  }

  double sum = 0.0;
  std::size_t count = 0;
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      result.warnings.push_back("mos line without score<TAB>path: " + line);
      continue;
    }
    try {
      std::size_t used = 0;
      const double score = std::stod(line.substr(0, tab), &used);
      if (used != tab || !std::isfinite(score)) {
        throw std::invalid_argument("trailing junk");
      }
      sum += score;
      count += 1;
    } catch (const std::exception&) {
      result.warnings.push_back("unparseable mos score: " + line);
    }
  }
  if (count == 0) {
    result.warnings.push_back("mos command produced no scores");
    return result;
  }
  result.available = true;
  result.score = sum / static_cast<double>(count);
  return result;
}

EvalReport build_report(
    std::span<const std::pair<std::string, SroaAsrResult>> asr_results,
    std::span<const std::pair<std::string, SroaSrResult>> sr_results,
    std::span<const std::pair<std::string, double>> clip_snrs,
    const MosResult& mos) {
  EvalReport report;

  for (const auto& [model, res] : asr_results) {
    if (res.clips.empty()) {
      report.warnings.push_back("model '" + model +
                                "' has no transcription rows, omitted");
      continue;
    }
    report.sroa_asr.emplace_back(model, res.rate);
    for (const ClipAsrEval& row : res.clips) {
      report.details.push_back(
          {"sroa_asr", model, row.clip_id,
           row.ok ? std::string(row.success ? "1" : "0") : "failed",
           row.ok ? format_g17(row.cer_value) : ""});
    }
  }

  for (const auto& [model, res] : sr_results) {
    if (res.clips.empty()) {
      report.warnings.push_back("model '" + model +
                                "' has no identification rows, omitted");
      continue;
    }
    report.sroa_sr.emplace_back(model, res.rate);
    for (const ClipSrEval& row : res.clips) {
      report.details.push_back(
          {"sroa_sr", model, row.clip_id,
           row.ok ? std::string(row.success ? "1" : "0") : "failed",
           row.predicted});
    }
  }

  double snr_sum = 0.0;
  std::size_t snr_count = 0;
  for (const auto& [clip_id, value] : clip_snrs) {
    report.details.push_back(
        {"snr", "", clip_id,
         std::isinf(value) ? std::string("clean") : format_g17(value), ""});
    if (std::isfinite(value)) {
      snr_sum += value;
      snr_count += 1;
    }
  }
  if (snr_count > 0) {
    report.snr_db_mean = snr_sum / static_cast<double>(snr_count);
  }

  if (mos.available) report.mos = mos.score;
  for (const std::string& w : mos.warnings) report.warnings.push_back(w);
  return report;
}

void write_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report: " + path);
  for (const auto& [model, rate] : report.sroa_asr) {
    out << "sroa_asr." << model << " = " << format_g17(rate) << '\n';
  }
  for (const auto& [model, rate] : report.sroa_sr) {
    out << "sroa_sr." << model << " = " << format_g17(rate) << '\n';
  }
  out << "snr_db = "
      << (report.snr_db_mean ? format_g17(*report.snr_db_mean)
                             : std::string("clean"))
      << '\n';
  out << "mos = "
      << (report.mos ? format_g17(*report.mos) : std::string("unavailable"))
      << '\n';
  for (const std::string& w : report.warnings) {
    out << "# warning: " << w << '\n';
  }
  out << '\n';
  out << "metric\tmodel\tclip\tvalue\tdetail\n";
  for (const ReportDetailRow& row : report.details) {
    out << row.metric << '\t' << row.model << '\t' << row.clip_id << '\t'
        << row.value << '\t' << row.extra << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace duap
