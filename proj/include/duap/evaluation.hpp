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

#ifndef DUAP_EVALUATION_HPP_
#define DUAP_EVALUATION_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duap/audio.hpp"
#include "duap/perturbation.hpp"
#include "duap/sr_objective.hpp"
#include "duap/surrogates.hpp"

namespace duap {

// Character-level Levenshtein distance with unit costs, divided by the
// reference length. The reference must be non-empty.
double cer(const std::string& reference, const std::string& hypothesis);

// Lowercase, punctuation stripped, whitespace runs collapsed to single
// spaces, edges trimmed.
std::string normalize_transcript(const std::string& text);

struct ClipAsrEval {
  std::string clip_id;
  bool ok = false;       // transcription ran and the reference was usable
  bool success = false;  // cer >= threshold
  double cer_value = 0.0;
  std::string hypothesis;
};

struct SroaAsrResult {
  double rate = 0.0;  // successes / evaluated
  std::size_t evaluated = 0;
  std::vector<ClipAsrEval> clips;
};

// Fraction of clips whose perturbed transcription drifts at least
// `threshold` in normalized character error rate from the reference.
// Failed clips are dropped from the denominator and noted in warnings.
SroaAsrResult sroa_asr(const AsrSurrogate& asr,
                       std::span<const AudioClip> clips,
                       const UniversalPerturbation& p, double threshold = 0.5,
                       std::vector<std::string>* warnings = nullptr);

// Closed-set identification: the enrolled speaker with the highest
// similarity logit, ties to the lowest speaker index.
std::string csi_predict(const SpeakerEmbedder& embedder,
                        const PrototypeTable& table,
                        std::span<const double> audio);

struct ClipSrEval {
  std::string clip_id;
  bool ok = false;
  bool success = false;  // predicted == target
  std::string predicted;
};

struct SroaSrResult {
  double rate = 0.0;
  std::size_t evaluated = 0;
  std::vector<ClipSrEval> clips;
};

// Fraction of perturbed clips identified as the target speaker.
SroaSrResult sroa_sr(const SpeakerEmbedder& embedder,
                     const PrototypeTable& table,
                     std::span<const AudioClip> clips,
                     const UniversalPerturbation& p, const SrTarget& target,
                     std::vector<std::string>* warnings = nullptr);

// 10 log10 of clean energy over injected (pre-clamp) perturbation
// energy. A zero perturbation returns +infinity; a silent clip is an
// error.
double snr_db(const AudioClip& clean, const UniversalPerturbation& p);

struct MosResult {
  bool available = false;
  double score = 0.0;
  std::vector<std::string> warnings;
};

// Writes the perturbed clips as WAVs into wav_dir and runs `command
// wav_dir`, expecting one "score<TAB>path" line per file on stdout;
// returns the mean score. An empty command, a failing command, or
// unparseable output yields an unavailable result, never an exception.
MosResult mos_hook(std::span<const AudioClip> clips,
                   const UniversalPerturbation& p, const std::string& command,
                   const std::string& wav_dir);

struct ReportDetailRow {
  std::string metric;   // sroa_asr | sroa_sr | snr
  std::string model;    // empty for snr
  std::string clip_id;
  std::string value;    // flag, or per-clip snr, or "failed"
  std::string extra;    // cer/hypothesis, predicted id
};

struct EvalReport {
  std::vector<std::pair<std::string, double>> sroa_asr;  // model, rate
  std::vector<std::pair<std::string, double>> sroa_sr;
  std::optional<double> snr_db_mean;  // unset means zero perturbation
  std::optional<double> mos;
  std::vector<ReportDetailRow> details;
  std::vector<std::string> warnings;
};

// Aggregates per-model results into one report. Models whose result
// carries no clip rows are dropped with a warning.
EvalReport build_report(
    std::span<const std::pair<std::string, SroaAsrResult>> asr_results,
    std::span<const std::pair<std::string, SroaSrResult>> sr_results,
    std::span<const std::pair<std::string, double>> clip_snrs,
    const MosResult& mos);

// Key-value header then a tab-separated detail table.
void write_report(const EvalReport& report, const std::string& path);

}  // namespace duap

#endif  // DUAP_EVALUATION_HPP_
