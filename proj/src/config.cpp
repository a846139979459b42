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

#include "duap/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "duap/common.hpp"
#include "duap/fft.hpp"

namespace duap {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not a number: '" + value + "'");
  }
}

long long parse_integer(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not an integer: '" + value + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& key,
                             const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size() || value.find('-') != std::string::npos) {
      throw std::invalid_argument("trailing junk");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not a non-negative integer: '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + value + "'");
}

std::vector<std::string> parse_list(const std::string& key,
                                    const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw ConfigError(key, "empty list element in '" + value + "'");
    }
    items.push_back(item);
  }
  if (items.empty()) throw ConfigError(key, "empty list");
  return items;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no), "empty key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(key, "duplicate key");
    }

    if (key == "audio.sample_rate") {
      const long long v = parse_integer(key, value);
      if (v <= 0) throw ConfigError(key, "must be positive");
      c.sample_rate = static_cast<std::uint32_t>(v);
    } else if (key == "audio.frame") {
      c.frame = static_cast<int>(parse_integer(key, value));
    } else if (key == "audio.hop") {
      c.hop = static_cast<int>(parse_integer(key, value));
    } else if (key == "perturbation.length") {
      c.delta_length = static_cast<std::size_t>(parse_unsigned(key, value));
    } else if (key == "perturbation.epsilon") {
      c.epsilon = parse_real(key, value);
    } else if (key == "perturbation.init_scale") {
      c.init_scale = parse_real(key, value);
    } else if (key == "asr.surrogate") {
      c.asr_surrogate = value;
    } else if (key == "asr.target_text") {
      c.target_text = value;
    } else if (key == "sr.surrogates") {
      c.sr_surrogates = parse_list(key, value);
    } else if (key == "sr.target_speaker") {
      c.target_speaker = value;
    } else if (key == "sr.momentum") {
      c.momentum = parse_real(key, value);
    } else if (key == "sr.eps_var") {
      c.eps_var = parse_real(key, value);
    } else if (key == "sr.enrollment_manifest") {
      c.enrollment_manifest = value;
    } else if (key == "psy.enabled") {
      c.psy_enabled = parse_bool(key, value);
    } else if (key == "optimizer.lambda1") {
      c.lambda1 = parse_real(key, value);
    } else if (key == "optimizer.lambda2") {
      c.lambda2 = parse_real(key, value);
    } else if (key == "optimizer.solver") {
      c.solver = value;
    } else if (key == "optimizer.step_size") {
      c.step_size = parse_real(key, value);
    } else if (key == "optimizer.iterations") {
      c.iterations = static_cast<std::size_t>(parse_unsigned(key, value));
    } else if (key == "optimizer.batch_size") {
      c.batch_size = static_cast<std::size_t>(parse_unsigned(key, value));
    } else if (key == "optimizer.seed") {
      c.seed = parse_unsigned(key, value);
    } else if (key == "paths.train_manifest") {
      c.train_manifest = value;
    } else if (key == "paths.eval_manifest") {
      c.eval_manifest = value;
    } else if (key == "paths.output_dir") {
      c.output_dir = value;
    } else if (key == "eval.mos_command") {
      c.mos_command = value;
    } else {
      throw ConfigError(key, "unknown configuration key");
    }
  }
  return c;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate_config(const RunConfig& c, RunMode mode) {
  if (!is_power_of_two(static_cast<std::size_t>(std::max(c.frame, 0)))) {
    throw ConfigError("audio.frame", "must be a power of two");
  }
  if (c.hop <= 0 || c.hop > c.frame) {
    throw ConfigError("audio.hop", "must lie in (0, audio.frame]");
  }
  if (c.delta_length == 0) {
    throw ConfigError("perturbation.length", "must be positive");
  }
  if (!(c.epsilon > 0.0)) {
    throw ConfigError("perturbation.epsilon", "must be positive");
  }
  if (!(c.init_scale >= 0.0 && c.init_scale <= 1.0)) {
    throw ConfigError("perturbation.init_scale", "must lie in [0, 1]");
  }
  if (c.asr_surrogate.empty()) {
    throw ConfigError("asr.surrogate", "required");
  }
  if (c.sr_surrogates.empty()) {
    throw ConfigError("sr.surrogates", "at least one model required");
  }
  if (!(c.momentum > 0.0 && c.momentum < 1.0)) {
    throw ConfigError("sr.momentum", "must lie in (0, 1)");
  }
  if (!(c.eps_var > 0.0)) {
    throw ConfigError("sr.eps_var", "must be positive");
  }
  if (c.lambda1 < 0.0) {
    throw ConfigError("optimizer.lambda1", "must be >= 0");
  }
  if (c.lambda2 < 0.0) {
    throw ConfigError("optimizer.lambda2", "must be >= 0");
  }
  if (c.solver != "adaptive-moment" && c.solver != "pgd-sign") {
    throw ConfigError("optimizer.solver",
                      "must be adaptive-moment or pgd-sign");
  }
  if (!(c.step_size > 0.0)) {
    throw ConfigError("optimizer.step_size", "must be positive");
  }
  if (c.batch_size == 0) {
    throw ConfigError("optimizer.batch_size", "must be positive");
  }
  if (c.output_dir.empty()) {
    throw ConfigError("paths.output_dir", "required");
  }
  if (c.enrollment_manifest.empty()) {
    throw ConfigError("sr.enrollment_manifest", "required");
  }
  if (c.target_speaker.empty()) {
    throw ConfigError("sr.target_speaker", "required");
  }

  if (mode == RunMode::kTrain || mode == RunMode::kAnalyze) {
    if (c.train_manifest.empty()) {
      throw ConfigError("paths.train_manifest", "required");
    }
    if (c.target_text.empty()) {
      throw ConfigError("asr.target_text", "required");
    }
  }
  if (mode == RunMode::kTrain && c.iterations == 0) {
    throw ConfigError("optimizer.iterations", "must be at least 1");
  }
  if (mode == RunMode::kEvaluate && c.eval_manifest.empty()) {
    throw ConfigError("paths.eval_manifest", "required");
  }
}

AttackConfig to_attack_config(const RunConfig& c) {
  AttackConfig a;
  a.lambda1 = c.lambda1;
  a.lambda2 = c.psy_enabled ? c.lambda2 : 0.0;
  a.epsilon = c.epsilon;
  a.step_size = c.step_size;
  a.iterations = c.iterations;
  a.batch_size = c.batch_size;
  a.solver = c.solver == "pgd-sign" ? Solver::kPgdSign
                                    : Solver::kAdaptiveMoment;
  a.seed = c.seed;
  a.delta_length = c.delta_length;
  a.sample_rate = static_cast<int>(c.sample_rate);
  a.init_fraction = c.init_scale;
  a.ema_momentum = c.momentum;
  a.ema_eps_var = c.eps_var;
  a.psy_frame = c.frame;
  a.psy_hop = c.hop;
  return a;
}

}  // namespace duap
