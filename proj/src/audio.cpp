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

#include "duap/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "duap/common.hpp"
#include "duap/fft.hpp"

namespace duap {

namespace {

constexpr double kInt16Scale = 32768.0;

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

double sinc(double t) {
  if (std::abs(t) < 1e-12) return 1.0;
  const double pt = M_PI * t;
  return std::sin(pt) / pt;
}

}  // namespace

AudioClip load_wav(const std::string& path, int target_rate,
                   std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error("not a RIFF/WAVE file: " + path);
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::size_t data_offset = 0, data_size = 0;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* chunk_id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t chunk_size = read_u32le(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) break;
    if (std::memcmp(chunk_id, "fmt ", 4) == 0 && chunk_size >= 16) {
      format = read_u16le(bytes.data() + body);
      channels = read_u16le(bytes.data() + body + 2);
      rate = read_u32le(bytes.data() + body + 4);
      bits = read_u16le(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk_id, "data", 4) == 0) {
      data_offset = body;
      data_size = chunk_size;
      have_data = true;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  if (!have_fmt || !have_data) throw Error("missing fmt/data chunk: " + path);
  if (format != 1 || bits != 16) {
    throw Error("unsupported WAV encoding (need 16-bit PCM): " + path);
  }
  if (channels == 0 || rate == 0) throw Error("corrupt fmt chunk: " + path);

  const std::size_t frame_bytes = std::size_t{2} * channels;
  const std::size_t n = data_size / frame_bytes;
  if (n == 0) throw Error("zero-length audio: " + path);
  if (channels > 1 && warnings != nullptr) {
    warnings->push_back(path + ": " + std::to_string(channels) +
                        " channels, using channel 0");
  }

  AudioClip clip;
  clip.id = path;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = bytes.data() + data_offset + i * frame_bytes;
    const int16_t v = static_cast<int16_t>(read_u16le(p));
    clip.samples[i] = static_cast<double>(v) / kInt16Scale;
  }

  if (target_rate > 0 && target_rate != clip.sample_rate) {
    clip.samples = resample(clip.samples, clip.sample_rate, target_rate);
    clip.sample_rate = target_rate;
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::string& path) {
  if (clip.samples.empty() || clip.sample_rate <= 0) {
    throw Error("invalid clip for save_wav");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);

  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_size = n * 2;
  const uint32_t rate = static_cast<uint32_t>(clip.sample_rate);
  const uint32_t byte_rate = rate * 2;

  auto put_u32 = [&out](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&out](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
  };

  out.write("RIFF", 4);
  put_u32(36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);   // PCM
  put_u16(1);   // mono
  put_u32(rate);
  put_u32(byte_rate);
  put_u16(2);   // block align
  put_u16(16);  // bits
  out.write("data", 4);
  put_u32(data_size);
  for (double s : clip.samples) {
    double v = std::lround(std::clamp(s, -1.0, 1.0) * kInt16Scale);
    v = std::clamp(v, -32768.0, 32767.0);
    put_u16(static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  if (!out) throw Error("write failed: " + path);
}

std::vector<double> resample(std::span<const double> x, int src_rate,
                             int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0) throw Error("bad resample rates");
  if (src_rate == dst_rate) return {x.begin(), x.end()};
  if (x.empty()) throw Error("resample of empty signal");

  const double ratio = static_cast<double>(dst_rate) / src_rate;
  const double cutoff = std::min(1.0, ratio);
  const int taps_per_side =
      static_cast<int>(std::ceil(16.0 / cutoff));  // wider kernel downsampling
  const std::size_t out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) * ratio));
  std::vector<double> out(std::max<std::size_t>(out_len, 1));

  const long long n = static_cast<long long>(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double center = static_cast<double>(i) / ratio;
    const long long lo = static_cast<long long>(std::floor(center)) - taps_per_side;
    const long long hi = static_cast<long long>(std::floor(center)) + taps_per_side + 1;
    double acc = 0.0, wsum = 0.0;
    for (long long j = lo; j <= hi; ++j) {
      const double d = static_cast<double>(j) - center;
      // Hann-windowed sinc
      const double win =
          0.5 + 0.5 * std::cos(M_PI * d / (taps_per_side + 1.0));
      const double w = cutoff * sinc(cutoff * d) * win;
      const long long jj = std::clamp(j, 0LL, n - 1);
      acc += w * x[static_cast<std::size_t>(jj)];
      wsum += w;
    }
    out[i] = std::clamp(wsum != 0.0 ? acc / wsum : 0.0, -1.0, 1.0);
  }
  return out;
}

std::vector<double> hann_window(int n_size) {
  std::vector<double> w(n_size);
  for (int i = 0; i < n_size; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n_size);
  }
  return w;
}

std::size_t mirror_index(long long pos, std::size_t n) {
  const long long nn = static_cast<long long>(n);
  if (pos < 0) pos = -pos;
  if (pos >= nn) pos = 2 * nn - 2 - pos;
  return static_cast<std::size_t>(pos);
}

std::size_t stft_frame_count(std::size_t n, int hop_length) {
  return n / static_cast<std::size_t>(hop_length) + 1;
}

std::vector<std::complex<double>> stft_complex(std::span<const double> x,
                                               int frame_length,
                                               int hop_length) {
  if (!is_power_of_two(static_cast<std::size_t>(frame_length))) {
    throw Error("stft frame_length must be a power of two");
  }
  if (hop_length <= 0 || hop_length > frame_length) {
    throw Error("stft hop_length must be in (0, frame_length]");
  }
  const int half = frame_length / 2;
  if (x.size() < static_cast<std::size_t>(half) + 1) {
    throw Error("signal too short for stft: need at least frame/2 + 1 samples");
  }

  const std::size_t frames = stft_frame_count(x.size(), hop_length);
  const std::size_t bins = static_cast<std::size_t>(half) + 1;
  const std::vector<double> win = hann_window(frame_length);
  const Fft fft(static_cast<std::size_t>(frame_length));

  std::vector<std::complex<double>> out(frames * bins);
  std::vector<std::complex<double>> buf(frame_length);
  for (std::size_t t = 0; t < frames; ++t) {
    const long long start =
        static_cast<long long>(t) * hop_length - half;  // relative to x[0]
    for (int i = 0; i < frame_length; ++i) {
      buf[i] = win[i] * x[mirror_index(start + i, x.size())];
    }
    fft.forward(&buf);
    for (std::size_t f = 0; f < bins; ++f) out[t * bins + f] = buf[f];
  }
  return out;
}

Spectrogram stft(std::span<const double> x, int sample_rate, int frame_length,
                 int hop_length) {
  const auto cplx = stft_complex(x, frame_length, hop_length);
  Spectrogram s;
  s.frames = stft_frame_count(x.size(), hop_length);
  s.bins = static_cast<std::size_t>(frame_length) / 2 + 1;
  s.frame_length = frame_length;
  s.hop_length = hop_length;
  s.sample_rate = sample_rate;
  s.magnitudes.resize(cplx.size());
  for (std::size_t i = 0; i < cplx.size(); ++i) {
    s.magnitudes[i] = std::abs(cplx[i]);
  }
  return s;
}

Spectrogram stft(const AudioClip& clip, int frame_length, int hop_length) {
  return stft(clip.samples, clip.sample_rate, frame_length, hop_length);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);
  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();

  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos
                                                   : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw Error("manifest " + path + " line " + std::to_string(line_no) +
                  ": expected path<TAB>transcript<TAB>speaker_id");
    }
    ManifestEntry e;
    e.path = line.substr(0, t1);
    e.transcript = line.substr(t1 + 1, t2 - t1 - 1);
    e.speaker_id = line.substr(t2 + 1);
    if (e.path.empty()) {
      throw Error("manifest " + path + " line " + std::to_string(line_no) +
                  ": empty path");
    }
    if (!seen.insert(e.path).second) {
      throw Error("manifest " + path + " line " + std::to_string(line_no) +
                  ": duplicate path " + e.path);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string resolve_manifest_path(const DatasetManifest& manifest,
                                  const ManifestEntry& entry) {
  std::filesystem::path p(entry.path);
  if (p.is_absolute() || manifest.base_dir.empty()) return entry.path;
  return (std::filesystem::path(manifest.base_dir) / p).string();
}

namespace {
constexpr char kTfMagic[7] = {'D', 'U', 'A', 'P', 'T', 'F', '1'};
}  // namespace

void save_tf_matrix(const std::string& path, std::size_t rows,
                    std::size_t cols, std::span<const double> values) {
  if (values.size() != rows * cols) {
    throw Error("matrix dump shape does not match value count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write matrix dump: " + path);
  out.write(kTfMagic, sizeof(kTfMagic));
  const auto r = static_cast<std::uint32_t>(rows);
  const auto c = static_cast<std::uint32_t>(cols);
  out.write(reinterpret_cast<const char*>(&r), sizeof(r));
  out.write(reinterpret_cast<const char*>(&c), sizeof(c));
  for (const double v : values) {
    const auto f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof(f));
  }
  if (!out) throw Error("write failed: " + path);
}

TfMatrix load_tf_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open matrix dump: " + path);
  char magic[sizeof(kTfMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kTfMagic, sizeof(magic)) != 0) {
    throw Error("not a matrix dump (wrong format or version): " + path);
  }
  std::uint32_t r = 0;
  std::uint32_t c = 0;
  if (!in.read(reinterpret_cast<char*>(&r), sizeof(r)) ||
      !in.read(reinterpret_cast<char*>(&c), sizeof(c))) {
    throw Error("truncated matrix dump header: " + path);
  }
  TfMatrix m;
  m.rows = r;
  m.cols = c;
  m.values.resize(static_cast<std::size_t>(r) * c);
  for (double& v : m.values) {
    float f = 0.0f;
    if (!in.read(reinterpret_cast<char*>(&f), sizeof(f))) {
      throw Error("truncated matrix dump payload: " + path);
    }
    v = f;
  }
  return m;
}

}  // namespace duap
