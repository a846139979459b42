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

#include "duap/fft.hpp"

#include <cmath>

#include "duap/common.hpp"

namespace duap {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Fft::Fft(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) throw Error("FFT size must be a power of two");
  rev_.resize(n);
  std::size_t log2n = 0;
  while ((std::size_t{1} << log2n) < n) ++log2n;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < log2n; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
    }
    rev_[i] = r;
  }
  twiddle_.resize(n / 2);
  const double base = -2.0 * M_PI / static_cast<double>(n);
  for (std::size_t k = 0; k < n / 2; ++k) {
    twiddle_[k] = {std::cos(base * static_cast<double>(k)),
                   std::sin(base * static_cast<double>(k))};
  }
}

void Fft::forward(std::vector<std::complex<double>>* data) const {
  transform(data, false);
}

void Fft::inverse(std::vector<std::complex<double>>* data) const {
  transform(data, true);
}

void Fft::transform(std::vector<std::complex<double>>* data,
                    bool inverse) const {
  if (data->size() != n_) throw Error("FFT input size mismatch");
  auto& x = *data;
  for (std::size_t i = 0; i < n_; ++i) {
    if (rev_[i] > i) std::swap(x[i], x[rev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<double> w = twiddle_[k * stride];
        if (inverse) w = std::conj(w);
        const std::complex<double> a = x[start + k];
        const std::complex<double> b = x[start + k + half] * w;
        x[start + k] = a + b;
        x[start + k + half] = a - b;
      }
    }
  }
}

}  // namespace duap
