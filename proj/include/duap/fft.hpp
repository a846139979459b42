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

#ifndef DUAP_FFT_HPP_
#define DUAP_FFT_HPP_

#include <complex>
#include <cstddef>
#include <vector>

namespace duap {

bool is_power_of_two(std::size_t n);

// Iterative radix-2 FFT for power-of-two sizes. Twiddles and the
// bit-reversal permutation are built once per instance; instances are
// immutable after construction and safe to share across threads.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  // X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N). No normalization.
  void forward(std::vector<std::complex<double>>* data) const;

  // x[n] = sum_k X[k] * exp(+2*pi*i*k*n/N). No 1/N factor.
  void inverse(std::vector<std::complex<double>>* data) const;

 private:
  void transform(std::vector<std::complex<double>>* data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<std::complex<double>> twiddle_;  // exp(-2*pi*i*k/N), k < N/2
};

}  // namespace duap

#endif  // DUAP_FFT_HPP_
