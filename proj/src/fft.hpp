// Copyright 2026 The doalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Thin RAII layer over FFTW's real-to-complex transforms. Plans are created
// once per size behind a mutex (the FFTW planner is not thread-safe) and
// executed through the new-array interface, which is.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace doalab::detail {

class RealFft {
 public:
  explicit RealFft(std::size_t length);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t length() const { return length_; }
  std::size_t bins() const { return length_ / 2 + 1; }

  // Unnormalized forward transform; out has length()/2+1 bins.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Unnormalized inverse; multiply by 1/length() to invert forward().
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::size_t length_;
  double* real_buf_;
  void* complex_buf_;
  void* forward_plan_;
  void* inverse_plan_;
};

std::size_t next_pow2(std::size_t n);

// Linear convolution of x with h, returning samples [offset, offset + count)
// of the full result.
std::vector<double> fft_convolve(std::span<const double> x, std::span<const double> h,
                                 std::size_t offset, std::size_t count);

}  // namespace doalab::detail
