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

#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "doalab/error.hpp"

namespace doalab::detail {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(std::size_t length) : length_(length) {
  require(length >= 2, "fft length must be at least 2");
  real_buf_ = fftw_alloc_real(length_);
  complex_buf_ = fftw_alloc_complex(bins());
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* cbuf = static_cast<fftw_complex*>(complex_buf_);
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(length_), real_buf_, cbuf,
                                       FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(length_), cbuf, real_buf_,
                                       FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(real_buf_);
  fftw_free(complex_buf_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  std::fill(real_buf_, real_buf_ + length_, 0.0);
  std::copy_n(in.begin(), std::min(in.size(), length_), real_buf_);
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  auto* c = static_cast<fftw_complex*>(complex_buf_);
  for (std::size_t k = 0; k < bins(); ++k) out[k] = {c[k][0], c[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  auto* c = static_cast<fftw_complex*>(complex_buf_);
  for (std::size_t k = 0; k < bins(); ++k) {
    c[k][0] = in[k].real();
    c[k][1] = in[k].imag();
  }
  // c2r destroys its input; the buffer is refilled on every call.
  fftw_execute(static_cast<fftw_plan>(inverse_plan_));
  std::copy_n(real_buf_, length_, out.begin());
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(std::span<const double> x, std::span<const double> h,
                                 std::size_t offset, std::size_t count) {
  std::vector<double> result(count, 0.0);
  if (x.empty() || h.empty()) return result;
  const std::size_t full = x.size() + h.size() - 1;
  const std::size_t n = next_pow2(full);
  RealFft fft(n);
  std::vector<std::complex<double>> xf(fft.bins()), hf(fft.bins());
  fft.forward(x, xf);
  fft.forward(h, hf);
  for (std::size_t k = 0; k < xf.size(); ++k) xf[k] *= hf[k];
  std::vector<double> y(n);
  fft.inverse(xf, y);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = offset + i;
    if (t < full) result[i] = y[t] * scale;
  }
  return result;
}

}  // namespace doalab::detail
