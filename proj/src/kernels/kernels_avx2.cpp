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

// Compiled with -mavx2. Only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "doalab/kernels.hpp"

namespace doalab::kernels {
namespace {

void phat_weights(const double* re, const double* im, double eps, double* out,
                  std::size_t n) {
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(re + i);
    const __m256d m = _mm256_loadu_pd(im + i);
    const __m256d p = _mm256_mul_pd(r, r);
    const __m256d mag = _mm256_sqrt_pd(_mm256_add_pd(p, _mm256_mul_pd(m, m)));
    const __m256d inv = _mm256_div_pd(one, mag);
    const __m256d above = _mm256_cmp_pd(mag, veps, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(veps, inv, above));
  }
  for (; i < n; ++i) {
    const double p = re[i] * re[i];
    const double mag = std::sqrt(p + im[i] * im[i]);
    out[i] = mag > eps ? 1.0 / mag : eps;
  }
}

void cross_spectrum(const double* a_re, const double* a_im, const double* b_re,
                    const double* b_im, double* out_re, double* out_im, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ar = _mm256_loadu_pd(a_re + i);
    const __m256d ai = _mm256_loadu_pd(a_im + i);
    const __m256d br = _mm256_loadu_pd(b_re + i);
    const __m256d bi = _mm256_loadu_pd(b_im + i);
    const __m256d rr = _mm256_mul_pd(ar, br);
    const __m256d ii = _mm256_mul_pd(ai, bi);
    const __m256d ir = _mm256_mul_pd(ai, br);
    const __m256d ri = _mm256_mul_pd(ar, bi);
    _mm256_storeu_pd(out_re + i, _mm256_add_pd(rr, ii));
    _mm256_storeu_pd(out_im + i, _mm256_sub_pd(ir, ri));
  }
  for (; i < n; ++i) {
    const double rr = a_re[i] * b_re[i];
    const double ii = a_im[i] * b_im[i];
    const double ir = a_im[i] * b_re[i];
    const double ri = a_re[i] * b_im[i];
    out_re[i] = rr + ii;
    out_im[i] = ir - ri;
  }
}

void steered_power(const double* g_re, const double* g_im, const double* x_re,
                   const double* x_im, std::size_t pairs, std::size_t stride,
                   std::size_t bins, double* out) {
  std::size_t k = 0;
  for (; k + 4 <= bins; k += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = p * stride + k;
      const __m256d a = _mm256_mul_pd(_mm256_loadu_pd(g_re + i), _mm256_loadu_pd(x_re + i));
      const __m256d b = _mm256_mul_pd(_mm256_loadu_pd(g_im + i), _mm256_loadu_pd(x_im + i));
      acc = _mm256_add_pd(acc, _mm256_sub_pd(a, b));
    }
    _mm256_storeu_pd(out + k, acc);
  }
  for (; k < bins; ++k) {
    double acc = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = p * stride + k;
      const double a = g_re[i] * x_re[i];
      const double b = g_im[i] * x_im[i];
      acc = acc + (a - b);
    }
    out[k] = acc;
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", &phat_weights, &cross_spectrum, &steered_power};
  return table;
}

}  // namespace doalab::kernels
