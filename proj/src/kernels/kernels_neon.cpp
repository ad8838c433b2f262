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

// AArch64 only; Advanced SIMD is part of the base ISA there.

#include <arm_neon.h>

#include <cmath>

#include "doalab/kernels.hpp"

namespace doalab::kernels {
namespace {

void phat_weights(const double* re, const double* im, double eps, double* out,
                  std::size_t n) {
  const float64x2_t veps = vdupq_n_f64(eps);
  const float64x2_t one = vdupq_n_f64(1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t r = vld1q_f64(re + i);
    const float64x2_t m = vld1q_f64(im + i);
    const float64x2_t p = vmulq_f64(r, r);
    const float64x2_t mag = vsqrtq_f64(vaddq_f64(p, vmulq_f64(m, m)));
    const float64x2_t inv = vdivq_f64(one, mag);
    const uint64x2_t above = vcgtq_f64(mag, veps);
    vst1q_f64(out + i, vbslq_f64(above, inv, veps));
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
  for (; i + 2 <= n; i += 2) {
    const float64x2_t ar = vld1q_f64(a_re + i);
    const float64x2_t ai = vld1q_f64(a_im + i);
    const float64x2_t br = vld1q_f64(b_re + i);
    const float64x2_t bi = vld1q_f64(b_im + i);
    vst1q_f64(out_re + i, vaddq_f64(vmulq_f64(ar, br), vmulq_f64(ai, bi)));
    vst1q_f64(out_im + i, vsubq_f64(vmulq_f64(ai, br), vmulq_f64(ar, bi)));
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
  for (; k + 2 <= bins; k += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = p * stride + k;
      const float64x2_t a = vmulq_f64(vld1q_f64(g_re + i), vld1q_f64(x_re + i));
      const float64x2_t b = vmulq_f64(vld1q_f64(g_im + i), vld1q_f64(x_im + i));
      acc = vaddq_f64(acc, vsubq_f64(a, b));
    }
    vst1q_f64(out + k, acc);
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

const KernelTable& neon_table() {
  static const KernelTable table{"neon", &phat_weights, &cross_spectrum, &steered_power};
  return table;
}

}  // namespace doalab::kernels
