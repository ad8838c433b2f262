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

#include <cmath>

#include "doalab/kernels.hpp"

namespace doalab::kernels {
namespace {

void phat_weights(const double* re, const double* im, double eps, double* out,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p = re[i] * re[i];
    const double m = std::sqrt(p + im[i] * im[i]);
    out[i] = m > eps ? 1.0 / m : eps;
  }
}

void cross_spectrum(const double* a_re, const double* a_im, const double* b_re,
                    const double* b_im, double* out_re, double* out_im, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
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
  for (std::size_t k = 0; k < bins; ++k) out[k] = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t base = p * stride;
    for (std::size_t k = 0; k < bins; ++k) {
      const double a = g_re[base + k] * x_re[base + k];
      const double b = g_im[base + k] * x_im[base + k];
      out[k] = out[k] + (a - b);
    }
  }
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar", &phat_weights, &cross_spectrum,
                                 &steered_power};
  return table;
}

}  // namespace doalab::kernels
