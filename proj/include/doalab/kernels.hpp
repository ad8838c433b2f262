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

// Inner loops of the steered-response-power estimators. Each backend
// executes the same sequence of IEEE double operations per element (no
// fused multiply-add), so every backend produces bit-identical results and
// the choice only affects throughput.

#include <cstddef>
#include <string_view>
#include <vector>

namespace doalab::kernels {

struct KernelTable {
  const char* name;

  // out[i] = m > eps ? 1/m : eps, with m = sqrt(re[i]² + im[i]²).
  void (*phat_weights)(const double* re, const double* im, double eps, double* out,
                       std::size_t n);

  // out = a · conj(b), element-wise on split complex arrays.
  void (*cross_spectrum)(const double* a_re, const double* a_im, const double* b_re,
                         const double* b_im, double* out_re, double* out_im,
                         std::size_t n);

  // For k in [0, bins): out[k] = Σ_p (g_re[p·stride+k]·x_re[p·stride+k]
  //                                   − g_im[p·stride+k]·x_im[p·stride+k]),
  // accumulated in increasing p.
  void (*steered_power)(const double* g_re, const double* g_im, const double* x_re,
                        const double* x_im, std::size_t pairs, std::size_t stride,
                        std::size_t bins, double* out);
};

const KernelTable& scalar();
// nullptr when the backend was not compiled in or the CPU lacks support.
const KernelTable* avx2();
const KernelTable* neon();

// Every backend usable on this machine, scalar first.
std::vector<const KernelTable*> available();

// Best available backend; DOALAB_SIMD=scalar|avx2|neon overrides.
const KernelTable& active();

// Force a backend by name ("auto" restores automatic selection).
void select(std::string_view name);

}  // namespace doalab::kernels
