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

#include <atomic>
#include <cstdlib>
#include <string>

#include "doalab/error.hpp"
#include "doalab/kernels.hpp"

namespace doalab::kernels {

#if defined(DOALAB_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(DOALAB_HAVE_NEON)
const KernelTable& neon_table();
#endif

namespace {

std::atomic<const KernelTable*> g_forced{nullptr};

const KernelTable* by_name(std::string_view name) {
  if (name == "scalar") return &scalar();
  if (name == "avx2") return avx2();
  if (name == "neon") return neon();
  return nullptr;
}

const KernelTable& detect() {
  if (const char* env = std::getenv("DOALAB_SIMD")) {
    const std::string_view name(env);
    if (name != "auto" && !name.empty()) {
      if (const KernelTable* t = by_name(name)) return *t;
      throw Error("DOALAB_SIMD requests unavailable backend '" + std::string(name) + "'",
                  ErrorKind::kUsage);
    }
  }
  if (const KernelTable* t = avx2()) return *t;
  if (const KernelTable* t = neon()) return *t;
  return scalar();
}

}  // namespace

const KernelTable* avx2() {
#if defined(DOALAB_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon() {
#if defined(DOALAB_HAVE_NEON)
  return &neon_table();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available() {
  std::vector<const KernelTable*> out{&scalar()};
  if (const KernelTable* t = avx2()) out.push_back(t);
  if (const KernelTable* t = neon()) out.push_back(t);
  return out;
}

const KernelTable& active() {
  if (const KernelTable* forced = g_forced.load()) return *forced;
  static const KernelTable& detected = detect();
  return detected;
}

void select(std::string_view name) {
  if (name == "auto") {
    g_forced.store(nullptr);
    return;
  }
  const KernelTable* t = by_name(name);
  if (t == nullptr) {
    throw Error("kernel backend '" + std::string(name) + "' is not available",
                ErrorKind::kUsage);
  }
  g_forced.store(t);
}

}  // namespace doalab::kernels
