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

#include "doalab/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "doalab/error.hpp"

namespace doalab {
namespace {

constexpr char kMaskMagic[8] = {'D', 'O', 'A', 'M', 'A', 'S', 'K', '1'};

void check_oracle_inputs(const MultichannelSpectrogram& direct,
                         const MultichannelSpectrogram& mixture, std::size_t channel) {
  if (!direct.same_shape(mixture)) throw Error("shape mismatch between direct and mixture");
  require(channel < mixture.num_channels(), "mask channel out of range");
}

}  // namespace

AttentionMask::AttentionMask(std::size_t bins, std::size_t frames, double fill)
    : bins_(bins), frames_(frames), weights_(bins * frames, fill) {}

double AttentionMask::sum() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

void AttentionMask::validate() const {
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0 && w <= 1.0, "mask weight outside [0, 1]");
  }
}

AttentionMask psm_mask(const MultichannelSpectrogram& direct,
                       const MultichannelSpectrogram& mixture, std::size_t channel) {
  check_oracle_inputs(direct, mixture, channel);
  AttentionMask m(mixture.num_bins(), mixture.num_frames());
  for (std::size_t k = 0; k < m.num_bins(); ++k) {
    for (std::size_t n = 0; n < m.num_frames(); ++n) {
      const cdouble xd = direct.at(channel, k, n);
      const cdouble y = mixture.at(channel, k, n);
      const double pd = std::norm(xd);
      const double pr = std::norm(y - xd);
      if (pd == 0.0 || std::abs(y) == 0.0) continue;
      if (pr == 0.0) {
        m.at(k, n) = 1.0;
        continue;
      }
      // cos(∠Xd − ∠Y) = Re{Xd·conj(Y)} / (|Xd||Y|)
      const double cos_diff = (xd * std::conj(y)).real() / (std::abs(xd) * std::abs(y));
      const double v = std::sqrt(pd / (pd + pr)) * std::clamp(cos_diff, -1.0, 1.0);
      m.at(k, n) = std::clamp(v, 0.0, 1.0);
    }
  }
  return m;
}

AttentionMask magnitude_ratio_mask(const MultichannelSpectrogram& direct,
                                   const MultichannelSpectrogram& mixture,
                                   std::size_t channel) {
  check_oracle_inputs(direct, mixture, channel);
  AttentionMask m(mixture.num_bins(), mixture.num_frames());
  for (std::size_t k = 0; k < m.num_bins(); ++k) {
    for (std::size_t n = 0; n < m.num_frames(); ++n) {
      const double ay = std::abs(mixture.at(channel, k, n));
      if (ay == 0.0) continue;
      m.at(k, n) = std::min(1.0, std::abs(direct.at(channel, k, n)) / ay);
    }
  }
  return m;
}

AttentionMask binarize(const AttentionMask& mask, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must be in [0, 1]");
  AttentionMask out(mask.num_bins(), mask.num_frames());
  for (std::size_t k = 0; k < mask.num_bins(); ++k) {
    for (std::size_t n = 0; n < mask.num_frames(); ++n) {
      out.at(k, n) = mask.at(k, n) < threshold ? 0.0 : 1.0;
    }
  }
  return out;
}

AttentionMask random_band_mask(std::size_t bins, std::size_t frames, std::size_t num_bands,
                               std::uint64_t seed) {
  if (num_bands > bins) throw Error("num_bands exceeds the number of bins");
  std::vector<std::size_t> rows(bins);
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; std::shuffle's draw sequence is library-specific.
  for (std::size_t i = 0; i < num_bands; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (bins - i));
    std::swap(rows[i], rows[j]);
  }
  AttentionMask m(bins, frames);
  for (std::size_t i = 0; i < num_bands; ++i) {
    for (std::size_t n = 0; n < frames; ++n) m.at(rows[i], n) = 1.0;
  }
  return m;
}

AttentionMask band_range_mask(std::size_t bins, std::size_t frames, std::size_t lo,
                              std::size_t hi) {
  if (lo > hi || hi >= bins) throw Error("band range out of range");
  AttentionMask m(bins, frames);
  for (std::size_t k = lo; k <= hi; ++k) {
    for (std::size_t n = 0; n < frames; ++n) m.at(k, n) = 1.0;
  }
  return m;
}

AttentionMask slice_frames(const AttentionMask& mask, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= mask.num_frames(), "frame slice out of range");
  AttentionMask out(mask.num_bins(), end - begin);
  for (std::size_t k = 0; k < mask.num_bins(); ++k) {
    for (std::size_t n = begin; n < end; ++n) out.at(k, n - begin) = mask.at(k, n);
  }
  return out;
}

AttentionMask multiply(const AttentionMask& a, const AttentionMask& b) {
  if (a.num_bins() != b.num_bins() || a.num_frames() != b.num_frames()) {
    throw Error("mask shape mismatch");
  }
  AttentionMask out(a.num_bins(), a.num_frames());
  for (std::size_t k = 0; k < a.num_bins(); ++k) {
    for (std::size_t n = 0; n < a.num_frames(); ++n) out.at(k, n) = a.at(k, n) * b.at(k, n);
  }
  return out;
}

void write_mask_file(const std::filesystem::path& path, const AttentionMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write mask file: " + path.string());
  out.write(kMaskMagic, sizeof(kMaskMagic));
  const auto k = static_cast<std::uint32_t>(mask.num_bins());
  const auto n = static_cast<std::uint32_t>(mask.num_frames());
  out.write(reinterpret_cast<const char*>(&k), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (double w : mask.weights()) {
    const float f = static_cast<float>(w);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
}

AttentionMask read_mask_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mask file: " + path.string());
  char magic[8];
  std::uint32_t k = 0, n = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&k), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  if (!in || std::memcmp(magic, kMaskMagic, 8) != 0) {
    throw Error("not a DOAMASK1 file: " + path.string());
  }
  AttentionMask mask(k, n);
  for (std::size_t b = 0; b < k; ++b) {
    for (std::size_t f = 0; f < n; ++f) {
      float w = 0.0f;
      in.read(reinterpret_cast<char*>(&w), 4);
      mask.at(b, f) = w;
    }
  }
  if (!in) throw Error("truncated mask file: " + path.string());
  mask.validate();
  return mask;
}

}  // namespace doalab
