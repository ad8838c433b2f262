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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "doalab/signal.hpp"

namespace doalab {

/// Time-frequency attention weights in [0, 1], K×N, stored [bin][frame].
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t bins, std::size_t frames, double fill = 0.0);

  static AttentionMask ones(std::size_t bins, std::size_t frames) {
    return AttentionMask(bins, frames, 1.0);
  }

  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }

  double& at(std::size_t k, std::size_t n) { return weights_[k * frames_ + n]; }
  double at(std::size_t k, std::size_t n) const { return weights_[k * frames_ + n]; }

  const std::vector<double>& weights() const { return weights_; }
  double sum() const;

  // Throws if any weight is outside [0, 1] or non-finite.
  void validate() const;

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t bins_ = 0;
  std::size_t frames_ = 0;
  std::vector<double> weights_;
};

// Phase-sensitive mask of the direct component against the mixture:
// max{0, sqrt(|Xd|²/(|Xd|² + |Y−Xd|²)) · cos(∠Xd − ∠Y)}, 0 where both vanish.
AttentionMask psm_mask(const MultichannelSpectrogram& direct,
                       const MultichannelSpectrogram& mixture, std::size_t channel = 0);

// min(1, |Xd| / |Y|), 0 where |Y| = 0.
AttentionMask magnitude_ratio_mask(const MultichannelSpectrogram& direct,
                                   const MultichannelSpectrogram& mixture,
                                   std::size_t channel = 0);

// 0 where weight < threshold, else 1.
AttentionMask binarize(const AttentionMask& mask, double threshold);

// num_bands bins chosen uniformly without replacement, active in every frame.
AttentionMask random_band_mask(std::size_t bins, std::size_t frames, std::size_t num_bands,
                               std::uint64_t seed);

// Bins lo..hi inclusive active in every frame.
AttentionMask band_range_mask(std::size_t bins, std::size_t frames, std::size_t lo,
                              std::size_t hi);

// Frames [begin, end) of a mask.
AttentionMask slice_frames(const AttentionMask& mask, std::size_t begin, std::size_t end);

// Element-wise product of two masks of equal shape.
AttentionMask multiply(const AttentionMask& a, const AttentionMask& b);

// Mask raster file: "DOAMASK1", u32 K, u32 N (little endian), then K·N
// float32 weights in row-major [bin][frame] order.
void write_mask_file(const std::filesystem::path& path, const AttentionMask& mask);
AttentionMask read_mask_file(const std::filesystem::path& path);

}  // namespace doalab
