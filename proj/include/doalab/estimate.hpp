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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "doalab/attention.hpp"
#include "doalab/geometry.hpp"
#include "doalab/signal.hpp"

namespace doalab {

inline constexpr double kDefaultPhatEpsilon = 1e-8;

/// Half-open frame interval [begin, end).
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  static FrameRange all(std::size_t frames) { return {0, frames}; }
  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
};

// Range of `count` frames centered in a file of `frames` frames (clamped).
FrameRange centered_range(std::size_t frames, std::size_t count);

/// Per-bin spectral weights, Q×K×N, non-negative.
class PhatWeighting {
 public:
  PhatWeighting(std::size_t channels, std::size_t bins, std::size_t frames);

  std::size_t num_channels() const { return channels_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }

  double& at(std::size_t q, std::size_t k, std::size_t n) {
    return values_[(q * frames_ + n) * bins_ + k];
  }
  double at(std::size_t q, std::size_t k, std::size_t n) const {
    return values_[(q * frames_ + n) * bins_ + k];
  }
  const double* frame(std::size_t q, std::size_t n) const {
    return values_.data() + (q * frames_ + n) * bins_;
  }
  double* frame(std::size_t q, std::size_t n) {
    return values_.data() + (q * frames_ + n) * bins_;
  }

  bool operator==(const PhatWeighting&) const = default;

 private:
  std::size_t channels_, bins_, frames_;
  std::vector<double> values_;
};

// 1/|Y| where |Y| > epsilon, epsilon elsewhere.
PhatWeighting phat_weighting(const MultichannelSpectrogram& y,
                             double epsilon = kDefaultPhatEpsilon);

// W[q,k,n] · M[k,n], the mask broadcast over channels.
PhatWeighting mask_weighting(const PhatWeighting& w, const AttentionMask& mask);

/// Weighted cross-spectra Φ[k,n,q1,q2] = Y[q1]·W[q1]·W[q2]·conj(Y[q2]).
/// Only q1 ≤ q2 is stored; the lower triangle is returned conjugated.
/// Off-diagonal pairs come first, ordered (0,1), (0,2), …, (Q-2,Q-1).
class CrossSpectralTensor {
 public:
  CrossSpectralTensor(std::size_t bins, std::size_t frames, std::size_t mics);

  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t num_mics() const { return mics_; }
  std::size_t num_pairs() const { return mics_ * (mics_ - 1) / 2; }

  cdouble at(std::size_t k, std::size_t n, std::size_t q1, std::size_t q2) const;

  // Storage slot of (q1, q2) with q1 ≤ q2.
  std::size_t slot(std::size_t q1, std::size_t q2) const;
  std::size_t pair_first(std::size_t p) const { return pairs_[p].first; }
  std::size_t pair_second(std::size_t p) const { return pairs_[p].second; }

  // Split storage, [slot][frame][bin].
  double* re(std::size_t s, std::size_t n) { return re_.data() + (s * frames_ + n) * bins_; }
  double* im(std::size_t s, std::size_t n) { return im_.data() + (s * frames_ + n) * bins_; }
  const double* re(std::size_t s, std::size_t n) const {
    return re_.data() + (s * frames_ + n) * bins_;
  }
  const double* im(std::size_t s, std::size_t n) const {
    return im_.data() + (s * frames_ + n) * bins_;
  }
  std::size_t slot_stride() const { return frames_ * bins_; }

 private:
  std::size_t bins_, frames_, mics_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<double> re_, im_;
};

CrossSpectralTensor cross_spectral_tensor(const MultichannelSpectrogram& y,
                                          const PhatWeighting& w);

/// DOA pseudo-likelihood over a grid.
struct SpatialPowerSpectrum {
  std::vector<double> values;
  bool normalized = false;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t c) const { return values[c]; }
};

/// Per-frame spectra, C×N.
class FrameSpectra {
 public:
  FrameSpectra(std::size_t directions, std::size_t frames)
      : directions_(directions), frames_(frames), values_(directions * frames, 0.0) {}

  std::size_t num_directions() const { return directions_; }
  std::size_t num_frames() const { return frames_; }
  double& at(std::size_t c, std::size_t n) { return values_[c * frames_ + n]; }
  double at(std::size_t c, std::size_t n) const { return values_[c * frames_ + n]; }

 private:
  std::size_t directions_, frames_;
  std::vector<double> values_;
};

/// Per-bin spectra E_NB, C×K×N, stored [direction][frame][bin].
class NarrowbandSpectra {
 public:
  NarrowbandSpectra(std::size_t directions, std::size_t bins, std::size_t frames)
      : directions_(directions),
        bins_(bins),
        frames_(frames),
        values_(directions * bins * frames, 0.0) {}

  std::size_t num_directions() const { return directions_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }
  double& at(std::size_t c, std::size_t k, std::size_t n) {
    return values_[(c * frames_ + n) * bins_ + k];
  }
  double at(std::size_t c, std::size_t k, std::size_t n) const {
    return values_[(c * frames_ + n) * bins_ + k];
  }
  double* frame(std::size_t c, std::size_t n) {
    return values_.data() + (c * frames_ + n) * bins_;
  }

 private:
  std::size_t directions_, bins_, frames_;
  std::vector<double> values_;
};

// Steered response power summed over frames in `range`, all bins and all
// microphone pairs, divided by N·K·(Q-1)² with N = range.size().
SpatialPowerSpectrum srp(const CrossSpectralTensor& phi, const SteeringMatrix& d,
                         FrameRange range);

// srp() of every single frame in `range` (column n is frame range.begin + n).
FrameSpectra per_frame_srp(const CrossSpectralTensor& phi, const SteeringMatrix& d,
                           FrameRange range);

// The per-(k, n) terms of srp(); summing over k and n reproduces srp(phi, d, range).
NarrowbandSpectra narrowband_srp(const CrossSpectralTensor& phi, const SteeringMatrix& d,
                                 FrameRange range);

// Σ M·E_NB / Σ M over bins and frames. mask frames must equal E_NB frames.
SpatialPowerSpectrum output_masking(const NarrowbandSpectra& e_nb, const AttentionMask& mask);

SpatialPowerSpectrum normalize_sps(const SpatialPowerSpectrum& s);

// Arithmetic mean of the frames in `range`.
SpatialPowerSpectrum aggregate_frames(const FrameSpectra& e, FrameRange range);

// Grid angle of the maximum; ties resolve to the lowest index.
double pick_doa(const SpatialPowerSpectrum& s, const DoaGrid& grid);
std::size_t argmax_index(const SpatialPowerSpectrum& s);

// (1/C)·Σ (est − clean)².
double sps_loss(const SpatialPowerSpectrum& est, const SpatialPowerSpectrum& clean);

// ((Q−1)²/2)·(4·K·C + 6·K) + 5·K·Q flops per frame.
std::uint64_t srp_flops(std::uint64_t bins, std::uint64_t directions, std::uint64_t mics);

struct EstimatorOptions {
  double epsilon = kDefaultPhatEpsilon;
  // Zero the attention of bins above the array's spatial-aliasing frequency.
  bool exclude_aliased_bins = false;
  // MUSIC only: added to the covariance diagonal, relative to its trace / Q.
  double diagonal_loading = 0.0;
  // MUSIC only, used by run_method.
  std::size_t music_sources = 1;
};

// Bins above c / (2·spacing) zeroed, all others 1.
AttentionMask alias_limit_mask(const ArrayGeometry& geom, std::size_t bins,
                               std::size_t frames, double sample_rate,
                               std::size_t fft_length);

SteeringMatrix steering_for(const MultichannelSpectrogram& y, const DoaGrid& grid,
                            const ArrayGeometry& geom);

// SRP-PHAT, normalized. Identical to srp_mp with an all-ones mask.
SpatialPowerSpectrum srp_phat(const MultichannelSpectrogram& y, const DoaGrid& grid,
                              const ArrayGeometry& geom, FrameRange range,
                              const EstimatorOptions& opts = {});

// SRP with mask-modified PHAT weighting, normalized.
SpatialPowerSpectrum srp_mp(const MultichannelSpectrogram& y, const AttentionMask& mask,
                            const DoaGrid& grid, const ArrayGeometry& geom,
                            FrameRange range, const EstimatorOptions& opts = {});

// Narrowband SRP-PHAT combined by output masking, normalized.
SpatialPowerSpectrum srp_om(const MultichannelSpectrogram& y, const AttentionMask& mask,
                            const DoaGrid& grid, const ArrayGeometry& geom,
                            FrameRange range, const EstimatorOptions& opts = {});

// MUSIC with per-band pseudospectrum normalization; bands averaged with
// weights Σ_n M[k,n]. Normalized.
SpatialPowerSpectrum norm_music(const MultichannelSpectrogram& y, const AttentionMask& mask,
                                const DoaGrid& grid, const ArrayGeometry& geom,
                                std::size_t num_sources, FrameRange range,
                                const EstimatorOptions& opts = {});

enum class Method { kSrpP, kSrpMp, kSrpOm, kMusic };

Method parse_method(std::string_view name);
std::string method_name(Method method);

// Runs `method` (the mask is ignored by kSrpP).
SpatialPowerSpectrum run_method(Method method, const MultichannelSpectrogram& y,
                                const AttentionMask& mask, const DoaGrid& grid,
                                const ArrayGeometry& geom, FrameRange range,
                                const EstimatorOptions& opts = {});

}  // namespace doalab
