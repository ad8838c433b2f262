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
#include <vector>

#include "doalab/signal.hpp"

namespace doalab {

inline constexpr double kDefaultSpeedOfSound = 343.0;

/// Linear array described by distances to the reference microphone.
struct ArrayGeometry {
  std::vector<double> mic_distances;  // meters, mic_distances[0] == 0
  double speed_of_sound = kDefaultSpeedOfSound;

  static ArrayGeometry uniform_linear(std::size_t num_mics, double spacing,
                                      double speed_of_sound = kDefaultSpeedOfSound);

  std::size_t num_mics() const { return mic_distances.size(); }
  // Frequency above which adjacent microphones alias, c / (2 · min spacing).
  double spatial_alias_frequency() const;
  void validate() const;
};

/// Uniform DOA grid over [0°, 180°].
class DoaGrid {
 public:
  explicit DoaGrid(std::vector<double> angles_deg);

  std::size_t size() const { return angles_.size(); }
  double operator[](std::size_t c) const { return angles_[c]; }
  const std::vector<double>& angles() const { return angles_; }
  double spacing() const { return 180.0 / static_cast<double>(angles_.size() - 1); }

  // Index of the closest grid angle; exact midpoints round up.
  std::size_t nearest_index(double angle_deg) const;

 private:
  std::vector<double> angles_;
};

DoaGrid make_grid(std::size_t count);

// cos of an angle in degrees, exact at 0, 90 and 180 and antisymmetric
// about 90° (cos_deg(180 - a) == -cos_deg(a)).
double cos_deg(double angle_deg);

// Physical frequency of zero-based bin k.
inline double bin_frequency(std::size_t k, double sample_rate, std::size_t fft_length) {
  return static_cast<double>(k) * sample_rate / static_cast<double>(fft_length);
}

/// Far-field relative transfer functions, C×K×Q, reference microphone 0.
class SteeringMatrix {
 public:
  SteeringMatrix(std::size_t directions, std::size_t bins, std::size_t mics);

  std::size_t num_directions() const { return directions_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_mics() const { return mics_; }

  cdouble& at(std::size_t c, std::size_t k, std::size_t q) {
    return values_[(c * bins_ + k) * mics_ + q];
  }
  cdouble at(std::size_t c, std::size_t k, std::size_t q) const {
    return values_[(c * bins_ + k) * mics_ + q];
  }

 private:
  std::size_t directions_, bins_, mics_;
  std::vector<cdouble> values_;
};

// D[c,k,q] = exp(-j·2π·f_k·cos(θ_c)·d_q / c_s), f_k = k·sample_rate/fft_length.
SteeringMatrix steering_matrix(const DoaGrid& grid, const ArrayGeometry& geom,
                               std::size_t bins, double sample_rate,
                               std::size_t fft_length);

}  // namespace doalab
