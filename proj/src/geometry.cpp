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

#include "doalab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "doalab/error.hpp"

namespace doalab {

ArrayGeometry ArrayGeometry::uniform_linear(std::size_t num_mics, double spacing,
                                            double speed_of_sound) {
  ArrayGeometry g;
  g.speed_of_sound = speed_of_sound;
  for (std::size_t q = 0; q < num_mics; ++q) {
    g.mic_distances.push_back(static_cast<double>(q) * spacing);
  }
  g.validate();
  return g;
}

double ArrayGeometry::spatial_alias_frequency() const {
  double min_gap = mic_distances[1] - mic_distances[0];
  for (std::size_t q = 2; q < mic_distances.size(); ++q) {
    min_gap = std::min(min_gap, mic_distances[q] - mic_distances[q - 1]);
  }
  return speed_of_sound / (2.0 * min_gap);
}

void ArrayGeometry::validate() const {
  require(mic_distances.size() >= 2, "array needs at least two microphones");
  require(mic_distances[0] == 0.0, "first microphone distance must be 0");
  for (std::size_t q = 1; q < mic_distances.size(); ++q) {
    require(std::isfinite(mic_distances[q]) && mic_distances[q] > mic_distances[q - 1],
            "microphone distances must be strictly increasing");
  }
  require(std::isfinite(speed_of_sound) && speed_of_sound > 0.0,
          "speed of sound must be positive");
}

DoaGrid::DoaGrid(std::vector<double> angles_deg) : angles_(std::move(angles_deg)) {
  require(angles_.size() >= 2, "DOA grid needs at least 2 directions");
  require(angles_.front() == 0.0 && angles_.back() == 180.0,
          "DOA grid must span [0, 180] degrees");
  for (std::size_t c = 1; c < angles_.size(); ++c) {
    require(angles_[c] > angles_[c - 1], "DOA grid must be strictly increasing");
  }
}

std::size_t DoaGrid::nearest_index(double angle_deg) const {
  const double pos = angle_deg / spacing();
  const long idx = std::lround(pos);
  return static_cast<std::size_t>(std::clamp<long>(idx, 0, static_cast<long>(size()) - 1));
}

DoaGrid make_grid(std::size_t count) {
  require(count >= 2, "grid size must be at least 2");
  std::vector<double> angles(count);
  const double denom = static_cast<double>(count - 1);
  for (std::size_t c = 0; c < count; ++c) {
    angles[c] = static_cast<double>(c) * 180.0 / denom;
  }
  angles.back() = 180.0;
  return DoaGrid(std::move(angles));
}

double cos_deg(double angle_deg) {
  if (angle_deg == 90.0) return 0.0;
  if (angle_deg == 0.0) return 1.0;
  if (angle_deg == 180.0) return -1.0;
  if (angle_deg > 90.0 && angle_deg <= 180.0) return -cos_deg(180.0 - angle_deg);
  return std::cos(angle_deg * std::numbers::pi / 180.0);
}

SteeringMatrix::SteeringMatrix(std::size_t directions, std::size_t bins, std::size_t mics)
    : directions_(directions), bins_(bins), mics_(mics), values_(directions * bins * mics) {}

SteeringMatrix steering_matrix(const DoaGrid& grid, const ArrayGeometry& geom,
                               std::size_t bins, double sample_rate,
                               std::size_t fft_length) {
  geom.validate();
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(bins == fft_length / 2 + 1, "bins must equal fft_length/2 + 1");
  SteeringMatrix d(grid.size(), bins, geom.num_mics());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double cos_theta = cos_deg(grid[c]);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = bin_frequency(k, sample_rate, fft_length);
      for (std::size_t q = 0; q < geom.num_mics(); ++q) {
        const double phase = -2.0 * std::numbers::pi * f * cos_theta *
                             geom.mic_distances[q] / geom.speed_of_sound;
        d.at(c, k, q) = phase == 0.0 ? cdouble(1.0, 0.0) : std::polar(1.0, phase);
      }
    }
  }
  return d;
}

}  // namespace doalab
