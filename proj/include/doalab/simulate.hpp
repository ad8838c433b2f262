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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doalab/geometry.hpp"
#include "doalab/signal.hpp"

namespace doalab {

using Point3 = std::array<double, 3>;

/// Shoebox room with uniform wall absorption.
struct RoomSpec {
  Point3 dimensions{};  // meters
  double t60 = 0.0;     // seconds, 0 = anechoic

  void validate() const;
  bool contains(const Point3& p) const;
};

// Uniform wall reflection coefficient whose image-source energy decay has a
// reverberation time of t60 (at most the Sabine value sqrt(1 − α)).
// 0 for t60 = 0; throws when Sabine absorption for t60 would exceed 1.
double reflection_coefficient(const RoomSpec& room, double speed_of_sound = kDefaultSpeedOfSound);

/// Impulse responses, one channel per microphone.
struct Rir {
  TimeSignal taps;
  TimeSignal direct_taps;  // order-0 image only
};

struct RirOptions {
  double sample_rate = 16000.0;
  double speed_of_sound = kDefaultSpeedOfSound;
  // Taps per channel; 0 picks ceil(t60·fs), extended to fit the direct path.
  std::size_t length = 0;
  // Largest reflection order kept; negative keeps everything within `length`.
  int max_order = -1;
};

Rir image_method_rir(const RoomSpec& room, const Point3& source,
                     std::span<const Point3> mics, const RirOptions& opts = {});

// Half-width of the windowed-sinc fractional-delay filter (81 taps).
inline constexpr int kFractionalDelayHalfWidth = 40;

// Adds amplitude·δ(t − delay) band-limited by the windowed sinc into `out`;
// integer delays produce a single exact tap.
void add_fractional_impulse(std::span<double> out, double delay_samples, double amplitude);

// x delayed by `delay_samples` (may be negative or fractional), same length,
// zero outside the input.
std::vector<double> fractional_delay(std::span<const double> x, double delay_samples);

// Far-field plane wave: channel q is src delayed by cos(doa)·d_q/c_s seconds.
TimeSignal plane_wave_synthesize(const TimeSignal& src, double doa_deg,
                                 const ArrayGeometry& geom);

// Independent 64-bit seed for sub-stream `stream` of `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// i.i.d. standard normal samples.
TimeSignal white_noise(std::size_t channels, std::size_t length, std::uint64_t seed,
                       double sample_rate = 16000.0);

// Syllable-like bursts separated by pauses: an optional fricative onset
// (high-passed noise) followed by formant-filtered Gaussian noise.
// Unit RMS.
TimeSignal speech_like(std::size_t length, std::uint64_t seed, double sample_rate = 16000.0);

// Stationary low-pass noise (first-order recursion, pole 0.7); unit RMS.
TimeSignal interferer_noise(std::size_t length, std::uint64_t seed,
                            double sample_rate = 16000.0);

enum class SourceKind { kWhite, kSpeechLike, kInterferer, kWav };

SourceKind parse_source_kind(std::string_view name);
std::string source_kind_name(SourceKind kind);

struct SourceSpec {
  double doa_deg = 90.0;
  double smd = 1.5;  // source to array-center distance, meters
  SourceKind kind = SourceKind::kWhite;
  std::filesystem::path wav;  // for kWav
};

enum class Propagation { kImageMethod, kPlaneWave };

Propagation parse_propagation(std::string_view name);
std::string propagation_name(Propagation p);

struct SceneSpec {
  RoomSpec room;
  ArrayGeometry geometry;
  std::vector<SourceSpec> sources;
  double snr_db = std::numeric_limits<double>::infinity();
  double sir_db = 0.0;
  std::uint64_t seed = 0;
  std::size_t duration_frames = 100;
  double sample_rate = 16000.0;
  std::size_t window_length = 512;
  std::size_t hop = 256;
  Propagation propagation = Propagation::kImageMethod;
  std::size_t rir_length = 0;  // 0 = automatic

  void validate() const;
  std::size_t num_samples() const;
};

/// Array pose and source positions chosen for a scene.
struct ScenePlacement {
  Point3 array_center{};
  double array_azimuth_deg = 0.0;  // orientation of the mic axis in the horizontal plane
  std::vector<Point3> mics;
  std::vector<Point3> sources;
};

// Seeded random pose: array and sources at least 1 m from every wall.
ScenePlacement place_scene(const SceneSpec& spec);

struct SceneTruth {
  TimeSignal mixture;
  std::vector<TimeSignal> direct;  // per source
  std::vector<TimeSignal> reverb;  // per source
  TimeSignal noise;
  std::vector<double> doas_deg;
  std::vector<double> source_gains;  // applied to each source signal
  ScenePlacement placement;
};

// Sum in the fixed order ((d0 + r0) + (d1 + r1) + …) + noise.
TimeSignal compose_mixture(const std::vector<TimeSignal>& direct,
                           const std::vector<TimeSignal>& reverb, const TimeSignal& noise);

SceneTruth mix_scene(const SceneSpec& spec);

// Energy ratio in dB of channel 0 of two signals.
double energy_ratio_db(const TimeSignal& a, const TimeSignal& b);

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(std::string_view text);
SceneSpec load_scene(const std::filesystem::path& path);

// Ground-truth sidecar: DOAs, gains, positions and measured SIR/SNR.
std::string truth_to_json(const SceneSpec& spec, const SceneTruth& truth);

// Writes mixture.wav, source<i>_direct.wav and truth.json into `dir`.
void write_scene_bundle(const std::filesystem::path& dir, const SceneSpec& spec,
                        const SceneTruth& truth);

}  // namespace doalab
