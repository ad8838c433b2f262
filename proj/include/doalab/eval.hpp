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
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "doalab/attention.hpp"
#include "doalab/estimate.hpp"
#include "doalab/geometry.hpp"
#include "doalab/simulate.hpp"

namespace doalab {

/// One estimate of one scene.
struct EvalRecord {
  std::string scene_id;
  double t60 = 0.0;
  double sir_db = 0.0;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  double true_doa = 0.0;
  std::string method;
  std::string mask;
  std::size_t frames_used = 0;
  double est_doa = 0.0;
  double ae = 0.0;
  // Against SRP-PHAT of the clean direct signal; NaN when not computed.
  double sps_loss = std::numeric_limits<double>::quiet_NaN();
};

struct Thresholds {
  double acc_deg = 5.0;
  double psacc_deg = 10.0;
};

struct EvalReport {
  std::size_t count = 0;
  double mae = 0.0;
  double medae = 0.0;
  double acc = 0.0;    // percent with AE < acc_deg
  double psacc = 0.0;  // percent with AE < psacc_deg
  double mean_sps_loss = std::numeric_limits<double>::quiet_NaN();
};

// |true − est| on the linear [0°, 180°] domain.
double absolute_error(double true_doa, double est_doa);

EvalReport summarize(const std::vector<EvalRecord>& records, const Thresholds& thr = {});

// counts[r][c]: records whose true DOA bins to grid row r and estimate to
// column c (nearest grid angle, midpoints rounded up).
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;
ConfusionMatrix confusion_matrix(const std::vector<EvalRecord>& records, const DoaGrid& grid);

/// Mask recipe: "none", "oracle-psm", "oracle-ratio", "oracle-ratio-bin:<v>",
/// "random-bands:<n>" or "band-range:<lo>:<hi>".
struct MaskRecipe {
  enum class Kind { kNone, kOraclePsm, kOracleRatio, kOracleRatioBinary, kRandomBands, kBandRange };
  Kind kind = Kind::kNone;
  double threshold = 0.0;
  std::size_t count = 0;
  std::size_t lo = 0, hi = 0;

  bool needs_direct() const {
    return kind == Kind::kOraclePsm || kind == Kind::kOracleRatio ||
           kind == Kind::kOracleRatioBinary;
  }
};

MaskRecipe parse_mask_recipe(std::string_view text);

// Builds the mask for `mixture`; `direct` is required for oracle recipes.
AttentionMask build_mask(const MaskRecipe& recipe, const MultichannelSpectrogram& mixture,
                         const MultichannelSpectrogram* direct, std::uint64_t seed);

// lo, lo+step, …, ≤ hi (inclusive within 1e-9), rounded to 1e-9.
std::vector<double> threshold_sweep(double lo, double hi, double step);
// "0:0.9:0.1" → threshold_sweep(0, 0.9, 0.1).
std::vector<double> parse_sweep(std::string_view text);
std::string format_number(double v);

/// Scene grid of an experiment: T60 × DOA × seed, other parameters drawn
/// per scene from a stream seeded by (master_seed, scene_index).
struct SceneGridConfig {
  std::vector<Point3> rooms{{9.0, 4.0, 3.0}, {5.0, 7.0, 3.0}};
  std::vector<double> t60{0.3};
  std::vector<double> smd{1.3, 1.7};
  std::size_t doa_grid_size = 37;
  std::vector<double> doas_deg;  // overrides the grid when non-empty
  double doa_min = 0.0;
  double doa_max = 180.0;
  std::size_t seeds_per_doa = 1;
  std::size_t num_sources = 1;
  double sir_min = 0.0, sir_max = 0.0;
  std::optional<std::pair<double, double>> snr;  // none = noiseless
  SourceKind source_signal = SourceKind::kSpeechLike;
  SourceKind interferer_signal = SourceKind::kInterferer;
  std::filesystem::path source_wav, interferer_wav;
  Propagation propagation = Propagation::kImageMethod;
  std::size_t duration_frames = 100;
  double min_separation_deg = 5.0;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  double sample_rate = 16000.0;
  StftParams stft{};
  ArrayGeometry geometry = ArrayGeometry::uniform_linear(4, 0.08);
  SceneGridConfig scenes;
  std::vector<std::string> methods{"srp-p", "srp-mp"};
  std::vector<std::string> masks{"oracle-psm"};
  std::size_t estimation_grid_size = 37;
  std::size_t eval_frames = 50;
  Thresholds thresholds;
  EstimatorOptions estimator;
  std::vector<double> vthr_sweep;  // adds oracle-ratio-bin:<v> masks

  void validate() const;
  // Masks after expanding the threshold sweep.
  std::vector<std::string> all_masks() const;
};

ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

// True DOAs of the scene grid in enumeration order.
std::vector<double> truth_doas(const SceneGridConfig& grid);

struct GeneratedScene {
  std::string id;
  SceneSpec spec;
};

// Scenes enumerated T60-major, then DOA, then seed.
std::vector<GeneratedScene> enumerate_scenes(const ExperimentConfig& config);

struct GroupReport {
  std::string method;
  std::string mask;
  EvalReport report;
  ConfusionMatrix confusion;
};

struct ExperimentResult {
  std::vector<EvalRecord> records;  // sorted by (scene_id, method, mask)
  std::vector<GroupReport> groups;  // in configured method/mask order
};

// Evaluates one scene with every configured method and mask.
std::vector<EvalRecord> evaluate_scene(const ExperimentConfig& config,
                                       const GeneratedScene& scene);

// Runs the experiment on up to `jobs` threads; results do not depend on jobs.
ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

const GroupReport& find_group(const ExperimentResult& result, std::string_view method,
                              std::string_view mask);

std::string records_csv(const std::vector<EvalRecord>& records);
std::string confusion_csv(const ExperimentResult& result, const DoaGrid& grid);
// Per-DOA accuracy for scenes with the given T60, one row per (method, mask, DOA).
std::string psacc_vs_doa_csv(const ExperimentResult& result, double t60,
                             const Thresholds& thr);
std::string report_json(const ExperimentConfig& config, const ExperimentResult& result);

// report.json, records.csv, confusion.csv and psacc_vs_doa_t60_<t60>.csv.
void write_experiment(const std::filesystem::path& dir, const ExperimentConfig& config,
                      const ExperimentResult& result);

}  // namespace doalab
