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

#include "doalab/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "doalab/error.hpp"
#include "json_util.hpp"

namespace doalab {
namespace {

using detail::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double to_double(std::string_view s, std::string_view what) {
  const std::string str(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != str.size()) {
    throw Error("invalid number '" + str + "' in " + std::string(what), ErrorKind::kUsage);
  }
  return v;
}

std::size_t to_size(std::string_view s, std::string_view what) {
  const double v = to_double(s, what);
  if (v < 0.0 || v != std::floor(v)) {
    throw Error("expected a non-negative integer in " + std::string(what), ErrorKind::kUsage);
  }
  return static_cast<std::size_t>(v);
}

bool is_known_method(const std::string& m) {
  parse_method(m);
  return true;
}

SourceKind source_from_json(const json& j, const char* key, SourceKind fallback) {
  return j.contains(key) ? parse_source_kind(j.at(key).get<std::string>()) : fallback;
}

SceneGridConfig scenes_from_json(const json& j) {
  detail::check_keys(j,
                     {"rooms", "t60", "smd_m", "doa_grid_size", "doas_deg", "doa_min",
                      "doa_max", "seeds_per_doa", "num_sources", "sir_db", "snr_db",
                      "source_signal", "interferer_signal", "source_wav", "interferer_wav",
                      "propagation", "duration_frames", "min_separation_deg"},
                     "scenes");
  SceneGridConfig g;
  if (j.contains("rooms")) {
    g.rooms.clear();
    for (const json& r : j.at("rooms")) {
      const auto d = r.get<std::vector<double>>();
      if (d.size() != 3) throw Error("each room needs three dimensions");
      g.rooms.push_back({d[0], d[1], d[2]});
    }
  }
  g.t60 = detail::value_or(j, "t60", g.t60);
  g.smd = detail::value_or(j, "smd_m", g.smd);
  g.doa_grid_size = detail::value_or(j, "doa_grid_size", g.doa_grid_size);
  g.doas_deg = detail::value_or(j, "doas_deg", g.doas_deg);
  g.doa_min = detail::value_or(j, "doa_min", g.doa_min);
  g.doa_max = detail::value_or(j, "doa_max", g.doa_max);
  g.seeds_per_doa = detail::value_or(j, "seeds_per_doa", g.seeds_per_doa);
  g.num_sources = detail::value_or(j, "num_sources", g.num_sources);
  if (j.contains("sir_db")) {
    const json& s = j.at("sir_db");
    if (s.is_number()) {
      g.sir_min = g.sir_max = s.get<double>();
    } else {
      const auto r = s.get<std::vector<double>>();
      if (r.size() != 2) throw Error("sir_db must be a number or [min, max]");
      g.sir_min = r[0];
      g.sir_max = r[1];
    }
  }
  if (j.contains("snr_db") && !j.at("snr_db").is_null()) {
    const json& s = j.at("snr_db");
    if (s.is_number()) {
      g.snr = std::make_pair(s.get<double>(), s.get<double>());
    } else {
      const auto r = s.get<std::vector<double>>();
      if (r.size() != 2) throw Error("snr_db must be null, a number or [min, max]");
      g.snr = std::make_pair(r[0], r[1]);
    }
  }
  g.source_signal = source_from_json(j, "source_signal", g.source_signal);
  g.interferer_signal = source_from_json(j, "interferer_signal", g.interferer_signal);
  g.source_wav = detail::value_or<std::string>(j, "source_wav", "");
  g.interferer_wav = detail::value_or<std::string>(j, "interferer_wav", "");
  if (j.contains("propagation")) {
    g.propagation = parse_propagation(j.at("propagation").get<std::string>());
  }
  g.duration_frames = detail::value_or(j, "duration_frames", g.duration_frames);
  g.min_separation_deg = detail::value_or(j, "min_separation_deg", g.min_separation_deg);
  return g;
}

json scenes_to_json(const SceneGridConfig& g) {
  json rooms = json::array();
  for (const Point3& r : g.rooms) rooms.push_back({r[0], r[1], r[2]});
  json j = {
      {"rooms", rooms},
      {"t60", g.t60},
      {"smd_m", g.smd},
      {"doa_grid_size", g.doa_grid_size},
      {"doa_min", g.doa_min},
      {"doa_max", g.doa_max},
      {"seeds_per_doa", g.seeds_per_doa},
      {"num_sources", g.num_sources},
      {"sir_db", {g.sir_min, g.sir_max}},
      {"snr_db", g.snr ? json({g.snr->first, g.snr->second}) : json(nullptr)},
      {"source_signal", source_kind_name(g.source_signal)},
      {"interferer_signal", source_kind_name(g.interferer_signal)},
      {"propagation", propagation_name(g.propagation)},
      {"duration_frames", g.duration_frames},
      {"min_separation_deg", g.min_separation_deg},
  };
  if (!g.doas_deg.empty()) j["doas_deg"] = g.doas_deg;
  if (!g.source_wav.empty()) j["source_wav"] = g.source_wav.string();
  if (!g.interferer_wav.empty()) j["interferer_wav"] = g.interferer_wav.string();
  return j;
}

}  // namespace

double absolute_error(double true_doa, double est_doa) {
  if (!(true_doa >= 0.0 && true_doa <= 180.0) || !(est_doa >= 0.0 && est_doa <= 180.0)) {
    throw Error("DOA outside [0, 180]");
  }
  return std::abs(true_doa - est_doa);
}

EvalReport summarize(const std::vector<EvalRecord>& records, const Thresholds& thr) {
  if (records.empty()) throw Error("cannot summarize an empty record set");
  EvalReport r;
  r.count = records.size();
  std::vector<double> ae;
  ae.reserve(records.size());
  std::size_t acc = 0, psacc = 0, losses = 0;
  double loss_sum = 0.0;
  for (const EvalRecord& rec : records) {
    ae.push_back(rec.ae);
    r.mae += rec.ae;
    acc += rec.ae < thr.acc_deg;
    psacc += rec.ae < thr.psacc_deg;
    if (std::isfinite(rec.sps_loss)) {
      loss_sum += rec.sps_loss;
      ++losses;
    }
  }
  const double n = static_cast<double>(records.size());
  r.mae /= n;
  std::sort(ae.begin(), ae.end());
  const std::size_t mid = ae.size() / 2;
  r.medae = ae.size() % 2 == 1 ? ae[mid] : 0.5 * (ae[mid - 1] + ae[mid]);
  r.acc = 100.0 * static_cast<double>(acc) / n;
  r.psacc = 100.0 * static_cast<double>(psacc) / n;
  if (losses > 0) r.mean_sps_loss = loss_sum / static_cast<double>(losses);
  return r;
}

ConfusionMatrix confusion_matrix(const std::vector<EvalRecord>& records, const DoaGrid& grid) {
  ConfusionMatrix m(grid.size(), std::vector<std::size_t>(grid.size(), 0));
  for (const EvalRecord& rec : records) {
    ++m[grid.nearest_index(rec.true_doa)][grid.nearest_index(rec.est_doa)];
  }
  return m;
}

MaskRecipe parse_mask_recipe(std::string_view text) {
  const auto parts = split(text, ':');
  const std::string_view head = parts[0];
  MaskRecipe r;
  auto bad = [&]() {
    return Error("unknown mask '" + std::string(text) +
                     "' (valid: none, oracle-psm, oracle-ratio, oracle-ratio-bin:<v>, "
                     "random-bands:<n>, band-range:<lo>:<hi>)",
                 ErrorKind::kUsage);
  };
  if (head == "none" && parts.size() == 1) {
    r.kind = MaskRecipe::Kind::kNone;
  } else if (head == "oracle-psm" && parts.size() == 1) {
    r.kind = MaskRecipe::Kind::kOraclePsm;
  } else if (head == "oracle-ratio" && parts.size() == 1) {
    r.kind = MaskRecipe::Kind::kOracleRatio;
  } else if (head == "oracle-ratio-bin" && parts.size() == 2) {
    r.kind = MaskRecipe::Kind::kOracleRatioBinary;
    r.threshold = to_double(parts[1], "mask threshold");
    if (!(r.threshold >= 0.0 && r.threshold <= 1.0)) {
      throw Error("mask threshold must be in [0, 1]", ErrorKind::kUsage);
    }
  } else if (head == "random-bands" && parts.size() == 2) {
    r.kind = MaskRecipe::Kind::kRandomBands;
    r.count = to_size(parts[1], "random-bands");
  } else if (head == "band-range" && parts.size() == 3) {
    r.kind = MaskRecipe::Kind::kBandRange;
    r.lo = to_size(parts[1], "band-range");
    r.hi = to_size(parts[2], "band-range");
  } else {
    throw bad();
  }
  return r;
}

AttentionMask build_mask(const MaskRecipe& recipe, const MultichannelSpectrogram& mixture,
                         const MultichannelSpectrogram* direct, std::uint64_t seed) {
  const std::size_t bins = mixture.num_bins(), frames = mixture.num_frames();
  if (recipe.needs_direct() && direct == nullptr) {
    throw Error("oracle masks need the direct-path signal");
  }
  switch (recipe.kind) {
    case MaskRecipe::Kind::kNone: return AttentionMask::ones(bins, frames);
    case MaskRecipe::Kind::kOraclePsm: return psm_mask(*direct, mixture);
    case MaskRecipe::Kind::kOracleRatio: return magnitude_ratio_mask(*direct, mixture);
    case MaskRecipe::Kind::kOracleRatioBinary:
      return binarize(magnitude_ratio_mask(*direct, mixture), recipe.threshold);
    case MaskRecipe::Kind::kRandomBands:
      return random_band_mask(bins, frames, recipe.count, seed);
    case MaskRecipe::Kind::kBandRange: return band_range_mask(bins, frames, recipe.lo, recipe.hi);
  }
  throw Error("unknown mask kind");
}

std::vector<double> threshold_sweep(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error("invalid sweep range", ErrorKind::kUsage);
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double v = std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9;
    if (v > hi + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_sweep(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw Error("sweep must look like lo:hi:step", ErrorKind::kUsage);
  return threshold_sweep(to_double(parts[0], "sweep"), to_double(parts[1], "sweep"),
                         to_double(parts[2], "sweep"));
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void ExperimentConfig::validate() const {
  geometry.validate();
  require(sample_rate > 0.0, "sample_rate must be positive");
  if (methods.empty()) throw Error("method list is empty");
  for (const std::string& m : methods) is_known_method(m);
  const auto masks_all = all_masks();
  if (masks_all.empty()) throw Error("mask list is empty");
  for (const std::string& m : masks_all) parse_mask_recipe(m);
  if (eval_frames != 1 && eval_frames != 50 && eval_frames != 100) {
    throw Error("eval_frames must be 1, 50 or 100");
  }
  if (eval_frames > scenes.duration_frames) {
    throw Error("eval_frames exceeds scenes.duration_frames");
  }
  require(estimation_grid_size >= 2, "estimation_grid_size must be at least 2");
  require(scenes.doa_grid_size >= 2 || !scenes.doas_deg.empty(),
          "doa_grid_size must be at least 2");
  require(!scenes.rooms.empty() && !scenes.t60.empty() && !scenes.smd.empty(),
          "rooms, t60 and smd_m must be non-empty");
  require(scenes.seeds_per_doa >= 1, "seeds_per_doa must be at least 1");
  require(scenes.num_sources == 1 || scenes.num_sources == 2, "num_sources must be 1 or 2");
  require(scenes.sir_min <= scenes.sir_max, "sir_db range is reversed");
  if (scenes.snr) require(scenes.snr->first <= scenes.snr->second, "snr_db range is reversed");
  require(thresholds.acc_deg > 0.0 && thresholds.psacc_deg > 0.0, "thresholds must be positive");
  for (double t : scenes.t60) require(t >= 0.0, "t60 must be non-negative");
  if (scenes.source_signal == SourceKind::kWav) {
    require(std::filesystem::exists(scenes.source_wav),
            "source_wav does not exist: " + scenes.source_wav.string());
  }
  if (scenes.num_sources == 2 && scenes.interferer_signal == SourceKind::kWav) {
    require(std::filesystem::exists(scenes.interferer_wav),
            "interferer_wav does not exist: " + scenes.interferer_wav.string());
  }
  const bool music = std::find(methods.begin(), methods.end(), "music") != methods.end();
  if (music && eval_frames < geometry.num_mics() && !(estimator.diagonal_loading > 0.0)) {
    throw Error("music needs eval_frames >= num_mics or diagonal loading");
  }
  if (truth_doas(scenes).empty()) throw Error("scene grid selects no DOAs");
}

std::vector<std::string> ExperimentConfig::all_masks() const {
  std::vector<std::string> out = masks;
  for (double v : vthr_sweep) {
    const std::string name = "oracle-ratio-bin:" + format_number(v);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

ExperimentConfig config_from_json(std::string_view text) {
  const json j = detail::parse_json(text, "config");
  try {
    detail::check_keys(j,
                       {"version", "master_seed", "sample_rate", "stft", "array", "scenes",
                        "methods", "masks", "estimation_grid_size", "eval_frames",
                        "thresholds", "exclude_aliased_bins", "epsilon", "diagonal_loading",
                        "music_sources", "vthr_sweep"},
                       "config");
    if (!j.contains("version")) throw Error("config is missing the version field");
    if (j.at("version").get<int>() != 1) throw Error("unsupported config version");
    ExperimentConfig c;
    c.master_seed = detail::value_or(j, "master_seed", c.master_seed);
    c.sample_rate = detail::value_or(j, "sample_rate", c.sample_rate);
    if (j.contains("stft")) {
      const json& s = j.at("stft");
      detail::check_keys(s, {"window_length", "hop", "window"}, "stft");
      c.stft.window_length = detail::value_or(s, "window_length", c.stft.window_length);
      c.stft.hop = detail::value_or(s, "hop", c.stft.hop);
      if (s.contains("window")) c.stft.window = parse_window(s.at("window").get<std::string>());
    }
    if (j.contains("array")) {
      const json& a = j.at("array");
      detail::check_keys(a, {"num_mics", "mic_spacing_m", "speed_of_sound"}, "array");
      c.geometry = ArrayGeometry::uniform_linear(
          detail::value_or<std::size_t>(a, "num_mics", 4),
          detail::value_or(a, "mic_spacing_m", 0.08),
          detail::value_or(a, "speed_of_sound", kDefaultSpeedOfSound));
    }
    if (j.contains("scenes")) c.scenes = scenes_from_json(j.at("scenes"));
    c.methods = detail::value_or(j, "methods", c.methods);
    c.masks = detail::value_or(j, "masks", c.masks);
    c.estimation_grid_size = detail::value_or(j, "estimation_grid_size", c.estimation_grid_size);
    c.eval_frames = detail::value_or(j, "eval_frames", c.eval_frames);
    if (j.contains("thresholds")) {
      const json& t = j.at("thresholds");
      detail::check_keys(t, {"acc_deg", "psacc_deg"}, "thresholds");
      c.thresholds.acc_deg = detail::value_or(t, "acc_deg", c.thresholds.acc_deg);
      c.thresholds.psacc_deg = detail::value_or(t, "psacc_deg", c.thresholds.psacc_deg);
    }
    c.estimator.exclude_aliased_bins =
        detail::value_or(j, "exclude_aliased_bins", c.estimator.exclude_aliased_bins);
    c.estimator.epsilon = detail::value_or(j, "epsilon", c.estimator.epsilon);
    c.estimator.diagonal_loading =
        detail::value_or(j, "diagonal_loading", c.estimator.diagonal_loading);
    c.estimator.music_sources = detail::value_or(j, "music_sources", c.estimator.music_sources);
    c.vthr_sweep = detail::value_or(j, "vthr_sweep", c.vthr_sweep);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  // Relative WAV paths are resolved against the config file's directory.
  json j = detail::parse_json(text, "config");
  if (j.is_object() && j.contains("scenes") && j["scenes"].is_object()) {
    for (const char* key : {"source_wav", "interferer_wav"}) {
      auto& s = j["scenes"];
      if (s.contains(key) && s[key].is_string()) {
        const std::filesystem::path p = s[key].get<std::string>();
        if (p.is_relative()) s[key] = (path.parent_path() / p).string();
      }
    }
    text = j.dump();
  }
  return config_from_json(text);
}

std::string config_to_json(const ExperimentConfig& c) {
  json j = {
      {"version", 1},
      {"master_seed", c.master_seed},
      {"sample_rate", c.sample_rate},
      {"stft",
       {{"window_length", c.stft.window_length},
        {"hop", c.stft.hop},
        {"window", window_name(c.stft.window)}}},
      {"array",
       {{"num_mics", c.geometry.num_mics()},
        {"mic_spacing_m",
         c.geometry.num_mics() > 1 ? c.geometry.mic_distances[1] - c.geometry.mic_distances[0]
                                   : 0.0},
        {"speed_of_sound", c.geometry.speed_of_sound}}},
      {"scenes", scenes_to_json(c.scenes)},
      {"methods", c.methods},
      {"masks", c.masks},
      {"estimation_grid_size", c.estimation_grid_size},
      {"eval_frames", c.eval_frames},
      {"thresholds",
       {{"acc_deg", c.thresholds.acc_deg}, {"psacc_deg", c.thresholds.psacc_deg}}},
      {"exclude_aliased_bins", c.estimator.exclude_aliased_bins},
      {"epsilon", c.estimator.epsilon},
      {"diagonal_loading", c.estimator.diagonal_loading},
      {"music_sources", c.estimator.music_sources},
      {"vthr_sweep", c.vthr_sweep},
  };
  return j.dump(2);
}

std::vector<double> truth_doas(const SceneGridConfig& g) {
  const std::vector<double> all =
      g.doas_deg.empty() ? make_grid(g.doa_grid_size).angles() : g.doas_deg;
  std::vector<double> out;
  for (double d : all) {
    if (d >= g.doa_min - 1e-9 && d <= g.doa_max + 1e-9) out.push_back(d);
  }
  return out;
}

std::vector<GeneratedScene> enumerate_scenes(const ExperimentConfig& config) {
  const SceneGridConfig& g = config.scenes;
  const std::vector<double> doas = truth_doas(g);
  const std::vector<double> pool = make_grid(std::max<std::size_t>(g.doa_grid_size, 2)).angles();
  std::vector<GeneratedScene> scenes;
  std::size_t index = 0;
  for (double t60 : g.t60) {
    for (double doa : doas) {
      for (std::size_t s = 0; s < g.seeds_per_doa; ++s, ++index) {
        const std::uint64_t seed = derive_seed(config.master_seed, index);
        std::mt19937_64 rng(derive_seed(seed, 2));
        auto pick = [&](std::size_t n) {
          return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        };
        auto uniform = [&](double lo, double hi) {
          return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
        };
        SceneSpec spec;
        spec.room = {g.rooms[pick(g.rooms.size())], t60};
        spec.geometry = config.geometry;
        spec.seed = seed;
        spec.duration_frames = g.duration_frames;
        spec.sample_rate = config.sample_rate;
        spec.window_length = config.stft.window_length;
        spec.hop = config.stft.hop;
        spec.propagation = g.propagation;
        SourceSpec target{doa, g.smd[pick(g.smd.size())], g.source_signal, g.source_wav};
        spec.sources.push_back(target);
        spec.sir_db = uniform(g.sir_min, g.sir_max);
        if (g.snr) spec.snr_db = uniform(g.snr->first, g.snr->second);
        if (g.num_sources == 2) {
          std::vector<double> candidates;
          for (double d : pool) {
            if (std::abs(d - doa) > g.min_separation_deg) candidates.push_back(d);
          }
          if (candidates.empty()) throw Error("no interferer DOA satisfies the separation");
          SourceSpec other{candidates[pick(candidates.size())], g.smd[pick(g.smd.size())],
                           g.interferer_signal, g.interferer_wav};
          spec.sources.push_back(other);
        }
        char id[32];
        std::snprintf(id, sizeof(id), "scene_%04zu", index);
        scenes.push_back({id, std::move(spec)});
      }
    }
  }
  return scenes;
}

std::vector<EvalRecord> evaluate_scene(const ExperimentConfig& config,
                                       const GeneratedScene& scene) {
  const SceneTruth truth = mix_scene(scene.spec);
  const MultichannelSpectrogram y = stft(truth.mixture, config.stft);
  const MultichannelSpectrogram xd = stft(truth.direct[0], config.stft);
  const DoaGrid grid = make_grid(config.estimation_grid_size);
  const FrameRange range = centered_range(y.num_frames(), config.eval_frames);
  const EstimatorOptions& opts = config.estimator;
  const SpatialPowerSpectrum clean = srp_phat(xd, grid, config.geometry, range, opts);
  const std::uint64_t mask_seed = derive_seed(scene.spec.seed, 300);

  std::vector<EvalRecord> out;
  auto record = [&](const std::string& method, const std::string& mask,
                    const SpatialPowerSpectrum& sps) {
    EvalRecord r;
    r.scene_id = scene.id;
    r.t60 = scene.spec.room.t60;
    r.sir_db = scene.spec.sir_db;
    r.snr_db = scene.spec.snr_db;
    r.seed = scene.spec.seed;
    r.true_doa = scene.spec.sources[0].doa_deg;
    r.method = method;
    r.mask = mask;
    r.frames_used = range.size();
    r.est_doa = pick_doa(sps, grid);
    r.ae = absolute_error(r.true_doa, r.est_doa);
    r.sps_loss = sps_loss(sps, clean);
    out.push_back(std::move(r));
  };

  for (const std::string& name : config.methods) {
    const Method method = parse_method(name);
    if (method == Method::kSrpP) {
      record(name, "none", srp_phat(y, grid, config.geometry, range, opts));
      continue;
    }
    for (const std::string& mask_name : config.all_masks()) {
      const AttentionMask mask = build_mask(parse_mask_recipe(mask_name), y, &xd, mask_seed);
      record(name, mask_name, run_method(method, y, mask, grid, config.geometry, range, opts));
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  const std::vector<GeneratedScene> scenes = enumerate_scenes(config);
  std::vector<std::vector<EvalRecord>> per_scene(scenes.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenes.size()) return;
      try {
        per_scene[i] = evaluate_scene(config, scenes[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(scenes.size());
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(scenes.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  for (auto& v : per_scene) {
    for (auto& r : v) result.records.push_back(std::move(r));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) {
                     return std::tie(a.scene_id, a.method, a.mask) <
                            std::tie(b.scene_id, b.method, b.mask);
                   });

  const DoaGrid grid = make_grid(config.estimation_grid_size);
  for (const std::string& method : config.methods) {
    const bool plain = parse_method(method) == Method::kSrpP;
    const std::vector<std::string> masks =
        plain ? std::vector<std::string>{"none"} : config.all_masks();
    for (const std::string& mask : masks) {
      std::vector<EvalRecord> subset;
      for (const EvalRecord& r : result.records) {
        if (r.method == method && r.mask == mask) subset.push_back(r);
      }
      result.groups.push_back(
          {method, mask, summarize(subset, config.thresholds), confusion_matrix(subset, grid)});
    }
  }
  return result;
}

const GroupReport& find_group(const ExperimentResult& result, std::string_view method,
                              std::string_view mask) {
  for (const GroupReport& g : result.groups) {
    if (g.method == method && g.mask == mask) return g;
  }
  throw Error("no results for method " + std::string(method) + " with mask " +
              std::string(mask));
}

std::string records_csv(const std::vector<EvalRecord>& records) {
  std::string out =
      "scene_id,t60,sir_db,snr_db,seed,true_doa,method,mask,frames_used,est_doa,ae,sps_loss\n";
  for (const EvalRecord& r : records) {
    out += r.scene_id + ',' + fmt(r.t60) + ',' + fmt(r.sir_db) + ',' + fmt(r.snr_db) + ',' +
           std::to_string(r.seed) + ',' + fmt(r.true_doa) + ',' + r.method + ',' + r.mask + ',' +
           std::to_string(r.frames_used) + ',' + fmt(r.est_doa) + ',' + fmt(r.ae) + ',' +
           fmt(r.sps_loss) + '\n';
  }
  return out;
}

std::string confusion_csv(const ExperimentResult& result, const DoaGrid& grid) {
  std::string out = "method,mask,true_deg,est_deg,count\n";
  for (const GroupReport& g : result.groups) {
    for (std::size_t r = 0; r < grid.size(); ++r) {
      for (std::size_t c = 0; c < grid.size(); ++c) {
        out += g.method + ',' + g.mask + ',' + fmt(grid[r]) + ',' + fmt(grid[c]) + ',' +
               std::to_string(g.confusion[r][c]) + '\n';
      }
    }
  }
  return out;
}

std::string psacc_vs_doa_csv(const ExperimentResult& result, double t60,
                             const Thresholds& thr) {
  // (method, mask) in group order, then DOA ascending.
  std::string out = "method,mask,doa_deg,count,acc,psacc,mae\n";
  for (const GroupReport& g : result.groups) {
    std::map<double, std::vector<EvalRecord>> by_doa;
    for (const EvalRecord& r : result.records) {
      if (r.method == g.method && r.mask == g.mask && r.t60 == t60) {
        by_doa[r.true_doa].push_back(r);
      }
    }
    for (const auto& [doa, recs] : by_doa) {
      const EvalReport rep = summarize(recs, thr);
      out += g.method + ',' + g.mask + ',' + fmt(doa) + ',' + std::to_string(rep.count) + ',' +
             fmt(rep.acc) + ',' + fmt(rep.psacc) + ',' + fmt(rep.mae) + '\n';
    }
  }
  return out;
}

std::string report_json(const ExperimentConfig& config, const ExperimentResult& result) {
  json groups = json::array();
  for (const GroupReport& g : result.groups) {
    groups.push_back({{"method", g.method},
                      {"mask", g.mask},
                      {"count", g.report.count},
                      {"mae", g.report.mae},
                      {"medae", g.report.medae},
                      {"acc", g.report.acc},
                      {"psacc", g.report.psacc},
                      {"mean_sps_loss", number_or_null(g.report.mean_sps_loss)}});
  }
  const json j = {{"version", 1},
                  {"config", json::parse(config_to_json(config))},
                  {"record_count", result.records.size()},
                  {"groups", groups}};
  return j.dump(2) + "\n";
}

void write_experiment(const std::filesystem::path& dir, const ExperimentConfig& config,
                      const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", report_json(config, result));
  write("records.csv", records_csv(result.records));
  write("confusion.csv", confusion_csv(result, make_grid(config.estimation_grid_size)));
  for (double t60 : config.scenes.t60) {
    write("psacc_vs_doa_t60_" + format_number(t60) + ".csv",
          psacc_vs_doa_csv(result, t60, config.thresholds));
  }
}

}  // namespace doalab
