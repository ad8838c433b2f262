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

// doalab command-line tool: simulate, estimate, eval, flops.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "doalab/attention.hpp"
#include "doalab/error.hpp"
#include "doalab/estimate.hpp"
#include "doalab/eval.hpp"
#include "doalab/geometry.hpp"
#include "doalab/simulate.hpp"
#include "doalab/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace doalab;

namespace {

std::size_t default_jobs() {
  const char* env = std::getenv("DOALAB_JOBS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) {
    throw Error("DOALAB_JOBS must be a positive integer", ErrorKind::kUsage);
  }
  return static_cast<std::size_t>(v);
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(jobs, count); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

FrameRange parse_frames(const std::string& text, std::size_t frames) {
  if (text.empty()) return FrameRange::all(frames);
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error("--frames must look like A:B", ErrorKind::kUsage);
  try {
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    FrameRange r{a.empty() ? 0 : std::stoul(a), b.empty() ? frames : std::stoul(b)};
    if (r.empty() || r.end > frames) {
      throw Error("--frames " + text + " is outside 0:" + std::to_string(frames),
                  ErrorKind::kUsage);
    }
    return r;
  } catch (const std::logic_error&) {
    throw Error("--frames must look like A:B", ErrorKind::kUsage);
  }
}

struct SimulateArgs {
  std::string config, scene, out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.config.empty() == a.scene.empty()) {
    throw Error("simulate needs exactly one of --config or --scene", ErrorKind::kUsage);
  }
  if (!a.scene.empty()) {
    SceneSpec spec = load_scene(a.scene);
    if (a.seed) spec.seed = *a.seed;
    const SceneTruth truth = mix_scene(spec);
    write_scene_bundle(a.out_dir, spec, truth);
    std::cout << "wrote " << a.out_dir << "\n";
    return 0;
  }
  ExperimentConfig config = load_config(a.config);
  if (a.seed) config.master_seed = *a.seed;
  const auto scenes = enumerate_scenes(config);
  parallel_for(scenes.size(), a.jobs, [&](std::size_t i) {
    const SceneTruth truth = mix_scene(scenes[i].spec);
    write_scene_bundle(fs::path(a.out_dir) / scenes[i].id, scenes[i].spec, truth);
  });
  std::cout << "wrote " << scenes.size() << " scenes to " << a.out_dir << "\n";
  return 0;
}

struct EstimateArgs {
  std::string input, mask = "none", direct, method = "srp-p", frames, out;
  std::size_t grid = 37;
  std::size_t num_sources = 1;
  double spacing = 0.08;
  double speed = kDefaultSpeedOfSound;
  std::size_t window_length = 512, hop = 256;
  std::uint64_t seed = 0;
  bool exclude_aliased = false;
};

AttentionMask resolve_mask(const EstimateArgs& a, const MultichannelSpectrogram& y,
                           const StftParams& stft_params) {
  const bool file_like = a.mask.find(':') == std::string::npos && fs::exists(a.mask);
  if (file_like) {
    AttentionMask m = read_mask_file(a.mask);
    if (m.num_bins() != y.num_bins() || m.num_frames() != y.num_frames()) {
      throw Error("mask file shape does not match the input spectrogram");
    }
    return m;
  }
  const MaskRecipe recipe = parse_mask_recipe(a.mask);
  std::optional<MultichannelSpectrogram> xd;
  if (recipe.needs_direct()) {
    const fs::path direct =
        a.direct.empty() ? fs::path(a.input).parent_path() / "source1_direct.wav" : fs::path(a.direct);
    if (!fs::exists(direct)) {
      throw Error("oracle masks need --direct (no " + direct.string() + ")", ErrorKind::kUsage);
    }
    xd = stft(read_wav(direct, y.sample_rate()), stft_params);
    if (!xd->same_shape(y)) throw Error("direct signal does not match the input");
  }
  return build_mask(recipe, y, xd ? &*xd : nullptr, a.seed);
}

int cmd_estimate(const EstimateArgs& a) {
  const Method method = parse_method(a.method);
  const TimeSignal input = read_wav(a.input);
  const ArrayGeometry geom = ArrayGeometry::uniform_linear(input.num_channels(), a.spacing, a.speed);
  const StftParams stft_params{a.window_length, a.hop, Window::kHann};
  const MultichannelSpectrogram y = stft(input, stft_params);
  const FrameRange range = parse_frames(a.frames, y.num_frames());
  const DoaGrid grid = make_grid(a.grid);
  const AttentionMask mask = resolve_mask(a, y, stft_params);
  EstimatorOptions opts;
  opts.exclude_aliased_bins = a.exclude_aliased;
  opts.music_sources = a.num_sources;

  const SpatialPowerSpectrum sps = run_method(method, y, mask, grid, geom, range, opts);
  json per_frame = nullptr;
  if (method == Method::kSrpP || method == Method::kSrpMp) {
    AttentionMask m = method == Method::kSrpP ? AttentionMask::ones(y.num_bins(), y.num_frames())
                                              : mask;
    if (opts.exclude_aliased_bins) {
      m = multiply(m, alias_limit_mask(geom, y.num_bins(), y.num_frames(), y.sample_rate(),
                                       y.window_length()));
    }
    const CrossSpectralTensor phi =
        cross_spectral_tensor(y, mask_weighting(phat_weighting(y, opts.epsilon), m));
    const FrameSpectra e = per_frame_srp(phi, steering_for(y, grid, geom), range);
    per_frame = json::array();
    for (std::size_t n = 0; n < e.num_frames(); ++n) {
      json row = json::array();
      for (std::size_t c = 0; c < e.num_directions(); ++c) row.push_back(e.at(c, n));
      per_frame.push_back(row);
    }
  }
  const json out = {{"input", a.input},
                    {"method", method_name(method)},
                    {"mask", a.mask},
                    {"grid_deg", grid.angles()},
                    {"frames", {range.begin, range.end}},
                    {"mic_spacing_m", a.spacing},
                    {"seed", a.seed},
                    {"sps", sps.values},
                    {"per_frame_sps", per_frame},
                    {"doa_deg", pick_doa(sps, grid)}};
  write_text(a.out, out.dump(2) + "\n");
  return 0;
}

struct EvalArgs {
  std::string config, out_dir, methods, vthr_sweep;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
};

int cmd_eval(const EvalArgs& a) {
  ExperimentConfig config = load_config(a.config);
  if (a.seed) config.master_seed = *a.seed;
  if (!a.methods.empty()) {
    config.methods.clear();
    std::size_t start = 0;
    while (start <= a.methods.size()) {
      const std::size_t comma = a.methods.find(',', start);
      const std::string m = a.methods.substr(start, comma - start);
      if (!m.empty()) config.methods.push_back(m);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    for (const std::string& m : config.methods) parse_method(m);
  }
  if (!a.vthr_sweep.empty()) config.vthr_sweep = parse_sweep(a.vthr_sweep);
  config.validate();
  const ExperimentResult result = run_experiment(config, a.jobs);
  write_experiment(a.out_dir, config, result);
  for (const GroupReport& g : result.groups) {
    std::printf("%-7s %-24s n=%-5zu MAE %7.2f  MedAE %7.2f  ACC %6.2f%%  psACC %6.2f%%\n",
                g.method.c_str(), g.mask.c_str(), g.report.count, g.report.mae,
                g.report.medae, g.report.acc, g.report.psacc);
  }
  return 0;
}

int cmd_flops(long long k, long long c, long long q) {
  if (k < 1 || c < 1 || q < 1) throw Error("K, C and Q must all be at least 1", ErrorKind::kUsage);
  std::cout << srp_flops(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(c),
                         static_cast<std::uint64_t>(q))
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direction-of-arrival estimation with attention-weighted SRP and MUSIC"};
  app.require_subcommand(1);

  SimulateArgs sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate scene bundles (WAV + truth JSON)");
  simulate->add_option("--config", sim.config, "Experiment config JSON (scene grid)");
  simulate->add_option("--scene", sim.scene, "Single scene JSON");
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Override the seed");
  simulate->add_option("--jobs", sim.jobs, "Worker threads (default $DOALAB_JOBS or 1)");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate the DOA of a multichannel WAV");
  estimate->add_option("--input", est.input, "Multichannel WAV")->required();
  estimate->add_option("--mask", est.mask,
                       "Mask file or none|oracle-psm|oracle-ratio|oracle-ratio-bin:V|"
                       "random-bands:N|band-range:LO:HI");
  estimate->add_option("--direct", est.direct,
                       "Direct-path WAV for oracle masks (default: source1_direct.wav next to "
                       "the input)");
  estimate->add_option("--method", est.method, "srp-p|srp-mp|srp-om|music");
  estimate->add_option("--grid", est.grid, "Number of grid directions over [0, 180]");
  estimate->add_option("--frames", est.frames, "Frame range A:B (half-open)");
  estimate->add_option("--out", est.out, "Output JSON (default stdout)");
  estimate->add_option("--mic-spacing", est.spacing, "Microphone spacing in meters");
  estimate->add_option("--speed-of-sound", est.speed, "Speed of sound in m/s");
  estimate->add_option("--window-length", est.window_length, "STFT window length");
  estimate->add_option("--hop", est.hop, "STFT hop");
  estimate->add_option("--sources", est.num_sources, "MUSIC signal-subspace dimension");
  estimate->add_option("--seed", est.seed, "Seed for random masks");
  estimate->add_flag("--exclude-aliased", est.exclude_aliased,
                     "Ignore bins above the spatial-aliasing frequency");

  EvalArgs ev;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Run an experiment and write reports");
  eval->add_option("--config", ev.config, "Experiment config JSON")->required();
  eval->add_option("--out-dir", ev.out_dir, "Output directory")->required();
  eval->add_option("--methods", ev.methods, "Comma-separated methods (overrides config)");
  eval->add_option("--vthr-sweep", ev.vthr_sweep, "Binary ratio-mask thresholds lo:hi:step");
  eval->add_option("--jobs", ev.jobs, "Worker threads (default $DOALAB_JOBS or 1)");
  auto* eval_seed_opt = eval->add_option("--seed", eval_seed, "Override master_seed");

  long long fk = 0, fc = 0, fq = 0;
  auto* flops = app.add_subcommand("flops", "Per-frame SRP flop count for K bins, C directions, Q mics");
  flops->add_option("K", fk)->required();
  flops->add_option("C", fc)->required();
  flops->add_option("Q", fq)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*simulate) {
      if (*sim_seed_opt) sim.seed = sim_seed;
      if (sim.jobs == 0) sim.jobs = default_jobs();
      return cmd_simulate(sim);
    }
    if (*estimate) return cmd_estimate(est);
    if (*eval) {
      if (*eval_seed_opt) ev.seed = eval_seed;
      if (ev.jobs == 0) ev.jobs = default_jobs();
      return cmd_eval(ev);
    }
    if (*flops) return cmd_flops(fk, fc, fq);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kUsage ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
