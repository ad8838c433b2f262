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

// Seeded end-to-end checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "doalab/error.hpp"
#include "doalab/estimate.hpp"
#include "doalab/eval.hpp"

#ifndef DOALAB_PROPERTY_TESTS
#define DOALAB_PROPERTY_TESTS ""
#endif
#ifndef DOALAB_SOURCE_DIR
#define DOALAB_SOURCE_DIR "."
#endif

using namespace doalab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t jobs() {
  if (const char* env = std::getenv("DOALAB_JOBS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("error: ") + e.what());
  }
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

const std::vector<EvalRecord> subset(const ExperimentResult& r, const std::string& method,
                                     const std::string& mask) {
  std::vector<EvalRecord> out;
  for (const auto& rec : r.records) {
    if (rec.method == method && rec.mask == mask) out.push_back(rec);
  }
  return out;
}

double fraction(const std::vector<EvalRecord>& rs, double max_ae) {
  std::size_t hit = 0;
  for (const auto& r : rs) hit += r.ae <= max_ae ? 1 : 0;
  return rs.empty() ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(rs.size());
}

ExperimentConfig anechoic(std::size_t frames) {
  ExperimentConfig c;
  c.master_seed = 101;
  c.scenes.t60 = {0.0};
  c.scenes.propagation = Propagation::kPlaneWave;
  c.scenes.source_signal = SourceKind::kWhite;
  c.scenes.num_sources = 1;
  c.scenes.seeds_per_doa = 1;
  c.scenes.snr = std::pair{30.0, 30.0};
  c.scenes.duration_frames = frames;
  c.eval_frames = frames;
  c.methods = {"srp-p"};
  c.masks = {"none"};
  return c;
}

// Two-source reverberant scenes shared by criteria 3, 6 and 7.
ExperimentConfig interference_config() {
  return load_config(std::filesystem::path(DOALAB_SOURCE_DIR) / "configs" /
                     "attention_benefit.json");
}

void on_grid() {
  ExperimentConfig c = anechoic(100);
  c.scenes.doa_min = 10.0;
  c.scenes.doa_max = 170.0;
  c.methods = {"srp-p", "music"};
  const auto t0 = Clock::now();
  const ExperimentResult r = run_experiment(c, jobs());
  const double elapsed = seconds_since(t0);
  const auto srp = subset(r, "srp-p", "none");
  const auto music = subset(r, "music", "none");
  const double srp_exact = fraction(srp, 0.0);
  const double music_exact = fraction(music, 0.0);
  report(1, srp.size() == 33 && srp_exact == 100.0 && elapsed < 10.0,
         fmt("%.0f cases, AE=0 for %.1f%%, %.2f s", static_cast<double>(srp.size()), srp_exact,
             elapsed));
  report(9, !music.empty() && music_exact >= 95.0,
         fmt("norm_music AE=0 for %.1f%% of %.0f cases", music_exact,
             static_cast<double>(music.size())));
}

void off_grid() {
  ExperimentConfig c = anechoic(50);
  c.scenes.doas_deg = make_grid(180).angles();
  c.scenes.doa_min = 30.0;
  c.scenes.doa_max = 150.0;
  const ExperimentResult coarse = run_experiment(c, jobs());
  c.estimation_grid_size = 180;
  const ExperimentResult fine = run_experiment(c, jobs());
  const auto rs = subset(coarse, "srp-p", "none");
  const double within = fraction(rs, 2.5 + 1e-9);
  const double med37 = find_group(coarse, "srp-p", "none").report.medae;
  const double med180 = find_group(fine, "srp-p", "none").report.medae;
  report(2, within >= 95.0 && med180 < med37,
         fmt("%.0f cases, AE<=2.5 for %.1f%%, MedAE %.3f (37) vs %.3f (180)",
             static_cast<double>(rs.size()), within, med37, med180));
}

void interference() {
  const ExperimentConfig c = interference_config();
  const auto t0 = Clock::now();
  const ExperimentResult r = run_experiment(c, jobs());
  const double elapsed = seconds_since(t0);

  const EvalReport p = find_group(r, "srp-p", "none").report;
  const EvalReport mp = find_group(r, "srp-mp", "oracle-psm").report;
  report(3,
         mp.mae < p.mae && mp.psacc > p.psacc && mp.psacc - p.psacc >= 10.0 && elapsed < 300.0,
         fmt("SRP-P MAE %.2f psACC %.1f, SRP-MP MAE %.2f psACC %.1f", p.mae, p.psacc, mp.mae,
             mp.psacc) +
             fmt(", %.0f scenes, %.1f s", static_cast<double>(p.count), elapsed));

  std::map<std::string, double> plain;
  for (const auto& rec : subset(r, "srp-p", "none")) plain[rec.scene_id] = rec.sps_loss;
  std::size_t better = 0, total = 0;
  for (const auto& rec : subset(r, "srp-mp", "oracle-psm")) {
    ++total;
    better += rec.sps_loss < plain.at(rec.scene_id) ? 1 : 0;
  }
  const double share = total ? 100.0 * static_cast<double>(better) / static_cast<double>(total)
                             : 0.0;
  report(6, share >= 80.0, fmt("masked SPS loss lower on %.1f%% of scenes", share));

  std::vector<double> mae;
  std::string curve;
  for (double v : c.vthr_sweep) {
    mae.push_back(find_group(r, "srp-mp", "oracle-ratio-bin:" + format_number(v)).report.mae);
    curve += (curve.empty() ? "" : " ") + format_number(v) + ":" + fmt("%.2f", mae.back());
  }
  bool ok = mae.size() == 10 && c.vthr_sweep.front() == 0.0 && c.vthr_sweep.back() == 0.9;
  if (ok) {
    const double best = *std::min_element(mae.begin() + 1, mae.end() - 1);
    ok = best < mae.front() && best < mae.back();
  }
  report(7, ok, "MAE by v_thr " + curve);
}

void band_selection() {
  ExperimentConfig c;
  c.master_seed = 404;
  c.scenes.t60 = {0.3};
  c.scenes.num_sources = 1;
  c.scenes.seeds_per_doa = 2;
  c.scenes.snr = std::pair{20.0, 30.0};
  c.methods = {"srp-p", "srp-mp"};
  c.masks = {"random-bands:50", "band-range:100:150"};
  const ExperimentResult r = run_experiment(c, jobs());
  const EvalReport p = find_group(r, "srp-p", "none").report;
  const EvalReport rb = find_group(r, "srp-mp", "random-bands:50").report;
  const EvalReport db = find_group(r, "srp-mp", "band-range:100:150").report;
  report(4, std::abs(rb.psacc - p.psacc) <= 5.0 && db.mae <= 3.0 * rb.mae,
         fmt("psACC %.1f (full) vs %.1f (rB); MAE %.2f (dB) vs %.2f (rB)", p.psacc, rb.psacc,
             db.mae, rb.mae));
}

void flops() {
  const std::uint64_t f = srp_flops(257, 37, 4);
  report(5, f == 183241 && f < 200000, "srp_flops(257, 37, 4) = " + std::to_string(f));
}

void properties() {
  const std::string exe = DOALAB_PROPERTY_TESTS;
  if (exe.empty() || !std::filesystem::exists(exe)) {
    report(8, false, "property suite binary not found");
    return;
  }
  const auto t0 = Clock::now();
  const int status = std::system(("\"" + exe + "\" --minimal > /dev/null 2>&1").c_str());
  const double elapsed = seconds_since(t0);
  report(8, status == 0 && elapsed < 120.0,
         fmt("property suite exit %.0f, %.2f s", static_cast<double>(status), elapsed));
}

}  // namespace

int main() {
  guarded(1, on_grid);
  guarded(2, off_grid);
  guarded(3, interference);
  guarded(4, band_selection);
  guarded(5, flops);
  guarded(8, properties);
  return failures == 0 ? 0 : 1;
}
