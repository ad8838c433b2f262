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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "doalab/error.hpp"
#include "doalab/eval.hpp"
#include "test_support.hpp"

using namespace doalab;

namespace {

EvalRecord record(double true_doa, double est_doa) {
  EvalRecord r;
  r.true_doa = true_doa;
  r.est_doa = est_doa;
  r.ae = absolute_error(true_doa, est_doa);
  return r;
}

std::vector<EvalRecord> records_with_errors(std::initializer_list<double> errors) {
  std::vector<EvalRecord> out;
  for (double e : errors) out.push_back(record(0.0, e));
  return out;
}

const char* kSmallConfig = R"({
  "version": 1,
  "master_seed": 17,
  "scenes": {
    "rooms": [[6, 5, 3]],
    "t60": [0.2],
    "smd_m": [1.5],
    "doa_grid_size": 5,
    "seeds_per_doa": 2,
    "num_sources": 1,
    "snr_db": [20, 30],
    "source_signal": "white",
    "propagation": "plane_wave",
    "duration_frames": 12
  },
  "methods": ["srp-p", "srp-mp", "srp-om"],
  "masks": ["none", "oracle-psm"],
  "estimation_grid_size": 37,
  "eval_frames": 1
})";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("absolute error is linear, without wrap-around") {
  CHECK(absolute_error(0.0, 180.0) == 180.0);
  CHECK(absolute_error(175.0, 5.0) == 170.0);
  CHECK(absolute_error(90.0, 87.5) == 2.5);
}

TEST_CASE("summary metrics") {
  SUBCASE("thresholds are strict") {
    const EvalReport r = summarize(records_with_errors({0.0, 4.9}));
    CHECK(r.count == 2);
    CHECK(r.mae == doctest::Approx(2.45));
    CHECK(r.medae == doctest::Approx(2.45));
    CHECK(r.acc == 100.0);
    CHECK(r.psacc == 100.0);
    const EvalReport five = summarize(records_with_errors({5.0}));
    CHECK(five.acc == 0.0);
    CHECK(five.psacc == 100.0);
    CHECK(summarize(records_with_errors({10.0})).psacc == 0.0);
  }
  SUBCASE("median is robust to outliers") {
    const EvalReport r = summarize(records_with_errors({1.0, 2.0, 100.0}));
    CHECK(r.mae == doctest::Approx(103.0 / 3.0));
    CHECK(r.medae == 2.0);
    CHECK(r.acc == doctest::Approx(200.0 / 3.0));
  }
  SUBCASE("sps loss is averaged when present") {
    auto rs = records_with_errors({0.0, 0.0});
    CHECK(std::isnan(summarize(rs).mean_sps_loss));
    rs[0].sps_loss = 0.1;
    rs[1].sps_loss = 0.3;
    CHECK(summarize(rs).mean_sps_loss == doctest::Approx(0.2));
  }
  CHECK_THROWS_AS(summarize({}), Error);
}

TEST_CASE("confusion matrix bins to the nearest grid angle") {
  const DoaGrid grid = make_grid(37);
  const ConfusionMatrix m =
      confusion_matrix({record(90.0, 90.0), record(90.0, 92.5), record(2.4, 180.0)}, grid);
  REQUIRE(m.size() == 37);
  CHECK(m[18][18] == 1);
  CHECK(m[18][19] == 1);
  CHECK(m[0][36] == 1);
  std::size_t total = 0;
  for (const auto& row : m) {
    for (std::size_t v : row) total += v;
  }
  CHECK(total == 3);
}

TEST_CASE("mask recipes") {
  CHECK(parse_mask_recipe("none").kind == MaskRecipe::Kind::kNone);
  CHECK(parse_mask_recipe("oracle-psm").needs_direct());
  const MaskRecipe bin = parse_mask_recipe("oracle-ratio-bin:0.4");
  CHECK(bin.kind == MaskRecipe::Kind::kOracleRatioBinary);
  CHECK(bin.threshold == 0.4);
  CHECK(parse_mask_recipe("random-bands:50").count == 50);
  const MaskRecipe band = parse_mask_recipe("band-range:100:150");
  CHECK(band.lo == 100);
  CHECK(band.hi == 150);
  for (const char* bad : {"psm", "random-bands:", "band-range:5", "oracle-ratio-bin:x",
                          "oracle-ratio-bin:1.5", "random-bands:-1"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_mask_recipe(bad), Error);
  }

  std::mt19937_64 rng(3);
  const auto y = testing::random_spectrogram(2, 17, 4, rng);
  CHECK(build_mask(parse_mask_recipe("none"), y, nullptr, 1) == AttentionMask::ones(17, 4));
  CHECK_THROWS_AS(build_mask(parse_mask_recipe("oracle-psm"), y, nullptr, 1), Error);
  CHECK(build_mask(parse_mask_recipe("oracle-ratio"), y, &y, 1) == AttentionMask::ones(17, 4));
  CHECK(build_mask(parse_mask_recipe("band-range:3:4"), y, nullptr, 1).sum() == 8.0);
  CHECK(build_mask(parse_mask_recipe("random-bands:5"), y, nullptr, 9) ==
        random_band_mask(17, 4, 5, 9));
}

TEST_CASE("threshold sweeps") {
  const auto s = threshold_sweep(0.0, 0.9, 0.1);
  REQUIRE(s.size() == 10);
  CHECK(s[3] == 0.3);
  CHECK(s[9] == 0.9);
  CHECK(parse_sweep("0:0.9:0.1") == s);
  CHECK(format_number(0.3) == "0.3");
  CHECK(format_number(0.30000000000000004) == "0.3");
  CHECK_THROWS_AS(parse_sweep("0:1"), Error);
  CHECK_THROWS_AS(threshold_sweep(0.0, 1.0, 0.0), Error);
}

TEST_CASE("experiment configuration") {
  const ExperimentConfig c = config_from_json(kSmallConfig);
  CHECK(c.master_seed == 17);
  CHECK(c.scenes.propagation == Propagation::kPlaneWave);
  CHECK(c.eval_frames == 1);
  CHECK(config_from_json(config_to_json(c)).master_seed == 17);
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));

  auto j = nlohmann::json::parse(kSmallConfig);
  j["scenes"]["mystery"] = 1;
  CHECK_THROWS_AS(config_from_json(j.dump()), Error);
  j = nlohmann::json::parse(kSmallConfig);
  j["methods"] = nlohmann::json::array();
  CHECK_THROWS_AS(config_from_json(j.dump()), Error);
  j = nlohmann::json::parse(kSmallConfig);
  j["eval_frames"] = 20;
  CHECK_THROWS_AS(config_from_json(j.dump()), Error);
  j = nlohmann::json::parse(kSmallConfig);
  j.erase("version");
  CHECK_THROWS_AS(config_from_json(j.dump()), Error);
  j = nlohmann::json::parse(kSmallConfig);
  j["methods"] = {"srp-x"};
  CHECK_THROWS_AS(config_from_json(j.dump()), Error);

  ExperimentConfig swept = c;
  swept.vthr_sweep = {0.0, 0.5};
  const auto masks = swept.all_masks();
  CHECK(masks == std::vector<std::string>{"none", "oracle-psm", "oracle-ratio-bin:0",
                                          "oracle-ratio-bin:0.5"});
}

TEST_CASE("scene enumeration") {
  ExperimentConfig c = config_from_json(kSmallConfig);
  c.scenes.t60 = {0.2, 0.4};
  const auto scenes = enumerate_scenes(c);
  REQUIRE(scenes.size() == 2 * 5 * 2);
  CHECK(scenes[0].id == "scene_0000");
  CHECK(scenes[19].id == "scene_0019");
  CHECK(scenes[0].spec.room.t60 == 0.2);
  CHECK(scenes[10].spec.room.t60 == 0.4);
  CHECK(scenes[0].spec.sources[0].doa_deg == 0.0);
  CHECK(scenes[1].spec.sources[0].doa_deg == 0.0);
  CHECK(scenes[2].spec.sources[0].doa_deg == 45.0);
  CHECK(scenes[0].spec.seed != scenes[1].spec.seed);
  for (const auto& s : scenes) {
    CHECK(s.spec.snr_db >= 20.0);
    CHECK(s.spec.snr_db <= 30.0);
  }
  CHECK(truth_doas(c.scenes) == std::vector<double>{0.0, 45.0, 90.0, 135.0, 180.0});
}

TEST_CASE("experiments are deterministic and independent of the worker count") {
  const ExperimentConfig c = config_from_json(kSmallConfig);
  const ExperimentResult one = run_experiment(c, 1);
  const ExperimentResult two = run_experiment(c, 2);
  // srp-p once, plus srp-mp and srp-om for each of the two masks.
  CHECK(one.records.size() == 10 * 5);
  CHECK(records_csv(one.records) == records_csv(two.records));
  CHECK(report_json(c, one) == report_json(c, two));

  for (std::size_t i = 1; i < one.records.size(); ++i) {
    const auto& a = one.records[i - 1];
    const auto& b = one.records[i];
    CHECK(std::tie(a.scene_id, a.method, a.mask) < std::tie(b.scene_id, b.method, b.mask));
  }
  for (const auto& r : one.records) {
    CHECK(r.frames_used == 1);
    CHECK(r.ae == absolute_error(r.true_doa, r.est_doa));
    if (r.method == "srp-p") CHECK(r.mask == "none");
  }
  const GroupReport& g = find_group(one, "srp-mp", "oracle-psm");
  CHECK(g.report.count == 10);
  CHECK_THROWS_AS(find_group(one, "music", "none"), Error);

  const std::string csv = records_csv(one.records);
  CHECK(csv.rfind("scene_id,t60,sir_db,snr_db,seed,true_doa,method,mask,frames_used,est_doa,ae,sps_loss\n", 0) == 0);

  const auto dir = std::filesystem::temp_directory_path() / "doalab_eval_test";
  std::filesystem::remove_all(dir);
  write_experiment(dir, c, one);
  CHECK(slurp(dir / "records.csv") == csv);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(slurp(dir / "confusion.csv").rfind("method,mask,true_deg,est_deg,count\n", 0) == 0);
  CHECK(slurp(dir / "psacc_vs_doa_t60_0.2.csv").rfind("method,mask,doa_deg,count,acc,psacc,mae\n", 0) == 0);
}
