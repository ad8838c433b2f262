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
#include <numbers>

#include "doalab/error.hpp"
#include "doalab/geometry.hpp"

using namespace doalab;

TEST_CASE("37-point grid has 5 degree spacing") {
  const DoaGrid g = make_grid(37);
  CHECK(g.size() == 37);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 5.0);
  CHECK(g[18] == 90.0);
  CHECK(g[36] == 180.0);
  CHECK(g.spacing() == 5.0);
}

TEST_CASE("fine and minimal grids") {
  const DoaGrid fine = make_grid(180);
  CHECK(fine.spacing() == doctest::Approx(180.0 / 179.0));
  CHECK(fine[1] == doctest::Approx(180.0 / 179.0));
  CHECK(fine[179] == 180.0);
  const DoaGrid two = make_grid(2);
  CHECK(two.angles() == std::vector<double>{0.0, 180.0});
  CHECK_THROWS_AS(make_grid(1), Error);
  CHECK_THROWS_AS(make_grid(0), Error);
}

TEST_CASE("grid binning rounds midpoints up") {
  const DoaGrid g = make_grid(37);
  CHECK(g.nearest_index(2.5) == 1);
  CHECK(g.nearest_index(2.4) == 0);
  CHECK(g.nearest_index(177.6) == 36);
  CHECK(g.nearest_index(180.0) == 36);
}

TEST_CASE("DoaGrid validation") {
  CHECK_THROWS_AS(DoaGrid({0.0, 90.0, 90.0, 180.0}), Error);
  CHECK_THROWS_AS(DoaGrid({0.0, 200.0}), Error);
}

TEST_CASE("array geometry") {
  const ArrayGeometry g = ArrayGeometry::uniform_linear(4, 0.08);
  CHECK(g.mic_distances == std::vector<double>{0.0, 0.08, 0.16, 0.24});
  CHECK(g.speed_of_sound == 343.0);
  CHECK(g.spatial_alias_frequency() == doctest::Approx(343.0 / 0.16));
  ArrayGeometry bad{{0.0, 0.1, 0.05}, 343.0};
  CHECK_THROWS_AS(bad.validate(), Error);
  ArrayGeometry offset{{0.01, 0.1}, 343.0};
  CHECK_THROWS_AS(offset.validate(), Error);
  ArrayGeometry single{{0.0}, 343.0};
  CHECK_THROWS_AS(single.validate(), Error);
}

TEST_CASE("cos_deg is exact at the cardinal angles and antisymmetric") {
  CHECK(cos_deg(0.0) == 1.0);
  CHECK(cos_deg(90.0) == 0.0);
  CHECK(cos_deg(180.0) == -1.0);
  for (double a = 0.0; a <= 180.0; a += 0.25) CHECK(cos_deg(180.0 - a) == -cos_deg(a));
}

TEST_CASE("steering matrix values") {
  const ArrayGeometry geom = ArrayGeometry::uniform_linear(4, 0.08);
  const DoaGrid grid = make_grid(37);
  const SteeringMatrix d = steering_matrix(grid, geom, 257, 16000.0, 512);

  SUBCASE("broadside is all ones") {
    for (std::size_t k = 0; k < 257; ++k) {
      for (std::size_t q = 0; q < 4; ++q) CHECK(d.at(18, k, q) == cdouble(1.0, 0.0));
    }
  }
  SUBCASE("DC is all ones") {
    for (std::size_t c = 0; c < 37; ++c) {
      for (std::size_t q = 0; q < 4; ++q) CHECK(d.at(c, 0, q) == cdouble(1.0, 0.0));
    }
  }
  SUBCASE("phase at 1 kHz, endfire, 8 cm") {
    // Bin 32 of a 512-point FFT at 16 kHz is exactly 1 kHz.
    const double expected = -2.0 * std::numbers::pi * 1000.0 * 0.08 / 343.0;
    CHECK(std::arg(d.at(0, 32, 1)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-1.4655).epsilon(1e-4));
  }
  SUBCASE("unit modulus, reference identity and mirror conjugation") {
    for (std::size_t c = 0; c < 37; ++c) {
      for (std::size_t k = 0; k < 257; ++k) {
        CHECK(d.at(c, k, 0) == cdouble(1.0, 0.0));
        for (std::size_t q = 0; q < 4; ++q) {
          CHECK(std::abs(std::abs(d.at(c, k, q)) - 1.0) < 1e-12);
          CHECK(std::abs(d.at(36 - c, k, q) - std::conj(d.at(c, k, q))) < 1e-12);
        }
      }
    }
  }
  CHECK_THROWS_AS(steering_matrix(grid, geom, 256, 16000.0, 512), Error);
}
