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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "doalab/attention.hpp"
#include "doalab/estimate.hpp"
#include "doalab/eval.hpp"
#include "doalab/kernels.hpp"
#include "doalab/simulate.hpp"
#include "test_support.hpp"

using namespace doalab;
using doalab::testing::random_mask;
using doalab::testing::random_signal;
using doalab::testing::random_spectrogram;
using doalab::testing::rel_diff;

namespace {

constexpr int kCases = 1000;

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

ArrayGeometry random_geometry(std::mt19937_64& rng, std::size_t mics) {
  ArrayGeometry g;
  g.mic_distances.push_back(0.0);
  for (std::size_t q = 1; q < mics; ++q) g.mic_distances.push_back(g.mic_distances.back() + uniform(rng, 0.01, 0.1));
  g.speed_of_sound = 343.0;
  return g;
}

// Spectrogram whose bins occasionally vanish, to exercise the PHAT floor.
MultichannelSpectrogram sparse_spectrogram(std::size_t q, std::size_t k, std::size_t n,
                                           std::mt19937_64& rng) {
  auto y = random_spectrogram(q, k, n, rng);
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t f = 0; f < n; ++f) {
      for (auto& v : y.frame(c, f)) {
        if (uniform(rng, 0.0, 1.0) < 0.05) v = 0.0;
      }
    }
  }
  return y;
}

}  // namespace

TEST_CASE("oracle masks are bounded and PSM vanishes beyond a quarter-cycle phase error") {
  std::mt19937_64 rng(101);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t q = pick(rng, 1, 3), k = pick(rng, 2, 20), n = pick(rng, 1, 6);
    const auto d = sparse_spectrogram(q, k, n, rng);
    auto y = sparse_spectrogram(q, k, n, rng);
    if (i % 3 == 0) y = d;
    const std::size_t ref = pick(rng, 0, q - 1);
    const AttentionMask psm = psm_mask(d, y, ref);
    const AttentionMask ratio = magnitude_ratio_mask(d, y, ref);
    for (std::size_t b = 0; b < k; ++b) {
      for (std::size_t f = 0; f < n; ++f) {
        REQUIRE(psm.at(b, f) >= 0.0);
        REQUIRE(psm.at(b, f) <= 1.0);
        REQUIRE(ratio.at(b, f) >= 0.0);
        REQUIRE(ratio.at(b, f) <= 1.0);
        if ((d.at(ref, b, f) * std::conj(y.at(ref, b, f))).real() <= 0.0) {
          REQUIRE(psm.at(b, f) == 0.0);
        }
      }
    }
    REQUIRE_NOTHROW(psm.validate());
  }
}

TEST_CASE("binarize produces an idempotent 0/1 mask") {
  std::mt19937_64 rng(102);
  for (int i = 0; i < kCases; ++i) {
    const AttentionMask m = random_mask(pick(rng, 1, 30), pick(rng, 1, 8), rng);
    const double v = uniform(rng, 0.0, 1.0);
    const AttentionMask b = binarize(m, v);
    for (std::size_t k = 0; k < m.num_bins(); ++k) {
      for (std::size_t n = 0; n < m.num_frames(); ++n) {
        REQUIRE(b.at(k, n) == (m.at(k, n) >= v ? 1.0 : 0.0));
      }
    }
    REQUIRE(binarize(b, v) == b);
  }
}

TEST_CASE("band masks select whole rows of the requested size") {
  std::mt19937_64 rng(103);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t k = pick(rng, 1, 300), n = pick(rng, 1, 5);
    const std::size_t count = pick(rng, 0, k);
    const AttentionMask r = random_band_mask(k, n, count, rng());
    const std::size_t lo = pick(rng, 0, k - 1), hi = pick(rng, lo, k - 1);
    const AttentionMask b = band_range_mask(k, n, lo, hi);
    REQUIRE(r.sum() == static_cast<double>(count * n));
    REQUIRE(b.sum() == static_cast<double>((hi - lo + 1) * n));
    for (std::size_t row = 0; row < k; ++row) {
      for (std::size_t f = 0; f < n; ++f) {
        REQUIRE((r.at(row, f) == 0.0 || r.at(row, f) == 1.0));
        REQUIRE(r.at(row, f) == r.at(row, 0));
        REQUIRE(b.at(row, f) == (row >= lo && row <= hi ? 1.0 : 0.0));
      }
    }
  }
}

TEST_CASE("weighted cross-spectra are conjugate-symmetric with a real non-negative diagonal") {
  std::mt19937_64 rng(104);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t q = pick(rng, 2, 5), k = pick(rng, 2, 12), n = pick(rng, 1, 4);
    const auto y = sparse_spectrogram(q, k, n, rng);
    const auto w = mask_weighting(phat_weighting(y), random_mask(k, n, rng));
    const auto phi = cross_spectral_tensor(y, w);
    for (std::size_t b = 0; b < k; ++b) {
      for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t a = 0; a < q; ++a) {
          REQUIRE(phi.at(b, f, a, a).imag() == 0.0);
          REQUIRE(phi.at(b, f, a, a).real() >= 0.0);
          for (std::size_t c = a + 1; c < q; ++c) {
            REQUIRE(phi.at(b, f, c, a) == std::conj(phi.at(b, f, a, c)));
            REQUIRE(std::abs(phi.at(b, f, a, c)) <= 1.0 + 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("SRP-PHAT equals SRP-MP with an all-ones mask") {
  std::mt19937_64 rng(105);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t q = pick(rng, 2, 5), k = pick(rng, 2, 17), n = pick(rng, 1, 5);
    const auto y = sparse_spectrogram(q, k, n, rng);
    const auto geom = random_geometry(rng, q);
    const DoaGrid grid = make_grid(pick(rng, 2, 40));
    const std::size_t begin = pick(rng, 0, n - 1);
    const FrameRange range{begin, pick(rng, begin + 1, n)};
    const auto w = phat_weighting(y);
    REQUIRE(mask_weighting(w, AttentionMask::ones(k, n)) == w);
    const auto d = steering_for(y, grid, geom);
    const auto raw = srp(cross_spectral_tensor(y, w), d, range);
    const auto masked = srp(cross_spectral_tensor(y, mask_weighting(w, AttentionMask::ones(k, n))), d, range);
    REQUIRE(raw.values == masked.values);
    // Random data can have no positive response; both paths must then fail alike.
    if (*std::max_element(raw.values.begin(), raw.values.end()) > 0.0) {
      REQUIRE(srp_phat(y, grid, geom, range).values ==
              srp_mp(y, AttentionMask::ones(k, n), grid, geom, range).values);
    } else {
      REQUIRE_THROWS(srp_phat(y, grid, geom, range));
      REQUIRE_THROWS(srp_mp(y, AttentionMask::ones(k, n), grid, geom, range));
    }
  }
}

TEST_CASE("output masking is invariant to mask scale") {
  std::mt19937_64 rng(106);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t q = pick(rng, 2, 4), k = pick(rng, 2, 17), n = pick(rng, 1, 4);
    const auto y = random_spectrogram(q, k, n, rng);
    const auto geom = random_geometry(rng, q);
    const DoaGrid grid = make_grid(pick(rng, 2, 19));
    const auto nb = narrowband_srp(cross_spectral_tensor(y, phat_weighting(y)),
                                   steering_for(y, grid, geom), FrameRange::all(n));
    AttentionMask m = random_mask(k, n, rng);
    AttentionMask scaled = m;
    const double a = uniform(rng, 1e-3, 1.0);
    for (std::size_t b = 0; b < k; ++b) {
      for (std::size_t f = 0; f < n; ++f) scaled.at(b, f) *= a;
    }
    const auto x = output_masking(nb, m);
    const auto z = output_masking(nb, scaled);
    const double scale = *std::max_element(x.values.begin(), x.values.end(),
                                           [](double u, double v) { return std::abs(u) < std::abs(v); });
    for (std::size_t c = 0; c < grid.size(); ++c) {
      REQUIRE(std::abs(x[c] - z[c]) <= 1e-12 * std::max(1.0, std::abs(scale)));
    }
  }
}

TEST_CASE("normalization is idempotent with a unit maximum") {
  std::mt19937_64 rng(107);
  for (int i = 0; i < kCases; ++i) {
    SpatialPowerSpectrum s;
    const std::size_t c = pick(rng, 1, 50);
    for (std::size_t j = 0; j < c; ++j) s.values.push_back(uniform(rng, -1.0, 5.0));
    s.values[pick(rng, 0, c - 1)] = uniform(rng, 0.1, 6.0);
    const auto n = normalize_sps(s);
    REQUIRE(*std::max_element(n.values.begin(), n.values.end()) == 1.0);
    REQUIRE(normalize_sps(n).values == n.values);
    REQUIRE(argmax_index(n) == argmax_index(s));
  }
}

TEST_CASE("conjugating the spectrogram mirrors the spatial spectrum") {
  std::mt19937_64 rng(108);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t q = pick(rng, 2, 4), k = pick(rng, 2, 17), n = pick(rng, 1, 3);
    auto y = random_spectrogram(q, k, n, rng);
    const auto geom = random_geometry(rng, q);
    const DoaGrid grid = make_grid(pick(rng, 2, 37));
    const auto d = steering_for(y, grid, geom);
    const auto a = srp(cross_spectral_tensor(y, phat_weighting(y)), d, FrameRange::all(n));
    for (std::size_t c = 0; c < q; ++c) {
      for (std::size_t f = 0; f < n; ++f) {
        for (auto& v : y.frame(c, f)) v = std::conj(v);
      }
    }
    const auto b = srp(cross_spectral_tensor(y, phat_weighting(y)), d, FrameRange::all(n));
    const std::size_t last = grid.size() - 1;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      REQUIRE(std::abs(a[c] - b[last - c]) < 1e-9);
    }
  }
}

TEST_CASE("steering vectors have unit modulus and mirror by conjugation") {
  std::mt19937_64 rng(109);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t q = pick(rng, 2, 6);
    const auto geom = random_geometry(rng, q);
    const std::size_t fft = 2 * pick(rng, 1, 64);
    const DoaGrid grid = make_grid(pick(rng, 2, 40));
    const auto d = steering_matrix(grid, geom, fft / 2 + 1, 16000.0, fft);
    const std::size_t c = pick(rng, 0, grid.size() - 1), k = pick(rng, 0, fft / 2);
    const std::size_t m = pick(rng, 0, q - 1);
    REQUIRE(std::abs(std::abs(d.at(c, k, m)) - 1.0) < 1e-12);
    REQUIRE(std::abs(d.at(grid.size() - 1 - c, k, m) - std::conj(d.at(c, k, m))) < 1e-12);
  }
}

TEST_CASE("stft is linear and satisfies Parseval per frame") {
  std::mt19937_64 rng(110);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t wl = 2 * pick(rng, 2, 32), hop = pick(rng, 1, wl), len = wl + pick(rng, 0, 100);
    const auto x = random_signal(1, len, rng);
    const auto z = random_signal(1, len, rng);
    const double a = uniform(rng, -2.0, 2.0), b = uniform(rng, -2.0, 2.0);
    TimeSignal mix(1, len, 16000.0);
    for (std::size_t t = 0; t < len; ++t) mix.at(0, t) = a * x.at(0, t) + b * z.at(0, t);
    const auto sx = stft(x, wl, hop), sz = stft(z, wl, hop), sm = stft(mix, wl, hop);
    for (std::size_t f = 0; f < sm.num_frames(); ++f) {
      for (std::size_t k = 0; k < sm.num_bins(); ++k) {
        REQUIRE(std::abs(sm.at(0, k, f) - (a * sx.at(0, k, f) + b * sz.at(0, k, f))) < 1e-10 * wl);
      }
    }
    const auto r = stft(x, wl, hop, Window::kRectangular);
    const std::size_t f = pick(rng, 0, r.num_frames() - 1);
    double time = 0.0, freq = 0.0;
    for (std::size_t t = 0; t < wl; ++t) time += x.at(0, f * hop + t) * x.at(0, f * hop + t);
    for (std::size_t k = 0; k < r.num_bins(); ++k) {
      const double w = (k == 0 || k == wl / 2) ? 1.0 : 2.0;
      freq += w * std::norm(r.at(0, k, f));
    }
    REQUIRE(rel_diff(freq / static_cast<double>(wl), time) < 1e-10);
  }
}

TEST_CASE("istft inverts stft away from the edges") {
  std::mt19937_64 rng(111);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t wl = 2 * pick(rng, 2, 64), frames = pick(rng, 3, 10);
    const auto x = random_signal(pick(rng, 1, 3), samples_for_frames(frames, wl, wl / 2), rng);
    const auto r = istft(stft(x, wl, wl / 2));
    for (std::size_t q = 0; q < x.num_channels(); ++q) {
      for (std::size_t t = wl / 2; t + wl / 2 < x.length(); ++t) {
        REQUIRE(std::abs(r.at(q, t) - x.at(q, t)) < 1e-9);
      }
    }
  }
}

TEST_CASE("scene decomposition is sample-exact") {
  std::mt19937_64 rng(112);
  const SourceKind kinds[] = {SourceKind::kWhite, SourceKind::kSpeechLike, SourceKind::kInterferer};
  for (int i = 0; i < kCases; ++i) {
    SceneSpec s;
    // A few rooms, so the per-room wall calibration is shared between cases.
    const Point3 rooms[] = {{4.0, 5.0, 3.0}, {6.0, 4.5, 2.7}, {8.0, 6.0, 3.2}};
    const double t60s[] = {0.2, 0.4, 0.6};
    s.room = {rooms[pick(rng, 0, 2)], t60s[pick(rng, 0, 2)]};
    s.geometry = random_geometry(rng, pick(rng, 2, 4));
    const std::size_t sources = pick(rng, 1, 2);
    for (std::size_t j = 0; j < sources; ++j) {
      s.sources.push_back({uniform(rng, 0.0, 180.0), uniform(rng, 0.8, 1.4), kinds[pick(rng, 0, 2)], {}});
    }
    // Speech-like pauses last up to 0.2 s, so short scenes use noise sources.
    s.duration_frames = pick(rng, 2, 40);
    if (s.duration_frames < 30) {
      for (auto& src : s.sources) {
        if (src.kind == SourceKind::kSpeechLike) src.kind = SourceKind::kWhite;
      }
    }
    s.sir_db = uniform(rng, -6.0, 6.0);
    s.snr_db = pick(rng, 0, 4) == 0 ? std::numeric_limits<double>::infinity() : uniform(rng, 0.0, 30.0);
    s.seed = rng();
    s.rir_length = 128;
    s.propagation = pick(rng, 0, 1) == 0 ? Propagation::kImageMethod : Propagation::kPlaneWave;
    const SceneTruth t = mix_scene(s);
    REQUIRE(compose_mixture(t.direct, t.reverb, t.noise) == t.mixture);
    for (std::size_t q = 0; q < t.mixture.num_channels(); ++q) {
      for (std::size_t n = 0; n < t.mixture.length(); ++n) {
        double expect = t.direct[0].at(q, n) + t.reverb[0].at(q, n);
        if (sources == 2) expect += t.direct[1].at(q, n) + t.reverb[1].at(q, n);
        expect += t.noise.at(q, n);
        REQUIRE(t.mixture.at(q, n) == expect);
      }
    }
  }
}

TEST_CASE("kernel backends agree bit for bit") {
  std::mt19937_64 rng(113);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto& ref = kernels::scalar();
  const auto backends = kernels::available();
  for (int i = 0; i < kCases; ++i) {
    const std::size_t n = pick(rng, 1, 70), pairs = pick(rng, 1, 6);
    std::vector<double> a(pairs * n), b(pairs * n), c(pairs * n), d(pairs * n);
    for (auto* v : {&a, &b, &c, &d}) {
      for (double& x : *v) x = g(rng);
    }
    for (const auto* t : backends) {
      std::vector<double> o1(n), o2(n), o3(n), o4(n);
      ref.phat_weights(a.data(), b.data(), 1e-8, o1.data(), n);
      t->phat_weights(a.data(), b.data(), 1e-8, o2.data(), n);
      REQUIRE(std::memcmp(o1.data(), o2.data(), n * sizeof(double)) == 0);
      ref.cross_spectrum(a.data(), b.data(), c.data(), d.data(), o1.data(), o3.data(), n);
      t->cross_spectrum(a.data(), b.data(), c.data(), d.data(), o2.data(), o4.data(), n);
      REQUIRE(std::memcmp(o1.data(), o2.data(), n * sizeof(double)) == 0);
      REQUIRE(std::memcmp(o3.data(), o4.data(), n * sizeof(double)) == 0);
      ref.steered_power(a.data(), b.data(), c.data(), d.data(), pairs, n, n, o1.data());
      t->steered_power(a.data(), b.data(), c.data(), d.data(), pairs, n, n, o2.data());
      REQUIRE(std::memcmp(o1.data(), o2.data(), n * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("evaluation metrics are ordered") {
  std::mt19937_64 rng(114);
  const DoaGrid grid = make_grid(37);
  for (int i = 0; i < kCases; ++i) {
    std::vector<EvalRecord> rs(pick(rng, 1, 40));
    double max_ae = 0.0;
    for (auto& r : rs) {
      r.true_doa = grid[pick(rng, 0, 36)];
      r.est_doa = grid[pick(rng, 0, 36)];
      r.ae = absolute_error(r.true_doa, r.est_doa);
      max_ae = std::max(max_ae, r.ae);
    }
    const EvalReport rep = summarize(rs);
    REQUIRE(rep.psacc >= rep.acc);
    REQUIRE(rep.mae >= 0.0);
    REQUIRE(rep.medae <= max_ae);
    REQUIRE(rep.mae <= max_ae);
    std::size_t total = 0;
    for (const auto& row : confusion_matrix(rs, grid)) {
      for (std::size_t v : row) total += v;
    }
    REQUIRE(total == rs.size());
  }
}

TEST_CASE("sps loss is a symmetric non-negative distance") {
  std::mt19937_64 rng(115);
  for (int i = 0; i < kCases; ++i) {
    SpatialPowerSpectrum a, b;
    const std::size_t c = pick(rng, 1, 40);
    for (std::size_t j = 0; j < c; ++j) {
      a.values.push_back(uniform(rng, 0.0, 1.0));
      b.values.push_back(uniform(rng, 0.0, 1.0));
    }
    REQUIRE(sps_loss(a, b) >= 0.0);
    REQUIRE(sps_loss(a, b) == sps_loss(b, a));
    REQUIRE(sps_loss(a, a) == 0.0);
  }
}
