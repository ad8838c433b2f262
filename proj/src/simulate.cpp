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

#include "doalab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "doalab/error.hpp"
#include "doalab/wav.hpp"
#include "fft.hpp"
#include "json_util.hpp"

namespace doalab {
namespace {

using detail::json;

constexpr double kPi = std::numbers::pi;
constexpr double kWallMargin = 1.0;
constexpr int kPlacementTries = 1000;

// Windowed sinc s(u) = sinc(u)·½(1 + cos(πu/41)) at u = m − frac for
// m = −40..40, |frac| ≤ 0.5. sin(π(m − f)) = −(−1)^m·sin(πf), and the
// window cosine is advanced by rotation, so only four trig calls are needed
// per impulse.
void sinc_kernel(double frac, double* out) {
  constexpr int half = kFractionalDelayHalfWidth;
  constexpr double span = half + 1;
  const double s = std::sin(kPi * frac);
  const double step_c = std::cos(kPi / span), step_s = std::sin(kPi / span);
  double wc = std::cos(kPi * (-half - frac) / span);
  double ws = std::sin(kPi * (-half - frac) / span);
  for (int m = -half; m <= half; ++m) {
    const double u = m - frac;
    const double sign = (m % 2 == 0) ? -1.0 : 1.0;
    out[m + half] = sign * s / (kPi * u) * 0.5 * (1.0 + wc);
    const double nc = wc * step_c - ws * step_s;
    ws = ws * step_c + wc * step_s;
    wc = nc;
  }
}

// Allen-Berkley 100 Hz high-pass. Image pulses are all positive, so without
// it the reflections build up a low-frequency offset that lengthens the tail.
void highpass_reflections(std::span<double> x, double sample_rate) {
  const double w = 2.0 * kPi * 100.0 / sample_rate;
  const double r1 = std::exp(-w);
  const double b1 = 2.0 * r1 * std::cos(w), b2 = -r1 * r1, a1 = -(1.0 + r1);
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y0 = b1 * y1 + b2 * y2 + v;
    v = y0 + a1 * y1 + r1 * y2;
    y2 = y1;
    y1 = y0;
  }
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

void normalize_rms(std::vector<double>& x) {
  const double e = energy(x);
  if (e <= 0.0) return;
  const double g = 1.0 / std::sqrt(e / static_cast<double>(x.size()));
  for (double& v : x) v *= g;
}

std::vector<double> standard_normal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

TimeSignal scaled(const TimeSignal& s, double gain) {
  TimeSignal out = s;
  for (std::size_t q = 0; q < s.num_channels(); ++q) {
    for (double& v : out.channel(q)) v *= gain;
  }
  return out;
}

TimeSignal sum_pair(const TimeSignal& a, const TimeSignal& b) {
  TimeSignal out = a;
  for (std::size_t q = 0; q < a.num_channels(); ++q) {
    auto dst = out.channel(q);
    auto src = b.channel(q);
    for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t];
  }
  return out;
}

double channel0_energy(const TimeSignal& s) { return energy(s.channel(0)); }

// Source waveform of `length` samples, of which the first `warmup` feed only
// the reverberation tail of the analyzed segment.
std::vector<double> source_waveform(const SceneSpec& spec, std::size_t index,
                                    std::size_t warmup, std::size_t length) {
  const SourceSpec& src = spec.sources[index];
  const std::uint64_t seed = derive_seed(spec.seed, 100 + index);
  const double fs = spec.sample_rate;
  switch (src.kind) {
    case SourceKind::kWhite: {
      const TimeSignal sig = white_noise(1, length, seed, fs);
      return {sig.channel(0).begin(), sig.channel(0).end()};
    }
    case SourceKind::kSpeechLike: {
      const TimeSignal sig = speech_like(length, seed, fs);
      return {sig.channel(0).begin(), sig.channel(0).end()};
    }
    case SourceKind::kInterferer: {
      const TimeSignal sig = interferer_noise(length, seed, fs);
      return {sig.channel(0).begin(), sig.channel(0).end()};
    }
    case SourceKind::kWav: {
      const TimeSignal wav = read_wav(src.wav, fs);
      const std::size_t needed = length - warmup;
      if (wav.length() < needed) {
        throw Error("source audio too short: " + src.wav.string() + " has " +
                    std::to_string(wav.length()) + " samples, scene needs " +
                    std::to_string(needed));
      }
      // Recorded audio starts at the segment start; the warmup is silence.
      std::vector<double> out(length, 0.0);
      const auto ch = wav.channel(0);
      std::copy_n(ch.begin(), needed, out.begin() + static_cast<std::ptrdiff_t>(warmup));
      return out;
    }
  }
  throw Error("unknown source kind");
}

json point_json(const Point3& p) { return json::array({p[0], p[1], p[2]}); }

json db_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json scene_json_object(const SceneSpec& spec) {
  json sources = json::array();
  for (const SourceSpec& s : spec.sources) {
    json j = {{"doa_deg", s.doa_deg}, {"smd_m", s.smd}, {"signal", source_kind_name(s.kind)}};
    if (s.kind == SourceKind::kWav) j["path"] = s.wav.string();
    sources.push_back(j);
  }
  return {
      {"version", 1},
      {"room", {{"dimensions", point_json(spec.room.dimensions)}, {"t60", spec.room.t60}}},
      {"array",
       {{"mic_distances_m", spec.geometry.mic_distances},
        {"speed_of_sound", spec.geometry.speed_of_sound}}},
      {"sources", sources},
      {"snr_db", db_json(spec.snr_db)},
      {"sir_db", spec.sir_db},
      {"seed", spec.seed},
      {"duration_frames", spec.duration_frames},
      {"sample_rate", spec.sample_rate},
      {"stft", {{"window_length", spec.window_length}, {"hop", spec.hop}}},
      {"propagation", propagation_name(spec.propagation)},
      {"rir_length", spec.rir_length},
  };
}

ArrayGeometry geometry_from_json(const json& a) {
  detail::check_keys(a, {"num_mics", "mic_spacing_m", "mic_distances_m", "speed_of_sound"},
                     "array");
  const double c = detail::value_or(a, "speed_of_sound", kDefaultSpeedOfSound);
  ArrayGeometry g;
  if (a.contains("mic_distances_m")) {
    g.mic_distances = a.at("mic_distances_m").get<std::vector<double>>();
    g.speed_of_sound = c;
  } else {
    g = ArrayGeometry::uniform_linear(detail::value_or<std::size_t>(a, "num_mics", 4),
                                      detail::value_or(a, "mic_spacing_m", 0.08), c);
  }
  g.validate();
  return g;
}

}  // namespace

void RoomSpec::validate() const {
  for (double d : dimensions) {
    if (!(d > 0.0) || !std::isfinite(d)) throw Error("room dimensions must be positive");
  }
  if (!(t60 >= 0.0) || !std::isfinite(t60)) throw Error("t60 must be non-negative");
}

bool RoomSpec::contains(const Point3& p) const {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dimensions[i])) return false;
  }
  return true;
}

namespace {

// Energy of the image lattice seen from the room center, binned by arrival
// time (1 ms) and reflection order: hist[bin·orders + order] = Σ 1/d².
struct ImageEnergy {
  std::size_t bins = 0, orders = 0;
  std::vector<double> hist;
};

constexpr double kDecayBinSeconds = 1e-3;

ImageEnergy image_energy(const RoomSpec& room, double speed_of_sound, double horizon) {
  const auto& dim = room.dimensions;
  const double reach = horizon * speed_of_sound;
  int limits[3];
  int max_order = 0;
  for (int a = 0; a < 3; ++a) {
    limits[a] = static_cast<int>(std::ceil(reach / (2.0 * dim[a]))) + 1;
    max_order += 2 * limits[a] + 1;
  }
  ImageEnergy e;
  e.bins = static_cast<std::size_t>(std::ceil(horizon / kDecayBinSeconds));
  e.orders = static_cast<std::size_t>(max_order) + 1;
  e.hist.assign(e.bins * e.orders, 0.0);
  for (int px = 0; px < 2; ++px) {
    for (int nx = -limits[0]; nx <= limits[0]; ++nx) {
      const double dx = -2.0 * px * (dim[0] / 2.0) + 2.0 * nx * dim[0];
      const int ox = std::abs(nx - px) + std::abs(nx);
      for (int py = 0; py < 2; ++py) {
        for (int ny = -limits[1]; ny <= limits[1]; ++ny) {
          const double dy = -2.0 * py * (dim[1] / 2.0) + 2.0 * ny * dim[1];
          const int oy = ox + std::abs(ny - py) + std::abs(ny);
          for (int pz = 0; pz < 2; ++pz) {
            for (int nz = -limits[2]; nz <= limits[2]; ++nz) {
              const double dz = -2.0 * pz * (dim[2] / 2.0) + 2.0 * nz * dim[2];
              const int order = oy + std::abs(nz - pz) + std::abs(nz);
              if (order == 0) continue;
              const double d2 = dx * dx + dy * dy + dz * dz;
              const double d = std::sqrt(d2);
              if (d >= reach) continue;
              const auto bin = static_cast<std::size_t>(d / speed_of_sound / kDecayBinSeconds);
              if (bin < e.bins) e.hist[bin * e.orders + static_cast<std::size_t>(order)] += 1.0 / d2;
            }
          }
        }
      }
    }
  }
  return e;
}

// Reverberation time of the lattice for reflection coefficient beta, from a
// line fit to the late Schroeder decay between −15 and −45 dB (the early
// part of a lattice seen from the center decays faster than the tail).
double lattice_t60(const ImageEnergy& e, double beta) {
  std::vector<double> gain(e.orders, 1.0);
  for (std::size_t o = 1; o < e.orders; ++o) gain[o] = gain[o - 1] * beta * beta;
  std::vector<double> edc(e.bins, 0.0);
  double acc = 0.0;
  for (std::size_t b = e.bins; b-- > 0;) {
    const double* row = e.hist.data() + b * e.orders;
    for (std::size_t o = 0; o < e.orders; ++o) acc += gain[o] * row[o];
    edc[b] = acc;
  }
  if (!(edc[0] > 0.0)) return 0.0;
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t b = 0; b < e.bins; ++b) {
    const double db = 10.0 * std::log10(edc[b] / edc[0]);
    if (db > -15.0) continue;
    if (db < -45.0) break;
    const double t = (static_cast<double>(b) + 0.5) * kDecayBinSeconds;
    n += 1;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
  }
  if (n < 2) return 0.0;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return slope < 0.0 ? -60.0 / slope : std::numeric_limits<double>::infinity();
}

}  // namespace

double reflection_coefficient(const RoomSpec& room, double speed_of_sound) {
  room.validate();
  if (room.t60 == 0.0) return 0.0;
  const auto& d = room.dimensions;
  const double volume = d[0] * d[1] * d[2];
  const double surface = 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
  const double alpha = 24.0 * std::log(10.0) * volume / (speed_of_sound * surface * room.t60);
  if (alpha > 1.0) {
    throw Error("t60 of " + std::to_string(room.t60) + " s is too short for this room");
  }
  const double sabine = std::sqrt(1.0 - alpha);

  using Key = std::array<double, 5>;
  static std::mutex mutex;
  static std::map<Key, double> cache;
  const Key key{d[0], d[1], d[2], room.t60, speed_of_sound};
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  // Specular image lattices decay more slowly than the Sabine model predicts,
  // so the coefficient is lowered until the lattice decay matches t60.
  const ImageEnergy energy = image_energy(room, speed_of_sound, 2.0 * room.t60);
  double beta = sabine;
  if (lattice_t60(energy, sabine) > room.t60) {
    double lo = 0.0, hi = sabine;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (lattice_t60(energy, mid) > room.t60 ? hi : lo) = mid;
    }
    beta = 0.5 * (lo + hi);
  }
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, beta);
  return beta;
}

void add_fractional_impulse(std::span<double> out, double delay_samples, double amplitude) {
  // |frac| ≤ 0.5 keeps sin(π·frac) accurate when the delay is just below an integer.
  const double whole = std::round(delay_samples);
  const double frac = delay_samples - whole;
  const auto base = static_cast<std::ptrdiff_t>(whole);
  const auto size = static_cast<std::ptrdiff_t>(out.size());
  if (frac == 0.0) {
    if (base >= 0 && base < size) out[static_cast<std::size_t>(base)] += amplitude;
    return;
  }
  constexpr int half = kFractionalDelayHalfWidth;
  double kernel[2 * half + 1];
  sinc_kernel(frac, kernel);
  for (int m = -half; m <= half; ++m) {
    const std::ptrdiff_t t = base + m;
    if (t >= 0 && t < size) out[static_cast<std::size_t>(t)] += amplitude * kernel[m + half];
  }
}

std::vector<double> fractional_delay(std::span<const double> x, double delay_samples) {
  // |frac| ≤ 0.5 keeps sin(π·frac) accurate when the delay is just below an integer.
  const double whole = std::round(delay_samples);
  const double frac = delay_samples - whole;
  const auto base = static_cast<std::ptrdiff_t>(whole);
  const auto size = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(x.size(), 0.0);
  if (frac == 0.0) {
    for (std::ptrdiff_t t = 0; t < size; ++t) {
      const std::ptrdiff_t s = t - base;
      if (s >= 0 && s < size) y[static_cast<std::size_t>(t)] = x[static_cast<std::size_t>(s)];
    }
    return y;
  }
  constexpr int half = kFractionalDelayHalfWidth;
  double kernel[2 * half + 1];
  sinc_kernel(frac, kernel);
  for (std::ptrdiff_t t = 0; t < size; ++t) {
    double acc = 0.0;
    for (int m = -half; m <= half; ++m) {
      const std::ptrdiff_t s = t - base - m;
      if (s >= 0 && s < size) acc += kernel[m + half] * x[static_cast<std::size_t>(s)];
    }
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

Rir image_method_rir(const RoomSpec& room, const Point3& source, std::span<const Point3> mics,
                     const RirOptions& opts) {
  room.validate();
  require(opts.sample_rate > 0.0 && opts.speed_of_sound > 0.0,
          "sample rate and speed of sound must be positive");
  require(!mics.empty(), "at least one microphone is required");
  if (!room.contains(source)) throw Error("source position is outside the room");
  for (const Point3& m : mics) {
    if (!room.contains(m)) throw Error("microphone position is outside the room");
  }
  const double beta = reflection_coefficient(room, opts.speed_of_sound);
  const double samples_per_meter = opts.sample_rate / opts.speed_of_sound;

  std::size_t length = opts.length;
  if (length == 0) {
    double farthest = 0.0;
    for (const Point3& m : mics) {
      farthest = std::max(farthest, std::hypot(source[0] - m[0], source[1] - m[1],
                                               source[2] - m[2]));
    }
    length = std::max(static_cast<std::size_t>(std::ceil(room.t60 * opts.sample_rate)),
                      static_cast<std::size_t>(std::ceil(farthest * samples_per_meter)) +
                          kFractionalDelayHalfWidth + 2);
  }
  // Images beyond this distance cannot reach any tap.
  const double reach =
      (static_cast<double>(length) + kFractionalDelayHalfWidth + 1) / samples_per_meter;
  int max_order = opts.max_order;
  if (beta == 0.0) max_order = 0;

  Rir rir{TimeSignal(mics.size(), length, opts.sample_rate),
          TimeSignal(mics.size(), length, opts.sample_rate)};
  const auto& dim = room.dimensions;
  int limits[3];
  for (int a = 0; a < 3; ++a) limits[a] = static_cast<int>(std::ceil(reach / (2.0 * dim[a]))) + 1;

  std::vector<double> beta_pow(1, 1.0);
  auto gain_of = [&](int order) {
    while (static_cast<int>(beta_pow.size()) <= order) beta_pow.push_back(beta_pow.back() * beta);
    return beta_pow[static_cast<std::size_t>(order)];
  };

  for (std::size_t q = 0; q < mics.size(); ++q) {
    const Point3& mic = mics[q];
    auto taps = rir.taps.channel(q);
    for (int px = 0; px < 2; ++px) {
      for (int nx = -limits[0]; nx <= limits[0]; ++nx) {
        const double dx = (1 - 2 * px) * source[0] + 2.0 * nx * dim[0] - mic[0];
        const int ox = std::abs(nx - px) + std::abs(nx);
        if (std::abs(dx) > reach || (max_order >= 0 && ox > max_order)) continue;
        for (int py = 0; py < 2; ++py) {
          for (int ny = -limits[1]; ny <= limits[1]; ++ny) {
            const double dy = (1 - 2 * py) * source[1] + 2.0 * ny * dim[1] - mic[1];
            const int oy = ox + std::abs(ny - py) + std::abs(ny);
            if (std::hypot(dx, dy) > reach || (max_order >= 0 && oy > max_order)) continue;
            for (int pz = 0; pz < 2; ++pz) {
              for (int nz = -limits[2]; nz <= limits[2]; ++nz) {
                const double dz = (1 - 2 * pz) * source[2] + 2.0 * nz * dim[2] - mic[2];
                const int order = oy + std::abs(nz - pz) + std::abs(nz);
                if (max_order >= 0 && order > max_order) continue;
                const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (dist > reach) continue;
                const double amp = gain_of(order) / (4.0 * kPi * dist);
                const double delay = dist * samples_per_meter;
                add_fractional_impulse(order == 0 ? rir.direct_taps.channel(q) : taps, delay,
                                       amp);
              }
            }
          }
        }
      }
    }
    if (beta > 0.0) highpass_reflections(taps, opts.sample_rate);
    const auto direct = rir.direct_taps.channel(q);
    for (std::size_t t = 0; t < length; ++t) taps[t] += direct[t];
  }
  return rir;
}

TimeSignal plane_wave_synthesize(const TimeSignal& src, double doa_deg,
                                 const ArrayGeometry& geom) {
  require(src.num_channels() == 1, "plane-wave synthesis needs a single-channel source");
  geom.validate();
  const double c = cos_deg(doa_deg);
  TimeSignal out(geom.num_mics(), src.length(), src.sample_rate());
  for (std::size_t q = 0; q < geom.num_mics(); ++q) {
    const double delay = c * geom.mic_distances[q] / geom.speed_of_sound * src.sample_rate();
    const std::vector<double> y = fractional_delay(src.channel(0), delay);
    std::copy(y.begin(), y.end(), out.channel(q).begin());
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

TimeSignal white_noise(std::size_t channels, std::size_t length, std::uint64_t seed,
                       double sample_rate) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  TimeSignal out(channels, length, sample_rate);
  for (std::size_t q = 0; q < channels; ++q) {
    for (double& v : out.channel(q)) v = dist(rng);
  }
  return out;
}

TimeSignal speech_like(std::size_t length, std::uint64_t seed, double sample_rate) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double fs = sample_rate;
  const auto ramp = static_cast<std::size_t>(0.01 * fs);

  std::vector<double> out(length, 0.0);
  std::size_t t = static_cast<std::size_t>(uniform(0.0, 0.1) * fs);
  while (t < length) {
    // Optional fricative onset: high-passed noise.
    std::size_t fric = 0;
    if (uniform(0.0, 1.0) < 0.5) fric = static_cast<std::size_t>(uniform(0.04, 0.1) * fs);
    const auto voiced = static_cast<std::size_t>(uniform(0.1, 0.3) * fs);
    const double level = uniform(0.5, 1.0);
    const double formants[3] = {uniform(300.0, 800.0), uniform(900.0, 2300.0),
                                uniform(2300.0, 3200.0)};
    std::vector<double> x(voiced);
    for (double& v : x) v = gauss(rng);
    // Parallel two-pole resonators at the formants, 120 Hz bandwidth, plus
    // a weak direct path that keeps some high-frequency energy.
    const double r = std::exp(-kPi * 120.0 / fs);
    std::vector<double> shaped(voiced, 0.0);
    for (std::size_t i = 0; i < voiced; ++i) shaped[i] = 0.1 * x[i];
    for (double formant : formants) {
      const double a1 = -2.0 * r * std::cos(2.0 * kPi * formant / fs);
      const double a2 = r * r;
      double y1 = 0.0, y2 = 0.0;
      for (std::size_t i = 0; i < voiced; ++i) {
        const double y = x[i] - a1 * y1 - a2 * y2;
        y2 = y1;
        y1 = y;
        shaped[i] += y * (1.0 - r);
      }
    }
    normalize_rms(shaped);

    std::vector<double> seg(fric, 0.0);
    if (fric > 0) {
      double p1 = 0.0, p2 = 0.0;
      for (double& v : seg) {
        const double w = gauss(rng);
        v = w - 2.0 * p1 + p2;  // second difference, rising spectrum
        p2 = p1;
        p1 = w;
      }
      normalize_rms(seg);
      for (double& v : seg) v *= 0.5;
    }
    seg.insert(seg.end(), shaped.begin(), shaped.end());

    const std::size_t n = seg.size();
    for (std::size_t i = 0; i < n && t + i < length; ++i) {
      double g = level;
      if (i < ramp) g *= static_cast<double>(i) / static_cast<double>(ramp);
      if (n - i <= ramp) g *= static_cast<double>(n - i) / static_cast<double>(ramp);
      out[t + i] = g * seg[i];
    }
    t += n + static_cast<std::size_t>(uniform(0.05, 0.2) * fs);
  }
  normalize_rms(out);
  return TimeSignal({out}, sample_rate);
}

TimeSignal interferer_noise(std::size_t length, std::uint64_t seed, double sample_rate) {
  std::mt19937_64 rng(seed);
  std::vector<double> x = standard_normal(length, rng);
  double prev = 0.0;
  for (double& v : x) {
    v += 0.7 * prev;
    prev = v;
  }
  normalize_rms(x);
  return TimeSignal({x}, sample_rate);
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "white") return SourceKind::kWhite;
  if (name == "speech_like") return SourceKind::kSpeechLike;
  if (name == "interferer") return SourceKind::kInterferer;
  if (name == "wav") return SourceKind::kWav;
  throw Error("unknown source signal '" + std::string(name) +
              "' (valid: white, speech_like, interferer, wav)");
}

std::string source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::kWhite: return "white";
    case SourceKind::kSpeechLike: return "speech_like";
    case SourceKind::kInterferer: return "interferer";
    case SourceKind::kWav: return "wav";
  }
  return "unknown";
}

Propagation parse_propagation(std::string_view name) {
  if (name == "image_method") return Propagation::kImageMethod;
  if (name == "plane_wave") return Propagation::kPlaneWave;
  throw Error("unknown propagation '" + std::string(name) +
              "' (valid: image_method, plane_wave)");
}

std::string propagation_name(Propagation p) {
  return p == Propagation::kPlaneWave ? "plane_wave" : "image_method";
}

void SceneSpec::validate() const {
  room.validate();
  geometry.validate();
  if (sources.empty() || sources.size() > 2) throw Error("a scene needs one or two sources");
  for (const SourceSpec& s : sources) {
    if (!(s.doa_deg >= 0.0 && s.doa_deg <= 180.0)) throw Error("source DOA outside [0, 180]");
    if (!(s.smd > 0.0)) throw Error("source distance must be positive");
  }
  require(sample_rate > 0.0, "sample rate must be positive");
  require(duration_frames > 0, "duration_frames must be positive");
  require(window_length > 0 && hop > 0 && hop <= window_length, "invalid STFT parameters");
  require(!std::isnan(snr_db) && snr_db > -std::numeric_limits<double>::infinity(),
          "snr_db must be a number or +inf");
  require(std::isfinite(sir_db), "sir_db must be finite");
}

std::size_t SceneSpec::num_samples() const {
  return samples_for_frames(duration_frames, window_length, hop);
}

ScenePlacement place_scene(const SceneSpec& spec) {
  const auto& dim = spec.room.dimensions;
  for (double d : dim) {
    if (!(d > 2.0 * kWallMargin)) {
      throw Error("room too small for the 1 m wall margin");
    }
  }
  const auto& dist = spec.geometry.mic_distances;
  double mean = 0.0;
  for (double d : dist) mean += d;
  mean /= static_cast<double>(dist.size());

  std::mt19937_64 rng(derive_seed(spec.seed, 1));
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto inside = [&](const Point3& p) {
    for (int a = 0; a < 3; ++a) {
      if (p[a] < kWallMargin || p[a] > dim[a] - kWallMargin) return false;
    }
    return true;
  };
  for (int attempt = 0; attempt < kPlacementTries; ++attempt) {
    ScenePlacement pl;
    pl.array_center = {uniform(kWallMargin, dim[0] - kWallMargin),
                       uniform(kWallMargin, dim[1] - kWallMargin),
                       uniform(kWallMargin, dim[2] - kWallMargin)};
    pl.array_azimuth_deg = uniform(0.0, 360.0);
    const double phi = pl.array_azimuth_deg * kPi / 180.0;
    const Point3 axis{std::cos(phi), std::sin(phi), 0.0};
    const Point3 perp{-std::sin(phi), std::cos(phi), 0.0};
    bool ok = true;
    for (double d : dist) {
      const double o = d - mean;
      pl.mics.push_back({pl.array_center[0] + o * axis[0], pl.array_center[1] + o * axis[1],
                         pl.array_center[2]});
      ok = ok && inside(pl.mics.back());
    }
    // θ = 0 lies beyond the first microphone along the array axis.
    for (const SourceSpec& s : spec.sources) {
      const double along = -cos_deg(s.doa_deg) * s.smd;
      const double across = std::sin(s.doa_deg * kPi / 180.0) * s.smd;
      pl.sources.push_back({pl.array_center[0] + along * axis[0] + across * perp[0],
                            pl.array_center[1] + along * axis[1] + across * perp[1],
                            pl.array_center[2]});
      ok = ok && inside(pl.sources.back());
    }
    if (ok) return pl;
  }
  throw Error("cannot place array and sources in the room with 1 m wall margins");
}

TimeSignal compose_mixture(const std::vector<TimeSignal>& direct,
                           const std::vector<TimeSignal>& reverb, const TimeSignal& noise) {
  require(!direct.empty() && direct.size() == reverb.size(), "component count mismatch");
  TimeSignal mix = sum_pair(direct[0], reverb[0]);
  for (std::size_t i = 1; i < direct.size(); ++i) mix = sum_pair(mix, sum_pair(direct[i], reverb[i]));
  return sum_pair(mix, noise);
}

double energy_ratio_db(const TimeSignal& a, const TimeSignal& b) {
  return 10.0 * std::log10(channel0_energy(a) / channel0_energy(b));
}

SceneTruth mix_scene(const SceneSpec& spec) {
  spec.validate();
  const std::size_t len = spec.num_samples();
  const std::size_t mics = spec.geometry.num_mics();
  const double fs = spec.sample_rate;
  const bool image = spec.propagation == Propagation::kImageMethod;

  SceneTruth truth;
  if (image) truth.placement = place_scene(spec);

  std::vector<TimeSignal> clean;  // direct + reverb per source, before gains
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    const SourceSpec& src = spec.sources[i];
    truth.doas_deg.push_back(src.doa_deg);
    TimeSignal direct(mics, len, fs), reverb(mics, len, fs);
    if (image) {
      RirOptions ro{fs, spec.geometry.speed_of_sound, spec.rir_length, -1};
      const Rir rir = image_method_rir(spec.room, truth.placement.sources[i],
                                       truth.placement.mics, ro);
      const std::size_t warmup = rir.taps.length();
      const std::vector<double> s = source_waveform(spec, i, warmup, warmup + len);
      if (energy(s) == 0.0) throw Error("zero-energy source");
      for (std::size_t q = 0; q < mics; ++q) {
        std::vector<double> late(rir.taps.channel(q).begin(), rir.taps.channel(q).end());
        const auto dt = rir.direct_taps.channel(q);
        for (std::size_t t = 0; t < late.size(); ++t) late[t] -= dt[t];
        const auto d = detail::fft_convolve(s, dt, warmup, len);
        const auto r = detail::fft_convolve(s, late, warmup, len);
        std::copy(d.begin(), d.end(), direct.channel(q).begin());
        std::copy(r.begin(), r.end(), reverb.channel(q).begin());
      }
    } else {
      const std::size_t warmup = 2 * kFractionalDelayHalfWidth;
      const std::vector<double> s = source_waveform(spec, i, warmup, warmup + len + warmup);
      if (energy(s) == 0.0) throw Error("zero-energy source");
      const TimeSignal pw = plane_wave_synthesize(TimeSignal({s}, fs), src.doa_deg, spec.geometry);
      for (std::size_t q = 0; q < mics; ++q) {
        const auto ch = pw.channel(q);
        std::copy_n(ch.begin() + static_cast<std::ptrdiff_t>(warmup), len,
                    direct.channel(q).begin());
      }
    }
    if (channel0_energy(direct) + channel0_energy(reverb) == 0.0) {
      throw Error("zero-energy source");
    }
    truth.direct.push_back(std::move(direct));
    truth.reverb.push_back(std::move(reverb));
  }

  const double ref = channel0_energy(sum_pair(truth.direct[0], truth.reverb[0]));
  truth.source_gains.push_back(1.0);
  for (std::size_t i = 1; i < truth.direct.size(); ++i) {
    const double e = channel0_energy(sum_pair(truth.direct[i], truth.reverb[i]));
    const double gain = std::sqrt(ref / e / std::pow(10.0, spec.sir_db / 10.0));
    truth.direct[i] = scaled(truth.direct[i], gain);
    truth.reverb[i] = scaled(truth.reverb[i], gain);
    truth.source_gains.push_back(gain);
  }

  truth.noise = TimeSignal(mics, len, fs);
  if (std::isfinite(spec.snr_db)) {
    const TimeSignal v = white_noise(mics, len, derive_seed(spec.seed, 200), fs);
    const double gain = std::sqrt(ref / channel0_energy(v) / std::pow(10.0, spec.snr_db / 10.0));
    truth.noise = scaled(v, gain);
  }
  truth.mixture = compose_mixture(truth.direct, truth.reverb, truth.noise);
  return truth;
}

std::string scene_to_json(const SceneSpec& spec) { return scene_json_object(spec).dump(2); }

SceneSpec scene_from_json(std::string_view text) {
  const json j = detail::parse_json(text, "scene");
  try {
    detail::check_keys(j,
                       {"version", "room", "array", "sources", "snr_db", "sir_db", "seed",
                        "duration_frames", "sample_rate", "stft", "propagation", "rir_length"},
                       "scene");
    if (detail::value_or(j, "version", 1) != 1) throw Error("unsupported scene version");
    SceneSpec spec;
    const json& room = j.at("room");
    detail::check_keys(room, {"dimensions", "t60"}, "room");
    const auto dims = room.at("dimensions").get<std::vector<double>>();
    if (dims.size() != 3) throw Error("room dimensions need three values");
    spec.room.dimensions = {dims[0], dims[1], dims[2]};
    spec.room.t60 = detail::value_or(room, "t60", 0.0);
    spec.geometry = geometry_from_json(j.value("array", json::object()));
    for (const json& s : j.at("sources")) {
      detail::check_keys(s, {"doa_deg", "smd_m", "signal", "path"}, "source");
      SourceSpec src;
      src.doa_deg = s.at("doa_deg").get<double>();
      src.smd = detail::value_or(s, "smd_m", 1.5);
      src.kind = parse_source_kind(detail::value_or<std::string>(s, "signal", "white"));
      if (src.kind == SourceKind::kWav) src.wav = s.at("path").get<std::string>();
      spec.sources.push_back(src);
    }
    if (j.contains("snr_db") && !j.at("snr_db").is_null()) {
      spec.snr_db = j.at("snr_db").get<double>();
    }
    spec.sir_db = detail::value_or(j, "sir_db", 0.0);
    spec.seed = detail::value_or<std::uint64_t>(j, "seed", 0);
    spec.duration_frames = detail::value_or<std::size_t>(j, "duration_frames", 100);
    spec.sample_rate = detail::value_or(j, "sample_rate", 16000.0);
    if (j.contains("stft")) {
      const json& st = j.at("stft");
      detail::check_keys(st, {"window_length", "hop"}, "stft");
      spec.window_length = detail::value_or<std::size_t>(st, "window_length", 512);
      spec.hop = detail::value_or<std::size_t>(st, "hop", 256);
    }
    spec.propagation =
        parse_propagation(detail::value_or<std::string>(j, "propagation", "image_method"));
    spec.rir_length = detail::value_or<std::size_t>(j, "rir_length", 0);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid scene: ") + e.what());
  }
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scene file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  SceneSpec spec = scene_from_json(ss.str());
  for (SourceSpec& s : spec.sources) {
    if (s.kind == SourceKind::kWav && s.wav.is_relative()) s.wav = path.parent_path() / s.wav;
  }
  return spec;
}

std::string truth_to_json(const SceneSpec& spec, const SceneTruth& truth) {
  json mics = json::array(), sources = json::array();
  for (const Point3& p : truth.placement.mics) mics.push_back(point_json(p));
  for (const Point3& p : truth.placement.sources) sources.push_back(point_json(p));
  json j = {
      {"version", 1},
      {"scene", scene_json_object(spec)},
      {"doas_deg", truth.doas_deg},
      {"source_gains", truth.source_gains},
      {"num_samples", truth.mixture.length()},
      {"sample_rate", truth.mixture.sample_rate()},
      {"measured_snr_db", nullptr},
      {"measured_sir_db", nullptr},
  };
  const TimeSignal s0 = sum_pair(truth.direct[0], truth.reverb[0]);
  if (channel0_energy(truth.noise) > 0.0) {
    j["measured_snr_db"] = energy_ratio_db(s0, truth.noise);
  }
  if (truth.direct.size() > 1) {
    j["measured_sir_db"] = energy_ratio_db(s0, sum_pair(truth.direct[1], truth.reverb[1]));
  }
  if (spec.propagation == Propagation::kImageMethod) {
    j["placement"] = {{"array_center", point_json(truth.placement.array_center)},
                      {"array_azimuth_deg", truth.placement.array_azimuth_deg},
                      {"mic_positions", mics},
                      {"source_positions", sources}};
  }
  return j.dump(2);
}

void write_scene_bundle(const std::filesystem::path& dir, const SceneSpec& spec,
                        const SceneTruth& truth) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
  write_wav(dir / "mixture.wav", truth.mixture);
  for (std::size_t i = 0; i < truth.direct.size(); ++i) {
    write_wav(dir / ("source" + std::to_string(i + 1) + "_direct.wav"), truth.direct[i]);
  }
  std::ofstream out(dir / "truth.json");
  if (!out) throw Error("cannot write " + (dir / "truth.json").string());
  out << truth_to_json(spec, truth) << '\n';
}

}  // namespace doalab
