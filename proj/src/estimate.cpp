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

#include "doalab/estimate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doalab/error.hpp"
#include "doalab/kernels.hpp"

namespace doalab {
namespace {

void check_range(FrameRange range, std::size_t frames) {
  if (range.empty()) throw Error("empty frame range");
  require(range.end <= frames, "frame range exceeds the number of frames");
}

// conj(D[c,k,q])·D[c,k,j] for every off-diagonal pair, split and laid out
// [direction][pair][bin] to match the cross-spectra storage.
struct PairSteering {
  std::size_t pairs = 0;
  std::size_t bins = 0;
  std::vector<double> re, im;

  PairSteering(const CrossSpectralTensor& phi, const SteeringMatrix& d)
      : pairs(phi.num_pairs()), bins(d.num_bins()) {
    const std::size_t dirs = d.num_directions();
    re.resize(dirs * pairs * bins);
    im.resize(dirs * pairs * bins);
    for (std::size_t c = 0; c < dirs; ++c) {
      for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t q = phi.pair_first(p), j = phi.pair_second(p);
        for (std::size_t k = 0; k < bins; ++k) {
          const cdouble g = std::conj(d.at(c, k, q)) * d.at(c, k, j);
          re[(c * pairs + p) * bins + k] = g.real();
          im[(c * pairs + p) * bins + k] = g.imag();
        }
      }
    }
  }

  const double* re_of(std::size_t c) const { return re.data() + c * pairs * bins; }
  const double* im_of(std::size_t c) const { return im.data() + c * pairs * bins; }
};

void check_compatible(const CrossSpectralTensor& phi, const SteeringMatrix& d) {
  if (phi.num_bins() != d.num_bins() || phi.num_mics() != d.num_mics()) {
    throw Error("steering matrix does not match the cross-spectral tensor");
  }
  require(phi.num_mics() >= 2, "SRP needs at least two microphones");
}

double srp_divisor(std::size_t frames, std::size_t bins, std::size_t mics) {
  const double qm1 = static_cast<double>(mics - 1);
  return static_cast<double>(frames) * static_cast<double>(bins) * qm1 * qm1;
}

void check_mask_shape(const AttentionMask& mask, const MultichannelSpectrogram& y) {
  if (mask.num_bins() != y.num_bins() || mask.num_frames() != y.num_frames()) {
    throw Error("mask shape " + std::to_string(mask.num_bins()) + "x" +
                std::to_string(mask.num_frames()) + " does not match spectrogram " +
                std::to_string(y.num_bins()) + "x" + std::to_string(y.num_frames()));
  }
}

AttentionMask effective_mask(const MultichannelSpectrogram& y, const AttentionMask& mask,
                             const ArrayGeometry& geom, const EstimatorOptions& opts) {
  check_mask_shape(mask, y);
  if (!opts.exclude_aliased_bins) return mask;
  return multiply(mask, alias_limit_mask(geom, y.num_bins(), y.num_frames(),
                                         y.sample_rate(), y.window_length()));
}

void require_attention(const AttentionMask& mask, FrameRange range) {
  double total = 0.0;
  for (std::size_t k = 0; k < mask.num_bins(); ++k) {
    for (std::size_t n = range.begin; n < range.end; ++n) total += mask.at(k, n);
  }
  if (!(total > 0.0)) throw Error("empty attention");
}

}  // namespace

FrameRange centered_range(std::size_t frames, std::size_t count) {
  if (count == 0 || count >= frames) return FrameRange::all(frames);
  const std::size_t begin = (frames - count) / 2;
  return {begin, begin + count};
}

PhatWeighting::PhatWeighting(std::size_t channels, std::size_t bins, std::size_t frames)
    : channels_(channels), bins_(bins), frames_(frames), values_(channels * bins * frames) {}

PhatWeighting phat_weighting(const MultichannelSpectrogram& y, double epsilon) {
  require(epsilon > 0.0, "epsilon must be positive");
  const auto& kern = kernels::active();
  const std::size_t bins = y.num_bins();
  PhatWeighting w(y.num_channels(), bins, y.num_frames());
  std::vector<double> re(bins), im(bins);
  for (std::size_t q = 0; q < y.num_channels(); ++q) {
    for (std::size_t n = 0; n < y.num_frames(); ++n) {
      const auto frame = y.frame(q, n);
      for (std::size_t k = 0; k < bins; ++k) {
        re[k] = frame[k].real();
        im[k] = frame[k].imag();
      }
      kern.phat_weights(re.data(), im.data(), epsilon, w.frame(q, n), bins);
    }
  }
  return w;
}

PhatWeighting mask_weighting(const PhatWeighting& w, const AttentionMask& mask) {
  if (mask.num_bins() != w.num_bins() || mask.num_frames() != w.num_frames()) {
    throw Error("mask shape does not match the weighting");
  }
  PhatWeighting out = w;
  for (std::size_t q = 0; q < w.num_channels(); ++q) {
    for (std::size_t n = 0; n < w.num_frames(); ++n) {
      double* f = out.frame(q, n);
      for (std::size_t k = 0; k < w.num_bins(); ++k) f[k] *= mask.at(k, n);
    }
  }
  return out;
}

CrossSpectralTensor::CrossSpectralTensor(std::size_t bins, std::size_t frames,
                                         std::size_t mics)
    : bins_(bins), frames_(frames), mics_(mics) {
  for (std::size_t q = 0; q < mics; ++q) {
    for (std::size_t j = q + 1; j < mics; ++j) pairs_.emplace_back(q, j);
  }
  for (std::size_t q = 0; q < mics; ++q) pairs_.emplace_back(q, q);
  re_.assign(pairs_.size() * frames * bins, 0.0);
  im_.assign(pairs_.size() * frames * bins, 0.0);
}

std::size_t CrossSpectralTensor::slot(std::size_t q1, std::size_t q2) const {
  require(q1 <= q2 && q2 < mics_, "invalid microphone pair");
  if (q1 == q2) return num_pairs() + q1;
  // Row-major upper triangle without the diagonal.
  return q1 * (2 * mics_ - q1 - 1) / 2 + (q2 - q1 - 1);
}

cdouble CrossSpectralTensor::at(std::size_t k, std::size_t n, std::size_t q1,
                                std::size_t q2) const {
  if (q1 > q2) return std::conj(at(k, n, q2, q1));
  const std::size_t s = slot(q1, q2);
  return {re(s, n)[k], im(s, n)[k]};
}

CrossSpectralTensor cross_spectral_tensor(const MultichannelSpectrogram& y,
                                          const PhatWeighting& w) {
  if (w.num_channels() != y.num_channels() || w.num_bins() != y.num_bins() ||
      w.num_frames() != y.num_frames()) {
    throw Error("weighting shape does not match the spectrogram");
  }
  const auto& kern = kernels::active();
  const std::size_t qn = y.num_channels(), bins = y.num_bins(), frames = y.num_frames();

  // Weighted spectra Y·W, split into real and imaginary planes.
  std::vector<double> zre(qn * frames * bins), zim(qn * frames * bins);
  for (std::size_t q = 0; q < qn; ++q) {
    for (std::size_t n = 0; n < frames; ++n) {
      const auto frame = y.frame(q, n);
      const double* wf = w.frame(q, n);
      const std::size_t base = (q * frames + n) * bins;
      for (std::size_t k = 0; k < bins; ++k) {
        zre[base + k] = frame[k].real() * wf[k];
        zim[base + k] = frame[k].imag() * wf[k];
      }
    }
  }

  CrossSpectralTensor phi(bins, frames, qn);
  const std::size_t slots = phi.num_pairs() + qn;
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t q1 = s < phi.num_pairs() ? phi.pair_first(s) : s - phi.num_pairs();
    const std::size_t q2 = s < phi.num_pairs() ? phi.pair_second(s) : q1;
    for (std::size_t n = 0; n < frames; ++n) {
      const std::size_t a = (q1 * frames + n) * bins;
      const std::size_t b = (q2 * frames + n) * bins;
      kern.cross_spectrum(zre.data() + a, zim.data() + a, zre.data() + b, zim.data() + b,
                          phi.re(s, n), phi.im(s, n), bins);
    }
  }
  return phi;
}

SpatialPowerSpectrum srp(const CrossSpectralTensor& phi, const SteeringMatrix& d,
                         FrameRange range) {
  check_compatible(phi, d);
  check_range(range, phi.num_frames());
  const auto& kern = kernels::active();
  const std::size_t pairs = phi.num_pairs(), bins = phi.num_bins();

  // The steering does not depend on the frame, so frames are summed first.
  std::vector<double> sre(pairs * bins, 0.0), sim(pairs * bins, 0.0);
  for (std::size_t p = 0; p < pairs; ++p) {
    for (std::size_t n = range.begin; n < range.end; ++n) {
      const double* r = phi.re(p, n);
      const double* i = phi.im(p, n);
      for (std::size_t k = 0; k < bins; ++k) {
        sre[p * bins + k] += r[k];
        sim[p * bins + k] += i[k];
      }
    }
  }

  const PairSteering g(phi, d);
  const double scale = 2.0 / srp_divisor(range.size(), bins, phi.num_mics());
  SpatialPowerSpectrum out;
  out.values.resize(d.num_directions());
  std::vector<double> per_bin(bins);
  for (std::size_t c = 0; c < d.num_directions(); ++c) {
    kern.steered_power(g.re_of(c), g.im_of(c), sre.data(), sim.data(), pairs, bins, bins,
                       per_bin.data());
    double total = 0.0;
    for (double v : per_bin) total += v;
    out.values[c] = total * scale;
  }
  return out;
}

FrameSpectra per_frame_srp(const CrossSpectralTensor& phi, const SteeringMatrix& d,
                           FrameRange range) {
  check_compatible(phi, d);
  check_range(range, phi.num_frames());
  FrameSpectra out(d.num_directions(), range.size());
  for (std::size_t n = range.begin; n < range.end; ++n) {
    const SpatialPowerSpectrum s = srp(phi, d, {n, n + 1});
    for (std::size_t c = 0; c < s.size(); ++c) out.at(c, n - range.begin) = s[c];
  }
  return out;
}

NarrowbandSpectra narrowband_srp(const CrossSpectralTensor& phi, const SteeringMatrix& d,
                                 FrameRange range) {
  check_compatible(phi, d);
  check_range(range, phi.num_frames());
  const auto& kern = kernels::active();
  const std::size_t pairs = phi.num_pairs(), bins = phi.num_bins();
  const PairSteering g(phi, d);
  const double scale = 2.0 / srp_divisor(range.size(), bins, phi.num_mics());

  // The steering layout has a pair stride of `bins`; the tensor's is
  // frames·bins. Gather each frame's pairs contiguously first.
  std::vector<double> xre(pairs * bins), xim(pairs * bins);
  NarrowbandSpectra out(d.num_directions(), bins, range.size());
  for (std::size_t n = range.begin; n < range.end; ++n) {
    for (std::size_t p = 0; p < pairs; ++p) {
      std::copy_n(phi.re(p, n), bins, xre.data() + p * bins);
      std::copy_n(phi.im(p, n), bins, xim.data() + p * bins);
    }
    for (std::size_t c = 0; c < d.num_directions(); ++c) {
      double* dst = out.frame(c, n - range.begin);
      kern.steered_power(g.re_of(c), g.im_of(c), xre.data(), xim.data(), pairs, bins, bins,
                         dst);
      for (std::size_t k = 0; k < bins; ++k) dst[k] *= scale;
    }
  }
  return out;
}

SpatialPowerSpectrum output_masking(const NarrowbandSpectra& e_nb, const AttentionMask& mask) {
  if (mask.num_bins() != e_nb.num_bins() || mask.num_frames() != e_nb.num_frames()) {
    throw Error("mask shape does not match the narrowband spectra");
  }
  const double total = mask.sum();
  if (!(total > 0.0)) throw Error("empty attention");
  SpatialPowerSpectrum out;
  out.values.assign(e_nb.num_directions(), 0.0);
  for (std::size_t c = 0; c < e_nb.num_directions(); ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < e_nb.num_frames(); ++n) {
      for (std::size_t k = 0; k < e_nb.num_bins(); ++k) {
        acc += mask.at(k, n) * e_nb.at(c, k, n);
      }
    }
    out.values[c] = acc / total;
  }
  return out;
}

SpatialPowerSpectrum normalize_sps(const SpatialPowerSpectrum& s) {
  require(s.size() > 0, "empty spectrum");
  const double peak = *std::max_element(s.values.begin(), s.values.end());
  if (peak == 0.0) throw Error("cannot normalize an all-zero spectrum");
  if (!(peak > 0.0)) throw Error("cannot normalize a spectrum without a positive maximum");
  SpatialPowerSpectrum out;
  out.values.resize(s.size());
  for (std::size_t c = 0; c < s.size(); ++c) out.values[c] = s.values[c] / peak;
  out.normalized = true;
  return out;
}

SpatialPowerSpectrum aggregate_frames(const FrameSpectra& e, FrameRange range) {
  check_range(range, e.num_frames());
  SpatialPowerSpectrum out;
  out.values.assign(e.num_directions(), 0.0);
  for (std::size_t c = 0; c < e.num_directions(); ++c) {
    double acc = 0.0;
    for (std::size_t n = range.begin; n < range.end; ++n) acc += e.at(c, n);
    out.values[c] = acc / static_cast<double>(range.size());
  }
  return out;
}

std::size_t argmax_index(const SpatialPowerSpectrum& s) {
  require(s.size() > 0, "empty spectrum");
  std::size_t best = 0;
  for (std::size_t c = 1; c < s.size(); ++c) {
    if (s.values[c] > s.values[best]) best = c;
  }
  return best;
}

double pick_doa(const SpatialPowerSpectrum& s, const DoaGrid& grid) {
  require(s.size() == grid.size(), "spectrum length does not match the grid");
  return grid[argmax_index(s)];
}

double sps_loss(const SpatialPowerSpectrum& est, const SpatialPowerSpectrum& clean) {
  if (est.size() != clean.size() || est.size() == 0) {
    throw Error("spectrum length mismatch");
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < est.size(); ++c) {
    const double e = est[c] - clean[c];
    acc += e * e;
  }
  return acc / static_cast<double>(est.size());
}

std::uint64_t srp_flops(std::uint64_t bins, std::uint64_t directions, std::uint64_t mics) {
  if (bins < 1 || directions < 1 || mics < 1) {
    throw Error("K, C and Q must all be at least 1", ErrorKind::kUsage);
  }
  const std::uint64_t qm1 = mics - 1;
  // (Q−1)²·(4KC + 6K) is always even, so the halving is exact.
  return qm1 * qm1 * (4 * bins * directions + 6 * bins) / 2 + 5 * bins * mics;
}

AttentionMask alias_limit_mask(const ArrayGeometry& geom, std::size_t bins,
                               std::size_t frames, double sample_rate,
                               std::size_t fft_length) {
  const double limit = geom.spatial_alias_frequency();
  AttentionMask m(bins, frames);
  for (std::size_t k = 0; k < bins; ++k) {
    if (bin_frequency(k, sample_rate, fft_length) > limit) continue;
    for (std::size_t n = 0; n < frames; ++n) m.at(k, n) = 1.0;
  }
  return m;
}

SteeringMatrix steering_for(const MultichannelSpectrogram& y, const DoaGrid& grid,
                            const ArrayGeometry& geom) {
  if (geom.num_mics() != y.num_channels()) {
    throw Error("array has " + std::to_string(geom.num_mics()) +
                " microphones but the signal has " + std::to_string(y.num_channels()) +
                " channels");
  }
  return steering_matrix(grid, geom, y.num_bins(), y.sample_rate(), y.window_length());
}

SpatialPowerSpectrum srp_phat(const MultichannelSpectrogram& y, const DoaGrid& grid,
                              const ArrayGeometry& geom, FrameRange range,
                              const EstimatorOptions& opts) {
  return srp_mp(y, AttentionMask::ones(y.num_bins(), y.num_frames()), grid, geom, range,
                opts);
}

SpatialPowerSpectrum srp_mp(const MultichannelSpectrogram& y, const AttentionMask& mask,
                            const DoaGrid& grid, const ArrayGeometry& geom,
                            FrameRange range, const EstimatorOptions& opts) {
  check_range(range, y.num_frames());
  const SteeringMatrix d = steering_for(y, grid, geom);
  const AttentionMask m = effective_mask(y, mask, geom, opts);
  require_attention(m, range);
  const PhatWeighting w = mask_weighting(phat_weighting(y, opts.epsilon), m);
  return normalize_sps(srp(cross_spectral_tensor(y, w), d, range));
}

SpatialPowerSpectrum srp_om(const MultichannelSpectrogram& y, const AttentionMask& mask,
                            const DoaGrid& grid, const ArrayGeometry& geom,
                            FrameRange range, const EstimatorOptions& opts) {
  check_range(range, y.num_frames());
  const SteeringMatrix d = steering_for(y, grid, geom);
  const AttentionMask m = effective_mask(y, mask, geom, opts);
  require_attention(m, range);
  const CrossSpectralTensor phi = cross_spectral_tensor(y, phat_weighting(y, opts.epsilon));
  const NarrowbandSpectra e_nb = narrowband_srp(phi, d, range);
  return normalize_sps(output_masking(e_nb, slice_frames(m, range.begin, range.end)));
}

SpatialPowerSpectrum norm_music(const MultichannelSpectrogram& y, const AttentionMask& mask,
                                const DoaGrid& grid, const ArrayGeometry& geom,
                                std::size_t num_sources, FrameRange range,
                                const EstimatorOptions& opts) {
  const std::size_t qn = y.num_channels();
  check_range(range, y.num_frames());
  if (num_sources < 1 || num_sources >= qn) {
    throw Error("num_sources must be in [1, " + std::to_string(qn) + ")");
  }
  if (range.size() < qn && !(opts.diagonal_loading > 0.0)) {
    throw Error("MUSIC needs at least " + std::to_string(qn) +
                " frames for a full-rank covariance (or diagonal loading)");
  }
  const SteeringMatrix d = steering_for(y, grid, geom);
  const AttentionMask m = effective_mask(y, mask, geom, opts);
  const std::size_t dirs = grid.size();
  const std::size_t noise_dim = qn - num_sources;
  const double floor = 1e-12 * static_cast<double>(qn);

  std::vector<double> acc(dirs, 0.0), band(dirs);
  double total_weight = 0.0;
  Eigen::MatrixXcd cov(qn, qn);
  Eigen::VectorXcd snap(qn), steer(qn);
  for (std::size_t k = 0; k < y.num_bins(); ++k) {
    double weight = 0.0;
    for (std::size_t n = range.begin; n < range.end; ++n) weight += m.at(k, n);
    if (weight < 1e-6) continue;

    cov.setZero();
    for (std::size_t n = range.begin; n < range.end; ++n) {
      const double wn = m.at(k, n) / weight;
      if (wn == 0.0) continue;
      for (std::size_t q = 0; q < qn; ++q) snap(q) = y.at(q, k, n);
      cov.noalias() += wn * (snap * snap.adjoint());
    }
    if (opts.diagonal_loading > 0.0) {
      const double load = opts.diagonal_loading * cov.trace().real() / static_cast<double>(qn);
      cov.diagonal().array() += load;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");
    // Eigenvalues ascend, so the noise subspace is the leading block.
    const Eigen::MatrixXcd noise = eig.eigenvectors().leftCols(noise_dim);

    double peak = 0.0;
    for (std::size_t c = 0; c < dirs; ++c) {
      for (std::size_t q = 0; q < qn; ++q) steer(q) = d.at(c, k, q);
      const double proj = (noise.adjoint() * steer).squaredNorm();
      band[c] = 1.0 / std::max(proj, floor);
      peak = std::max(peak, band[c]);
    }
    for (std::size_t c = 0; c < dirs; ++c) acc[c] += weight * (band[c] / peak);
    total_weight += weight;
  }
  if (!(total_weight > 0.0)) throw Error("empty attention");

  SpatialPowerSpectrum out;
  out.values.resize(dirs);
  for (std::size_t c = 0; c < dirs; ++c) out.values[c] = acc[c] / total_weight;
  return normalize_sps(out);
}

Method parse_method(std::string_view name) {
  if (name == "srp-p") return Method::kSrpP;
  if (name == "srp-mp") return Method::kSrpMp;
  if (name == "srp-om") return Method::kSrpOm;
  if (name == "music") return Method::kMusic;
  throw Error("unknown method '" + std::string(name) +
                  "' (valid: srp-p, srp-mp, srp-om, music)",
              ErrorKind::kUsage);
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kSrpP: return "srp-p";
    case Method::kSrpMp: return "srp-mp";
    case Method::kSrpOm: return "srp-om";
    case Method::kMusic: return "music";
  }
  return "unknown";
}

SpatialPowerSpectrum run_method(Method method, const MultichannelSpectrogram& y,
                                const AttentionMask& mask, const DoaGrid& grid,
                                const ArrayGeometry& geom, FrameRange range,
                                const EstimatorOptions& opts) {
  switch (method) {
    case Method::kSrpP: return srp_phat(y, grid, geom, range, opts);
    case Method::kSrpMp: return srp_mp(y, mask, grid, geom, range, opts);
    case Method::kSrpOm: return srp_om(y, mask, grid, geom, range, opts);
    case Method::kMusic:
      return norm_music(y, mask, grid, geom, opts.music_sources, range, opts);
  }
  throw Error("unknown method");
}

}  // namespace doalab
