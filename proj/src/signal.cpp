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

#include "doalab/signal.hpp"

#include <cmath>
#include <numbers>

#include "doalab/error.hpp"
#include "fft.hpp"

namespace doalab {

TimeSignal::TimeSignal(std::size_t channels, std::size_t length, double sample_rate)
    : channels_(channels),
      length_(length),
      sample_rate_(sample_rate),
      data_(channels * length, 0.0) {
  require(sample_rate > 0.0, "sample_rate must be positive");
}

TimeSignal::TimeSignal(const std::vector<std::vector<double>>& channels,
                       double sample_rate)
    : channels_(channels.size()),
      length_(channels.empty() ? 0 : channels.front().size()),
      sample_rate_(sample_rate) {
  require(sample_rate > 0.0, "sample_rate must be positive");
  data_.reserve(channels_ * length_);
  for (const auto& ch : channels) {
    require(ch.size() == length_, "all channels must have equal length");
    data_.insert(data_.end(), ch.begin(), ch.end());
  }
  validate();
}

std::span<double> TimeSignal::channel(std::size_t q) {
  require(q < channels_, "channel index out of range");
  return {data_.data() + q * length_, length_};
}

std::span<const double> TimeSignal::channel(std::size_t q) const {
  require(q < channels_, "channel index out of range");
  return {data_.data() + q * length_, length_};
}

void TimeSignal::validate() const {
  require(sample_rate_ > 0.0, "sample_rate must be positive");
  for (double v : data_) require(std::isfinite(v), "signal contains non-finite samples");
}

MultichannelSpectrogram::MultichannelSpectrogram(std::size_t channels, std::size_t bins,
                                                 std::size_t frames, double sample_rate,
                                                 std::size_t hop,
                                                 std::size_t window_length)
    : channels_(channels),
      bins_(bins),
      frames_(frames),
      sample_rate_(sample_rate),
      hop_(hop),
      window_length_(window_length),
      data_(channels * bins * frames) {}

std::span<cdouble> MultichannelSpectrogram::frame(std::size_t q, std::size_t n) {
  return {data_.data() + (q * frames_ + n) * bins_, bins_};
}

std::span<const cdouble> MultichannelSpectrogram::frame(std::size_t q,
                                                        std::size_t n) const {
  return {data_.data() + (q * frames_ + n) * bins_, bins_};
}

bool MultichannelSpectrogram::same_shape(const MultichannelSpectrogram& o) const {
  return channels_ == o.channels_ && bins_ == o.bins_ && frames_ == o.frames_;
}

Window parse_window(std::string_view name) {
  if (name == "hann") return Window::kHann;
  if (name == "rect" || name == "rectangular") return Window::kRectangular;
  throw Error("unknown window '" + std::string(name) + "' (valid: hann, rect)",
              ErrorKind::kUsage);
}

std::string window_name(Window window) {
  return window == Window::kHann ? "hann" : "rect";
}

std::vector<double> make_window(Window window, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (window == Window::kHann) {
    for (std::size_t t = 0; t < length; ++t) {
      w[t] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) /
                                  static_cast<double>(length));
    }
  }
  return w;
}

std::size_t frame_count(std::size_t signal_length, std::size_t window_length,
                        std::size_t hop) {
  if (signal_length < window_length || hop == 0) return 0;
  return (signal_length - window_length) / hop + 1;
}

std::size_t samples_for_frames(std::size_t frames, std::size_t window_length,
                               std::size_t hop) {
  return frames == 0 ? 0 : (frames - 1) * hop + window_length;
}

MultichannelSpectrogram stft(const TimeSignal& signal, std::size_t window_length,
                             std::size_t hop, Window window) {
  require(window_length >= 2 && window_length % 2 == 0, "window_length must be even");
  require(hop >= 1 && hop <= window_length, "hop must be in [1, window_length]");
  if (signal.length() < window_length) throw Error("insufficient samples");
  require(signal.num_channels() >= 1, "signal has no channels");

  const std::size_t frames = frame_count(signal.length(), window_length, hop);
  const std::size_t bins = window_length / 2 + 1;
  MultichannelSpectrogram spec(signal.num_channels(), bins, frames, signal.sample_rate(),
                               hop, window_length);
  const std::vector<double> w = make_window(window, window_length);
  detail::RealFft fft(window_length);
  std::vector<double> buf(window_length);
  for (std::size_t q = 0; q < signal.num_channels(); ++q) {
    const auto x = signal.channel(q);
    for (std::size_t n = 0; n < frames; ++n) {
      const std::size_t start = n * hop;
      for (std::size_t t = 0; t < window_length; ++t) buf[t] = w[t] * x[start + t];
      fft.forward(buf, spec.frame(q, n));
    }
  }
  return spec;
}

TimeSignal istft(const MultichannelSpectrogram& spec, Window window) {
  const std::size_t wl = spec.window_length();
  const std::size_t hop = spec.hop();
  require(wl >= 2 && spec.num_bins() == wl / 2 + 1, "spectrogram shape inconsistent");
  require(hop >= 1 && hop <= wl, "hop must be in [1, window_length]");

  // The overlapped analysis windows must sum to a constant.
  const std::vector<double> w = make_window(window, wl);
  std::vector<double> cola(hop, 0.0);
  for (std::size_t t = 0; t < wl; ++t) cola[t % hop] += w[t];
  const double gain = cola[0];
  for (double c : cola) {
    if (!(gain > 0.0) || std::abs(c - gain) > 1e-9 * gain) {
      throw Error("window/hop pair does not satisfy perfect reconstruction");
    }
  }

  const std::size_t length = samples_for_frames(spec.num_frames(), wl, hop);
  TimeSignal out(spec.num_channels(), length, spec.sample_rate());
  detail::RealFft fft(wl);
  std::vector<double> buf(wl);
  const double scale = 1.0 / (static_cast<double>(wl) * gain);
  for (std::size_t q = 0; q < spec.num_channels(); ++q) {
    auto y = out.channel(q);
    for (std::size_t n = 0; n < spec.num_frames(); ++n) {
      fft.inverse(spec.frame(q, n), buf);
      const std::size_t start = n * hop;
      for (std::size_t t = 0; t < wl; ++t) y[start + t] += buf[t] * scale;
    }
  }
  return out;
}

}  // namespace doalab
