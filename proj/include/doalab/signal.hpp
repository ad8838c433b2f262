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

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace doalab {

using cdouble = std::complex<double>;

/// Multichannel real-valued signal, stored channel-major.
class TimeSignal {
 public:
  TimeSignal() = default;
  TimeSignal(std::size_t channels, std::size_t length, double sample_rate);
  TimeSignal(const std::vector<std::vector<double>>& channels, double sample_rate);

  std::size_t num_channels() const { return channels_; }
  std::size_t length() const { return length_; }
  double sample_rate() const { return sample_rate_; }

  std::span<double> channel(std::size_t q);
  std::span<const double> channel(std::size_t q) const;

  double& at(std::size_t q, std::size_t t) { return data_[q * length_ + t]; }
  double at(std::size_t q, std::size_t t) const { return data_[q * length_ + t]; }

  const std::vector<double>& raw() const { return data_; }

  // Throws unless sample_rate > 0 and every sample is finite.
  void validate() const;

  bool operator==(const TimeSignal&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  double sample_rate_ = 0.0;
  std::vector<double> data_;
};

/// Complex Q×K×N time-frequency representation. Internally laid out as
/// [channel][frame][bin] so a frame's bins are contiguous.
class MultichannelSpectrogram {
 public:
  MultichannelSpectrogram() = default;
  MultichannelSpectrogram(std::size_t channels, std::size_t bins, std::size_t frames,
                          double sample_rate, std::size_t hop,
                          std::size_t window_length);

  std::size_t num_channels() const { return channels_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }
  double sample_rate() const { return sample_rate_; }
  std::size_t hop() const { return hop_; }
  std::size_t window_length() const { return window_length_; }

  cdouble& at(std::size_t q, std::size_t k, std::size_t n) {
    return data_[(q * frames_ + n) * bins_ + k];
  }
  cdouble at(std::size_t q, std::size_t k, std::size_t n) const {
    return data_[(q * frames_ + n) * bins_ + k];
  }

  std::span<cdouble> frame(std::size_t q, std::size_t n);
  std::span<const cdouble> frame(std::size_t q, std::size_t n) const;

  bool same_shape(const MultichannelSpectrogram& other) const;

 private:
  std::size_t channels_ = 0;
  std::size_t bins_ = 0;
  std::size_t frames_ = 0;
  double sample_rate_ = 0.0;
  std::size_t hop_ = 0;
  std::size_t window_length_ = 0;
  std::vector<cdouble> data_;
};

enum class Window { kHann, kRectangular };

Window parse_window(std::string_view name);
std::string window_name(Window window);

// Periodic window of the given length.
std::vector<double> make_window(Window window, std::size_t length);

struct StftParams {
  std::size_t window_length = 512;
  std::size_t hop = 256;
  Window window = Window::kHann;
};

// Number of full frames taken without padding.
std::size_t frame_count(std::size_t signal_length, std::size_t window_length,
                        std::size_t hop);

// Signal length that yields exactly `frames` frames.
std::size_t samples_for_frames(std::size_t frames, std::size_t window_length,
                               std::size_t hop);

MultichannelSpectrogram stft(const TimeSignal& signal, std::size_t window_length,
                             std::size_t hop, Window window = Window::kHann);

inline MultichannelSpectrogram stft(const TimeSignal& signal, const StftParams& p) {
  return stft(signal, p.window_length, p.hop, p.window);
}

/// Overlap-add inverse. Output length is (N-1)·hop + window_length; the
/// first and last window_length - hop samples are tapered by the analysis
/// window and are not reconstructed.
TimeSignal istft(const MultichannelSpectrogram& spec, Window window = Window::kHann);

}  // namespace doalab
