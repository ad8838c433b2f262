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

#include "doalab/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "doalab/error.hpp"

namespace doalab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "wav I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

TimeSignal read_wav(const std::filesystem::path& path, double expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open wav file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const auto size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) {
        format = read_le<std::uint16_t>(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0 || data == nullptr) {
    throw Error("malformed wav file: " + path.string());
  }
  if (expected_rate > 0.0 && static_cast<double>(rate) != expected_rate) {
    throw Error("sample rate mismatch in " + path.string() + ": file has " +
                std::to_string(rate) + " Hz, expected " +
                std::to_string(static_cast<long>(expected_rate)) + " Hz");
  }

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) throw Error("unsupported wav encoding (need PCM16 or float32)");

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t length = data_size / frame_bytes;
  TimeSignal signal(channels, length, static_cast<double>(rate));
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t q = 0; q < channels; ++q) {
      const std::uint8_t* p = data + t * frame_bytes + q * (bits / 8);
      signal.at(q, t) = pcm16 ? read_le<std::int16_t>(p) / 32768.0
                              : static_cast<double>(read_le<float>(p));
    }
  }
  signal.validate();
  return signal;
}

void write_wav(const std::filesystem::path& path, const TimeSignal& signal,
               WavFormat format) {
  const std::uint16_t channels = static_cast<std::uint16_t>(signal.num_channels());
  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate()));
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(signal.length() * channels * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_le<std::uint32_t>(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  put_le<std::uint16_t>(out, channels);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * channels * (bits / 8));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  put_le<std::uint16_t>(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_le<std::uint32_t>(out, data_size);
  for (std::size_t t = 0; t < signal.length(); ++t) {
    for (std::size_t q = 0; q < channels; ++q) {
      const double v = signal.at(q, t);
      if (format == WavFormat::kPcm16) {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        put_le<std::int16_t>(out, static_cast<std::int16_t>(s));
      } else {
        put_le<float>(out, static_cast<float>(v));
      }
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write wav file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
}

}  // namespace doalab
