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

#include <filesystem>

#include "doalab/signal.hpp"

namespace doalab {

enum class WavFormat { kPcm16, kFloat32 };

// Reads PCM 16-bit or IEEE float32 RIFF/WAVE files of any channel count.
// When expected_rate > 0 a different file rate is an error.
TimeSignal read_wav(const std::filesystem::path& path, double expected_rate = 0.0);

void write_wav(const std::filesystem::path& path, const TimeSignal& signal,
               WavFormat format = WavFormat::kFloat32);

}  // namespace doalab
