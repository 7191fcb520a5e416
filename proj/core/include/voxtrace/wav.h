// Copyright 2026 The voxtrace Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal RIFF/WAVE reader and writer. Reads 16-bit integer and 32-bit float
// PCM (plain or WAVE_FORMAT_EXTENSIBLE); multi-channel files yield their
// first channel. Writes 16-bit mono PCM.

#ifndef VOXTRACE_WAV_H_
#define VOXTRACE_WAV_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace voxtrace {

struct WavData {
  std::vector<double> samples;  // first channel, in [-1, 1]
  int sample_rate = 0;
  int channels = 0;
};

WavData parse_wav(std::span<const std::uint8_t> bytes);
WavData read_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav16(std::span<const double> samples,
                                       int sample_rate);
void write_wav16(const std::filesystem::path& path,
                 std::span<const double> samples, int sample_rate);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace voxtrace

#endif  // VOXTRACE_WAV_H_
