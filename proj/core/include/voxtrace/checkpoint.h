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

// Named-parameter checkpoint files.
//
// Layout (all integers little-endian):
//   "VXCK" | u32 version | u32 value_type (0 = f32, 1 = f64) | u32 count
//   count x { u32 name_len | name bytes | u32 rank | u64 dims[rank] |
//             values[prod(dims)] as IEEE-754 little-endian }

#ifndef VOXTRACE_CHECKPOINT_H_
#define VOXTRACE_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxtrace/tensor.h"

namespace voxtrace {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ValueType : std::uint32_t { kFloat32 = 0, kFloat64 = 1 };

struct NamedArray {
  std::string name;
  ag::Shape shape;
  std::vector<double> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedArray> arrays,
                                            ValueType type);
std::vector<NamedArray> decode_checkpoint(std::span<const std::uint8_t> bytes);

// Writes via a temporary file and rename.
void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedArray> arrays, ValueType type);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

std::size_t total_scalars(std::span<const NamedArray> arrays);

}  // namespace voxtrace

#endif  // VOXTRACE_CHECKPOINT_H_
