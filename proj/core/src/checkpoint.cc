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

#include "voxtrace/checkpoint.h"

#include <bit>
#include <fstream>
#include <iterator>

#include "voxtrace/errors.h"

namespace voxtrace {
namespace {

constexpr char kMagic[4] = {'V', 'X', 'C', 'K'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ParseError("checkpoint is truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedArray> arrays,
                                            ValueType type) {
  Writer w;
  w.bytes(std::string(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(type));
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (ag::numel(a.shape) != a.values.size()) {
      throw ShapeError("checkpoint entry " + a.name + " has inconsistent shape");
    }
    w.u32(static_cast<std::uint32_t>(a.name.size()));
    w.bytes(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) w.u64(d);
    for (double v : a.values) {
      if (type == ValueType::kFloat32) {
        w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        w.u64(std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return w.take();
}

std::vector<NamedArray> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw ParseError("not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t type = r.u32();
  if (type > 1) throw ParseError("unknown checkpoint value type " + std::to_string(type));
  const std::uint32_t count = r.u32();

  std::vector<NamedArray> out(count);
  for (auto& a : out) {
    a.name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(r.u64());
    a.values.resize(ag::numel(a.shape));
    for (double& v : a.values) {
      v = type == 0 ? static_cast<double>(std::bit_cast<float>(r.u32()))
                    : std::bit_cast<double>(r.u64());
    }
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint payload");
  return out;
}

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedArray> arrays, ValueType type) {
  const auto bytes = encode_checkpoint(arrays, type);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

std::size_t total_scalars(std::span<const NamedArray> arrays) {
  std::size_t n = 0;
  for (const auto& a : arrays) n += a.values.size();
  return n;
}

}  // namespace voxtrace
