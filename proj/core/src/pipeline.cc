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

#include "voxtrace/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "voxtrace/errors.h"
#include "voxtrace/wav.h"

namespace voxtrace {

namespace fs = std::filesystem;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ParseError("unknown split '" + s + "' (expected train, val or test)");
}

std::vector<ManifestEntry> Manifest::select(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Manifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  Manifest m;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ParseError(fmt::format("manifest line {}: {}", line_no, why));
    };
    const auto fields = split_fields(line);
    if (!header_seen) {
      std::string joined;
      for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
      if (joined != kManifestHeader) fail(fmt::format("expected header '{}'", kManifestHeader));
      header_seen = true;
      continue;
    }
    if (fields.size() != 6) fail(fmt::format("expected 6 fields, found {}", fields.size()));
    ManifestEntry e;
    e.utt_id = fields[0];
    if (e.utt_id.empty()) fail("empty utt_id");
    if (fields[1].empty()) fail("empty audio_path");
    const fs::path p(fields[1]);
    e.audio_path = p.is_absolute() ? p : (base_dir / p).lexically_normal();
    if (fields[2] == "real") {
      e.label = 0;
    } else if (fields[2] == "fake") {
      e.label = 1;
    } else {
      fail("label must be 'real' or 'fake', got '" + fields[2] + "'");
    }
    e.dataset_tag = fields[3];
    if (e.dataset_tag.empty()) fail("empty dataset_tag");
    if (!fields[4].empty()) e.codec_tag = fields[4];
    try {
      e.split = parse_split(fields[5]);
    } catch (const ParseError& err) {
      fail(err.what());
    }
    std::error_code ec;
    e.resolvable = fs::is_regular_file(e.audio_path, ec);
    if (!ids.insert(e.utt_id).second) {
      throw DuplicateId(fmt::format("manifest line {}: duplicate utt_id '{}'", line_no, e.utt_id));
    }
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw ParseError("manifest is empty");
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = path.parent_path();
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& e : manifest.entries) {
    fs::path p = e.audio_path;
    if (!base.empty()) {
      const auto rel = e.audio_path.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out += fmt::format("{},{},{},{},{},{}\n", e.utt_id, p.generic_string(),
                       e.label == 1 ? "fake" : "real", e.dataset_tag, e.codec_tag.value_or(""),
                       to_string(e.split));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write manifest " + path.string());
  f << out;
}

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split_90_10(
    std::span<const ManifestEntry> entries, std::uint64_t seed) {
  if (entries.size() < 10) {
    throw InsufficientData(fmt::format("a 90/10 split needs at least 10 entries, got {}",
                                       entries.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> to_val(entries.size(), false);
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].label == label) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_val; ++k) to_val[idx[k]] = true;
  }
  std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    (to_val[i] ? out.second : out.first).push_back(entries[i]);
  }
  return out;
}

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> training_splits(
    const Manifest& manifest, std::uint64_t seed) {
  auto train = manifest.select(Split::kTrain);
  auto val = manifest.select(Split::kVal);
  if (!val.empty()) return {std::move(train), std::move(val)};
  return split_90_10(train, seed);
}

std::string AnnotatorOptions::fingerprint() const {
  return fmt::format("{};silence_db={:.17g}", annotator_fingerprint(pitch, formant),
                     silence_threshold_db);
}

FixedWaveform load_waveform(const fs::path& path, double silence_threshold_db) {
  const WavData wav = read_wav(path);
  return preprocess(ingest(wav.samples, wav.sample_rate), silence_threshold_db);
}

std::string annotation_key(const std::string& utt_id, std::span<const std::uint8_t> audio_bytes,
                           const AnnotatorOptions& options) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const std::string fp = options.fingerprint();
  const char sep = '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, utt_id.data(), utt_id.size()) == 1 &&
                  EVP_DigestUpdate(ctx, &sep, 1) == 1 &&
                  EVP_DigestUpdate(ctx, audio_bytes.data(), audio_bytes.size()) == 1 &&
                  EVP_DigestUpdate(ctx, &sep, 1) == 1 &&
                  EVP_DigestUpdate(ctx, fp.data(), fp.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string annotation_to_jsonl(const std::string& utt_id, const FrameAnnotation& a) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t t = 0; t < a.n_frames(); ++t) {
    frames.push_back({{"t", t},
                      {"f0", a.f0_hz.at(t) ? nlohmann::json(*a.f0_hz[t]) : nlohmann::json()},
                      {"f1", a.f1_hz.at(t)},
                      {"f2", a.f2_hz.at(t)},
                      {"voiced", static_cast<bool>(a.voiced[t])}});
  }
  return nlohmann::json{{"utt_id", utt_id}, {"frames", std::move(frames)}}.dump();
}

FrameAnnotation annotation_from_jsonl(const std::string& line) {
  FrameAnnotation a;
  try {
    const auto j = nlohmann::json::parse(line);
    const auto& frames = j.at("frames");
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto& f = frames[t];
      if (f.at("t").get<std::size_t>() != t) throw ParseError("annotation frames out of order");
      const auto& f0 = f.at("f0");
      a.f0_hz.push_back(f0.is_null() ? std::nullopt : std::optional<double>(f0.get<double>()));
      a.f1_hz.push_back(f.at("f1").get<double>());
      a.f2_hz.push_back(f.at("f2").get<double>());
      a.voiced.push_back(f.at("voiced").get<bool>());
      if (a.voiced.back() != a.f0_hz.back().has_value()) {
        throw ParseError(fmt::format("annotation frame {} voicing disagrees with f0", t));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad annotation record: ") + e.what());
  }
  return a;
}

namespace {

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<std::string> read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

enum class CacheOutcome { kComputed, kReused };

std::pair<FrameAnnotation, CacheOutcome> lookup_or_compute(const ManifestEntry& entry,
                                                           const fs::path& cache_dir,
                                                           const AnnotatorOptions& options) {
  const auto bytes = read_file_bytes(entry.audio_path);
  const fs::path file = cache_dir / (annotation_key(entry.utt_id, bytes, options) + ".jsonl");
  if (const auto text = read_text(file)) {
    return {annotation_from_jsonl(*text), CacheOutcome::kReused};
  }
  const WavData wav = parse_wav(bytes);
  const FixedWaveform x =
      preprocess(ingest(wav.samples, wav.sample_rate), options.silence_threshold_db);
  FrameAnnotation a = annotate(x, options.pitch, options.formant);
  write_atomic(file, annotation_to_jsonl(entry.utt_id, a) + "\n");
  return {std::move(a), CacheOutcome::kComputed};
}

}  // namespace

CacheStats annotate_corpus(std::span<const ManifestEntry> entries, const fs::path& cache_dir,
                           const AnnotatorOptions& options, std::size_t workers) {
  fs::create_directories(cache_dir);
  std::vector<std::optional<CacheOutcome>> outcome(entries.size());
  std::vector<std::string> failure(entries.size());
  std::atomic<std::size_t> next{0};

  auto work = [&]() {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        outcome[i] = lookup_or_compute(entries[i], cache_dir, options).second;
      } catch (const std::exception& e) {
        failure[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, entries.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  CacheStats stats;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!outcome[i]) {
      ++stats.skipped;
      stats.skipped_items.push_back({entries[i].utt_id, failure[i]});
    } else if (*outcome[i] == CacheOutcome::kReused) {
      ++stats.reused;
    } else {
      ++stats.computed;
    }
  }
  return stats;
}

FrameAnnotation cached_annotation(const ManifestEntry& entry, const fs::path& cache_dir,
                                  const AnnotatorOptions& options) {
  fs::create_directories(cache_dir);
  return lookup_or_compute(entry, cache_dir, options).first;
}

std::vector<Example> load_examples(std::span<const ManifestEntry> entries,
                                   const std::optional<fs::path>& cache_dir,
                                   const AnnotatorOptions& options) {
  std::vector<Example> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Example ex;
    ex.utt_id = e.utt_id;
    ex.label = e.label;
    ex.dataset_tag = e.dataset_tag;
    ex.codec_tag = e.codec_tag;
    ex.tokens = waveform_to_tokens(load_waveform(e.audio_path, options.silence_threshold_db));
    if (cache_dir) ex.annotation = cached_annotation(e, *cache_dir, options);
    out.push_back(std::move(ex));
  }
  return out;
}

template <typename T>
std::vector<ScoreRecord> score_examples(const Model<T>& model, std::span<const Example> examples,
                                        bool attach_ground_truth) {
  std::vector<ScoreRecord> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const ModelOutput o = model.predict(ex.tokens);
    ScoreRecord r;
    r.utt_id = ex.utt_id;
    r.score = o.score;
    r.label = ex.label;
    r.dataset_tag = ex.dataset_tag;
    r.codec_tag = ex.codec_tag;
    r.frame_weights = o.frame_weights;
    r.voicing_prob = o.voicing_prob;
    if (attach_ground_truth) r.gt_voiced = ex.annotation.voiced;
    out.push_back(std::move(r));
  }
  return out;
}

template std::vector<ScoreRecord> score_examples(const Model<float>&, std::span<const Example>,
                                                 bool);
template std::vector<ScoreRecord> score_examples(const Model<double>&, std::span<const Example>,
                                                 bool);

}  // namespace voxtrace
