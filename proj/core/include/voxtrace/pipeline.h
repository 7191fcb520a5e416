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

// Corpus plumbing: manifests, train/validation splits, the on-disk
// annotation cache, and assembly of model inputs and score records.

#ifndef VOXTRACE_PIPELINE_H_
#define VOXTRACE_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voxtrace/annotate.h"
#include "voxtrace/dsp.h"
#include "voxtrace/metrics.h"
#include "voxtrace/model.h"
#include "voxtrace/train.h"

namespace voxtrace {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
// Throws ParseError for anything but train, val or test.
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string utt_id;
  std::filesystem::path audio_path;  // resolved against the manifest directory
  int label = 0;                     // 0 = real, 1 = fake
  std::string dataset_tag;
  std::optional<std::string> codec_tag;
  Split split = Split::kTrain;
  bool resolvable = false;  // audio file existed at load time

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> select(Split s) const;
};

inline constexpr const char* kManifestHeader =
    "utt_id,audio_path,label,dataset_tag,codec_tag,split";

// Comma-separated with the header above; label is "real" or "fake"; an empty
// codec_tag means none. Relative audio paths resolve against base_dir.
// Throws ParseError (with the line number) or DuplicateId.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);
// Audio paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Stratified 90/10 split: round(10%) of each class goes to validation.
// Input order is preserved within each output. Throws InsufficientData below
// ten entries.
std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split_90_10(
    std::span<const ManifestEntry> entries, std::uint64_t seed);

// Training and validation entries: the manifest's own val rows when it has
// any, otherwise a 90/10 split of its train and val rows.
std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> training_splits(
    const Manifest& manifest, std::uint64_t seed);

struct AnnotatorOptions {
  PitchConfig pitch;
  FormantConfig formant;
  double silence_threshold_db = kDefaultSilenceThresholdDb;

  std::string fingerprint() const;
};

// Reads, resamples, trims, normalizes and length-fits one audio file.
FixedWaveform load_waveform(const std::filesystem::path& path,
                            double silence_threshold_db = kDefaultSilenceThresholdDb);

// Hex SHA-256 of the utterance id, the audio bytes and the annotator
// fingerprint.
std::string annotation_key(const std::string& utt_id, std::span<const std::uint8_t> audio_bytes,
                           const AnnotatorOptions& options);

// One line: {"utt_id": ..., "frames": [{"t", "f0" (or null), "f1", "f2", "voiced"}]}.
std::string annotation_to_jsonl(const std::string& utt_id, const FrameAnnotation& a);
// Throws ParseError on malformed records or when voiced disagrees with f0.
FrameAnnotation annotation_from_jsonl(const std::string& line);

struct SkippedItem {
  std::string utt_id;
  std::string reason;
};

struct CacheStats {
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::size_t skipped = 0;
  std::vector<SkippedItem> skipped_items;
};

// Annotates every entry into cache_dir/<key>.jsonl. Entries with a cache file
// under the current key are reused; unreadable or silent audio is skipped and
// reported. Writes go through a temporary file and a rename. The cache
// contents do not depend on the number of workers.
CacheStats annotate_corpus(std::span<const ManifestEntry> entries,
                           const std::filesystem::path& cache_dir,
                           const AnnotatorOptions& options = {}, std::size_t workers = 1);

// Cached annotation of one entry, computing and storing it on a miss.
FrameAnnotation cached_annotation(const ManifestEntry& entry,
                                  const std::filesystem::path& cache_dir,
                                  const AnnotatorOptions& options = {});

// Tokens for each entry, in order, plus the cached annotation when a cache
// directory is given.
std::vector<Example> load_examples(std::span<const ManifestEntry> entries,
                                   const std::optional<std::filesystem::path>& cache_dir,
                                   const AnnotatorOptions& options = {});

// Scores examples with a trained model; gt_voiced is copied from each
// example's annotation when attach_ground_truth is set.
template <typename T>
std::vector<ScoreRecord> score_examples(const Model<T>& model, std::span<const Example> examples,
                                        bool attach_ground_truth);

}  // namespace voxtrace

#endif  // VOXTRACE_PIPELINE_H_
