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

// Deterministic synthetic speech-like corpus for tests and demos.
//
// Real items are harmonic source-filter signals: a slowly modulated f0
// contour drives harmonics shaped by two resonances, alternating with noise
// segments. Fake items use the same recipe but re-draw the harmonic phases
// every few tens of milliseconds and carry a faint high-frequency tone.

#ifndef VOXTRACE_SYNTH_H_
#define VOXTRACE_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxtrace/pipeline.h"

namespace voxtrace {

struct SyntheticCorpusSpec {
  // Utterances per split; each split alternates real, fake, real, ...
  std::size_t n_train = 32;
  std::size_t n_val = 8;
  std::size_t n_test = 8;
  std::uint64_t seed = 7;
  std::string dataset_tag = "synthetic";
  // Cycled over utterances; empty means no codec tag.
  std::vector<std::string> codecs;
  double f0_min_hz = 100.0;
  double f0_max_hz = 220.0;
  double vibrato_depth = 0.04;
  double vibrato_hz = 0.5;
  double fake_tone_hz = 6400.0;
  double fake_tone_db = -30.0;
  double fake_chunk_ms = 30.0;
  std::size_t leading_silence = 1600;
  std::size_t content_length = 34000;

  void validate() const;

  friend bool operator==(const SyntheticCorpusSpec&, const SyntheticCorpusSpec&) = default;
};

std::string spec_to_json(const SyntheticCorpusSpec& spec);
// Missing keys keep their defaults; unknown keys throw ParseError.
SyntheticCorpusSpec spec_from_json(const std::string& text);

struct SyntheticUtterance {
  std::string utt_id;
  int label = 0;
  Split split = Split::kTrain;
  std::string codec_tag;
  std::vector<double> samples;  // leading silence followed by content
  std::size_t leading_silence = 0;
  // Instantaneous f0 per content sample, 0 where unvoiced.
  std::vector<double> f0_hz;
};

// The index-th utterance of the corpus (0-based over train, val, test).
SyntheticUtterance synthesize_utterance(const SyntheticCorpusSpec& spec, std::size_t index);

std::size_t corpus_size(const SyntheticCorpusSpec& spec);

// Writes out_dir/audio/<utt_id>.wav and out_dir/manifest.csv.
Manifest generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                   const std::filesystem::path& out_dir);

}  // namespace voxtrace

#endif  // VOXTRACE_SYNTH_H_
