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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "oracles/signals.h"
#include "support/synthetic_set.h"
#include "voxtrace/annotate.h"
#include "voxtrace/errors.h"
#include "voxtrace/pipeline.h"
#include "voxtrace/synth.h"
#include "voxtrace/wav.h"

namespace voxtrace {
namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- Manifest ---------------------------------------------------------------

TEST(Manifest, ParsesValidRows) {
  const std::string text = std::string(kManifestHeader) +
                           "\n"
                           "u1,a/u1.wav,real,asv,,train\n"
                           "u2,/abs/u2.wav,fake,asv,mp3,val\n"
                           "u3,u3.wav,fake,itw,,test\n";
  const auto m = parse_manifest(text, "/data");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[0].audio_path, fs::path("/data/a/u1.wav"));
  EXPECT_EQ(m.entries[0].label, 0);
  EXPECT_FALSE(m.entries[0].codec_tag.has_value());
  EXPECT_FALSE(m.entries[0].resolvable);
  EXPECT_EQ(m.entries[1].audio_path, fs::path("/abs/u2.wav"));
  EXPECT_EQ(m.entries[1].codec_tag, "mp3");
  EXPECT_EQ(m.entries[1].split, Split::kVal);
  EXPECT_EQ(m.entries[2].label, 1);
  EXPECT_EQ(m.select(Split::kTest).size(), 1u);
}

TEST(Manifest, RejectsUnknownLabelWithLineNumber) {
  const std::string text = std::string(kManifestHeader) +
                           "\n"
                           "u1,u1.wav,real,asv,,train\n"
                           "u2,u2.wav,bonafide,asv,,train\n";
  try {
    parse_manifest(text, ".");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Manifest, RejectsMalformedRows) {
  const std::string h = std::string(kManifestHeader) + "\n";
  EXPECT_THROW(parse_manifest(h + "u1,u1.wav,real,asv,train\n", "."), ParseError);
  EXPECT_THROW(parse_manifest(h + "u1,u1.wav,real,asv,,holdout\n", "."), ParseError);
  EXPECT_THROW(parse_manifest("id,path\nu1,u1.wav\n", "."), ParseError);
  EXPECT_THROW(parse_manifest(h + ",u1.wav,real,asv,,train\n", "."), ParseError);
}

TEST(Manifest, DuplicateIdIsNamed) {
  const std::string text = std::string(kManifestHeader) +
                           "\n"
                           "u1,u1.wav,real,asv,,train\n"
                           "dup7,a.wav,real,asv,,train\n"
                           "dup7,b.wav,fake,asv,,train\n";
  try {
    parse_manifest(text, ".");
    FAIL() << "expected DuplicateId";
  } catch (const DuplicateId& e) {
    EXPECT_NE(std::string(e.what()).find("dup7"), std::string::npos) << e.what();
  }
}

TEST(Manifest, WriteAndLoadRoundTrip) {
  const auto dir = testing::scratch_dir("manifest_rt");
  fs::create_directories(dir / "audio");
  const std::vector<double> tone(1600, 0.1);
  write_wav16(dir / "audio" / "x.wav", tone, 16000);
  Manifest m;
  m.entries.push_back({"x", dir / "audio" / "x.wav", 1, "syn", "opus", Split::kTest, true});
  m.entries.push_back({"y", dir / "audio" / "missing.wav", 0, "syn", std::nullopt, Split::kTrain, false});
  write_manifest(dir / "manifest.csv", m);
  EXPECT_NE(read_text(dir / "manifest.csv").find("audio/x.wav"), std::string::npos);
  const auto back = load_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_TRUE(back.entries[0].resolvable);
  EXPECT_FALSE(back.entries[1].resolvable);
  EXPECT_EQ(fs::weakly_canonical(back.entries[0].audio_path), fs::weakly_canonical(m.entries[0].audio_path));
  EXPECT_EQ(back.entries[0].codec_tag, "opus");
}

TEST(Manifest, MissingFileIsADataError) {
  EXPECT_THROW(load_manifest("/nonexistent/manifest.csv"), DataError);
}

// ---- Splits -------------------------------------------------------------------

std::vector<ManifestEntry> balanced_entries(std::size_t n) {
  std::vector<ManifestEntry> e;
  for (std::size_t i = 0; i < n; ++i) {
    e.push_back({"u" + std::to_string(i), "u.wav", static_cast<int>(i % 2), "d", std::nullopt,
                 Split::kTrain, false});
  }
  return e;
}

TEST(Split, NinetyTenStratified) {
  const auto entries = balanced_entries(100);
  const auto [train, val] = split_90_10(entries, 1);
  ASSERT_EQ(train.size(), 90u);
  ASSERT_EQ(val.size(), 10u);
  auto fakes = [](const std::vector<ManifestEntry>& v) {
    return std::count_if(v.begin(), v.end(), [](const auto& e) { return e.label == 1; });
  };
  EXPECT_EQ(fakes(train), 45);
  EXPECT_EQ(fakes(val), 5);
}

TEST(Split, DeterministicAndSeedDependent) {
  const auto entries = balanced_entries(60);
  EXPECT_EQ(split_90_10(entries, 5), split_90_10(entries, 5));
  EXPECT_NE(split_90_10(entries, 5).second, split_90_10(entries, 6).second);
}

TEST(Split, IsAPartition) {
  const auto entries = balanced_entries(37);
  const auto [train, val] = split_90_10(entries, 2);
  std::multiset<std::string> ids;
  for (const auto& e : train) ids.insert(e.utt_id);
  for (const auto& e : val) ids.insert(e.utt_id);
  std::multiset<std::string> expected;
  for (const auto& e : entries) expected.insert(e.utt_id);
  EXPECT_EQ(ids, expected);
}

TEST(Split, TooFewEntries) {
  EXPECT_THROW(split_90_10(balanced_entries(9), 0), InsufficientData);
}

TEST(Split, TrainingSplitsPreferManifestValidationRows) {
  Manifest m;
  m.entries = balanced_entries(20);
  EXPECT_EQ(training_splits(m, 0).second.size(), 2u);
  m.entries[3].split = Split::kVal;
  m.entries[4].split = Split::kTest;
  const auto [train, val] = training_splits(m, 0);
  ASSERT_EQ(val.size(), 1u);
  EXPECT_EQ(val[0].utt_id, "u3");
  EXPECT_EQ(train.size(), 18u);
}

// ---- Annotation cache ---------------------------------------------------------

class AnnotationCache : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::scratch_dir("cache");
    fs::create_directories(dir_ / "audio");
    for (int i = 0; i < 3; ++i) {
      const auto x = oracle::sine(220.0, 40000, 0.3 + 0.1 * i);
      const auto path = dir_ / "audio" / ("s" + std::to_string(i) + ".wav");
      write_wav16(path, x, 16000);
      entries_.push_back({"s" + std::to_string(i), path, i % 2, "tone", std::nullopt, Split::kTrain,
                          true});
    }
  }
  fs::path dir_;
  std::vector<ManifestEntry> entries_;
};

TEST_F(AnnotationCache, WarmCacheRecomputesNothing) {
  const auto first = annotate_corpus(entries_, dir_ / "c", {}, 1);
  EXPECT_EQ(first.computed, 3u);
  EXPECT_EQ(first.reused, 0u);
  const auto second = annotate_corpus(entries_, dir_ / "c", {}, 1);
  EXPECT_EQ(second.computed, 0u);
  EXPECT_EQ(second.reused, 3u);
}

TEST_F(AnnotationCache, ParameterChangeRecomputesEverything) {
  annotate_corpus(entries_, dir_ / "c", {}, 1);
  AnnotatorOptions changed;
  changed.pitch.threshold_max = 0.3;
  EXPECT_NE(changed.fingerprint(), AnnotatorOptions{}.fingerprint());
  const auto stats = annotate_corpus(entries_, dir_ / "c", changed, 1);
  EXPECT_EQ(stats.computed, 3u);
  EXPECT_EQ(stats.reused, 0u);
}

TEST_F(AnnotationCache, CachedEqualsFreshBitForBit) {
  annotate_corpus(entries_, dir_ / "c", {}, 1);
  for (const auto& e : entries_) {
    const auto fresh = annotate(load_waveform(e.audio_path, kDefaultSilenceThresholdDb));
    EXPECT_EQ(cached_annotation(e, dir_ / "c", {}), fresh) << e.utt_id;
  }
}

TEST_F(AnnotationCache, IndependentOfWorkerCount) {
  annotate_corpus(entries_, dir_ / "one", {}, 1);
  annotate_corpus(entries_, dir_ / "three", {}, 3);
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(dir_ / "one")) {
    ++files;
    EXPECT_EQ(read_text(f.path()), read_text(dir_ / "three" / f.path().filename()));
  }
  EXPECT_EQ(files, 3u);
}

TEST_F(AnnotationCache, SineCorpusMatchesPitchExpectation) {
  annotate_corpus(entries_, dir_ / "c", {}, 2);
  for (const auto& e : entries_) {
    const auto a = cached_annotation(e, dir_ / "c", {});
    std::size_t good = 0, interior = 0;
    for (std::size_t t = 2; t + 2 < a.n_frames(); ++t) {
      ++interior;
      if (a.f0_hz[t] && std::abs(*a.f0_hz[t] - 220.0) <= 2.0) ++good;
    }
    EXPECT_GE(static_cast<double>(good), 0.95 * static_cast<double>(interior)) << e.utt_id;
  }
}

TEST_F(AnnotationCache, SilentAndMissingAudioAreSkipped) {
  const auto silent = dir_ / "audio" / "silent.wav";
  write_wav16(silent, std::vector<double>(16000, 0.0), 16000);
  auto entries = entries_;
  entries.push_back({"quiet", silent, 0, "tone", std::nullopt, Split::kTrain, true});
  entries.push_back({"gone", dir_ / "audio" / "gone.wav", 1, "tone", std::nullopt, Split::kTrain,
                     false});
  const auto stats = annotate_corpus(entries, dir_ / "c", {}, 1);
  EXPECT_EQ(stats.computed, 3u);
  EXPECT_EQ(stats.skipped, 2u);
  ASSERT_EQ(stats.skipped_items.size(), 2u);
  std::set<std::string> ids{stats.skipped_items[0].utt_id, stats.skipped_items[1].utt_id};
  EXPECT_EQ(ids, (std::set<std::string>{"quiet", "gone"}));
}

TEST(AnnotationRecords, JsonlRoundTripAndValidation) {
  FrameAnnotation a;
  a.f0_hz = {120.5, std::nullopt};
  a.f1_hz = {510.0, 525.0};
  a.f2_hz = {1490.0, 1750.0};
  a.voiced = {true, false};
  const auto line = annotation_to_jsonl("u1", a);
  EXPECT_NE(line.find("\"frames\""), std::string::npos);
  EXPECT_EQ(annotation_from_jsonl(line), a);
  EXPECT_THROW(annotation_from_jsonl(R"({"utt_id":"u","frames":[{"t":0,"f0":null,"f1":1,"f2":2,"voiced":true}]})"),
               ParseError);
  EXPECT_THROW(annotation_from_jsonl("{}"), ParseError);
}

TEST(AnnotationRecords, KeyDependsOnIdBytesAndParameters) {
  const std::vector<std::uint8_t> bytes{1, 2, 3};
  const std::vector<std::uint8_t> other{1, 2, 4};
  const AnnotatorOptions p;
  AnnotatorOptions q;
  q.formant.max_bandwidth_hz = 350.0;
  const auto k = annotation_key("u", bytes, p);
  EXPECT_EQ(k.size(), 64u);
  EXPECT_EQ(k, annotation_key("u", bytes, p));
  EXPECT_NE(k, annotation_key("v", bytes, p));
  EXPECT_NE(k, annotation_key("u", other, p));
  EXPECT_NE(k, annotation_key("u", bytes, q));
}

// ---- Synthetic corpus ---------------------------------------------------------

TEST(SyntheticCorpus, ByteIdenticalAcrossRuns) {
  SyntheticCorpusSpec spec;
  spec.n_train = 8;
  spec.n_val = 0;
  spec.n_test = 0;
  spec.seed = 7;
  const auto a = testing::scratch_dir("synth_a");
  const auto b = testing::scratch_dir("synth_b");
  const auto ma = generate_synthetic_corpus(spec, a);
  generate_synthetic_corpus(spec, b);
  ASSERT_EQ(ma.entries.size(), 8u);
  EXPECT_EQ(read_text(a / "manifest.csv"), read_text(b / "manifest.csv"));
  for (const auto& e : ma.entries) {
    const auto rel = fs::relative(e.audio_path, a);
    EXPECT_EQ(read_file_bytes(a / rel), read_file_bytes(b / rel)) << e.utt_id;
  }
}

TEST(SyntheticCorpus, ManifestMatchesCounts) {
  SyntheticCorpusSpec spec;
  spec.n_train = 6;
  spec.n_val = 2;
  spec.n_test = 4;
  spec.codecs = {"mp3", "opus"};
  const auto m = generate_synthetic_corpus(spec, testing::scratch_dir("synth_counts"));
  EXPECT_EQ(m.entries.size(), corpus_size(spec));
  EXPECT_EQ(m.select(Split::kTrain).size(), 6u);
  EXPECT_EQ(m.select(Split::kVal).size(), 2u);
  EXPECT_EQ(m.select(Split::kTest).size(), 4u);
  int fakes = 0;
  for (const auto& e : m.entries) {
    fakes += e.label;
    EXPECT_TRUE(e.resolvable);
    EXPECT_TRUE(e.codec_tag == "mp3" || e.codec_tag == "opus");
  }
  EXPECT_EQ(fakes, 6);
}

TEST(SyntheticCorpus, SpecJsonRoundTrip) {
  SyntheticCorpusSpec spec;
  spec.n_train = 12;
  spec.codecs = {"amr"};
  spec.fake_tone_db = -24.0;
  EXPECT_EQ(spec_from_json(spec_to_json(spec)), spec);
  EXPECT_THROW(spec_from_json(R"({"n_trian": 3})"), ParseError);
  EXPECT_THROW(spec_from_json(R"({"n_train": 0, "n_val": 0, "n_test": 0})"), std::exception);
}

TEST(SyntheticCorpus, RealItemsTrackAtTheirSpecifiedPitch) {
  SyntheticCorpusSpec spec;
  spec.n_train = 8;
  spec.n_val = 0;
  spec.n_test = 0;
  const auto dir = testing::scratch_dir("synth_pitch");
  const auto m = generate_synthetic_corpus(spec, dir);
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto u = synthesize_utterance(spec, i);
    if (u.label != 0) continue;
    // Leading silence is whole trim blocks, so sample 0 of the fixed
    // waveform is sample 0 of the content.
    const auto track = track_pitch(load_waveform(m.entries[i].audio_path, kDefaultSilenceThresholdDb));
    std::size_t good = 0, checked = 0;
    for (std::size_t t = 0; t < track.size(); ++t) {
      const std::size_t begin = t * kHopLength;
      const std::size_t end = begin + kFrameLength;
      if (end > u.f0_hz.size()) break;
      // Frames well inside one voiced segment.
      const std::size_t lo = begin >= 1024 ? begin - 1024 : 0;
      const std::size_t hi = std::min(u.f0_hz.size(), end + 1024);
      if (std::any_of(u.f0_hz.begin() + lo, u.f0_hz.begin() + hi, [](double f) { return f == 0.0; })) {
        continue;
      }
      double mean_f0 = 0.0;
      for (std::size_t k = begin; k < end; ++k) mean_f0 += u.f0_hz[k] / kFrameLength;
      ++checked;
      if (track[t] && std::abs(*track[t] - mean_f0) <= 2.0) ++good;
    }
    ASSERT_GT(checked, 40u) << u.utt_id;
    EXPECT_GE(static_cast<double>(good), 0.9 * static_cast<double>(checked))
        << u.utt_id << ": " << good << "/" << checked;
  }
}

TEST(SyntheticCorpus, UtteranceLayout) {
  SyntheticCorpusSpec spec;
  const auto u = synthesize_utterance(spec, 3);
  EXPECT_EQ(u.utt_id, "syn_train_0003");
  EXPECT_EQ(u.label, 1);
  EXPECT_EQ(u.samples.size(), spec.leading_silence + spec.content_length);
  EXPECT_EQ(u.f0_hz.size(), spec.content_length);
  double peak = 0.0;
  for (double x : u.samples) peak = std::max(peak, std::abs(x));
  EXPECT_LE(peak, 1.0);
}

}  // namespace
}  // namespace voxtrace
