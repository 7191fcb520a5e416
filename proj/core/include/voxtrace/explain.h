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

// Temporal attribution: how much of the pooling attention a detector spends
// on voiced versus unvoiced frames, for correctly classified utterances.

#ifndef VOXTRACE_EXPLAIN_H_
#define VOXTRACE_EXPLAIN_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxtrace/metrics.h"

namespace voxtrace {

inline constexpr double kWeightSumTolerance = 1e-5;
inline constexpr double kVoicingThreshold = 0.5;

struct Reliance {
  double voiced_share = 0.0;
  double unvoiced_share = 0.0;
};

// Throws InvalidWeights on length mismatch, negative or non-finite weights,
// or a sum further than kWeightSumTolerance from 1.
Reliance utterance_reliance(std::span<const double> frame_weights,
                            const std::vector<bool>& voiced);

enum class VoicingSource { kModel, kGroundTruth };

// Per-frame voicing of a record: voicing_prob >= 0.5 for the model source,
// gt_voiced for the ground-truth source (DataError when absent).
std::vector<bool> record_voicing(const ScoreRecord& r, VoicingSource source);

struct RelianceRow {
  std::string utt_id;
  std::string dataset_tag;
  int label = 0;
  double score = 0.0;
  Reliance reliance;
};

struct RelianceGroup {
  std::string dataset_tag;
  int label = 0;
  std::size_t n_utterances = 0;
  // Absent when no utterance of the group was classified correctly.
  std::optional<double> voiced_share;
  std::optional<double> unvoiced_share;
};

struct RelianceReport {
  double threshold = 0.0;
  VoicingSource source = VoicingSource::kModel;
  std::vector<RelianceGroup> groups;  // by dataset tag, then real before fake
  std::vector<RelianceRow> rows;      // correctly classified, by utt_id
};

// True when the record is classified correctly with "fake" meaning
// score >= threshold.
bool correctly_classified(const ScoreRecord& r, double threshold);

// Keeps correctly classified records and averages their shares per
// (dataset, class). Every (dataset, class) pair present in `records` gets a
// group, possibly with n = 0. The result does not depend on record order.
RelianceReport aggregate(std::span<const ScoreRecord> records, double threshold,
                         VoicingSource source = VoicingSource::kModel);

struct TopFrame {
  std::size_t index = 0;
  double weight = 0.0;
  bool voiced = false;
};

// The k highest-weighted frames, ties broken by earlier index. Throws
// std::invalid_argument when k exceeds the number of frames.
std::vector<TopFrame> top_frames(const ScoreRecord& r, std::size_t k,
                                 VoicingSource source = VoicingSource::kModel);

std::string report_json(const RelianceReport& report);
// dataset_tag,class,n,voiced_share,unvoiced_share
std::string report_csv(const RelianceReport& report);

}  // namespace voxtrace

#endif  // VOXTRACE_EXPLAIN_H_
