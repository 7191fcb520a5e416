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

// Detection metrics over per-utterance scores: ROC AUC, equal error rate and
// per-tag (dataset or codec) breakdown tables.
//
// Scores are probabilities of "fake" (label 1). At a threshold t an utterance
// is called fake when score >= t, so
//   FAR(t) = fraction of reals with score >= t   (reals accepted as fake)
//   FRR(t) = fraction of fakes with score <  t   (fakes missed)

#ifndef VOXTRACE_METRICS_H_
#define VOXTRACE_METRICS_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voxtrace {

struct LabeledScore {
  double score = 0.0;
  int label = 0;  // 0 = real, 1 = fake
};

struct ScoreRecord {
  std::string utt_id;
  double score = 0.0;
  int label = 0;
  std::string dataset_tag;
  std::optional<std::string> codec_tag;
  std::vector<double> frame_weights;
  std::vector<double> voicing_prob;
  // Ground-truth voicing, present when scoring had annotations available.
  std::optional<std::vector<bool>> gt_voiced;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

std::vector<LabeledScore> labeled_scores(std::span<const ScoreRecord> records);

// Rank-sum (Mann-Whitney) AUC with half credit for ties. Throws ClassMissing
// unless both labels occur.
double compute_auc(std::span<const LabeledScore> scores);
double compute_auc(std::span<const ScoreRecord> records);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Sweeps -inf, the midpoints between consecutive distinct scores and +inf.
// The EER is taken at the first threshold where FRR >= FAR, linearly
// interpolated against the previous threshold when the two rates cross
// strictly between them. Throws ClassMissing unless both labels occur.
EerResult compute_eer(std::span<const LabeledScore> scores);
EerResult compute_eer(std::span<const ScoreRecord> records);

enum class TagKey { kDataset, kCodec };

struct BreakdownRow {
  std::string tag;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  // Absent when the group lacks one of the classes.
  std::optional<double> eer;
  std::optional<double> auc;
};

struct BreakdownTable {
  TagKey key = TagKey::kDataset;
  std::vector<BreakdownRow> rows;  // sorted by tag
  BreakdownRow overall;
};

// Records without a codec tag are grouped under "none".
BreakdownTable breakdown(std::span<const ScoreRecord> records, TagKey key);

// Tags as columns, "EER (%)" and "AUC (%)" as rows, two decimals; undefined
// cells print as "-".
std::string format_breakdown(const BreakdownTable& table);

std::string to_jsonl(const ScoreRecord& r);
ScoreRecord score_record_from_json(const std::string& line);
void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);

}  // namespace voxtrace

#endif  // VOXTRACE_METRICS_H_
