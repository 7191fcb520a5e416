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

#include "voxtrace/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "voxtrace/errors.h"

namespace voxtrace {
namespace {

void require_both_classes(std::span<const LabeledScore> scores, const char* what) {
  bool real = false;
  bool fake = false;
  for (const auto& s : scores) {
    if (s.label == 1) {
      fake = true;
    } else if (s.label == 0) {
      real = true;
    } else {
      throw DataError(std::string(what) + ": label must be 0 or 1");
    }
  }
  if (!real || !fake) throw ClassMissing(std::string(what) + " needs both real and fake scores");
}

std::vector<LabeledScore> sorted_copy(std::span<const LabeledScore> scores) {
  std::vector<LabeledScore> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end(),
            [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });
  return s;
}

}  // namespace

std::vector<LabeledScore> labeled_scores(std::span<const ScoreRecord> records) {
  std::vector<LabeledScore> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.score, r.label});
  return out;
}

double compute_auc(std::span<const LabeledScore> scores) {
  require_both_classes(scores, "AUC");
  const auto s = sorted_copy(scores);
  double fake_rank_sum = 0.0;
  std::size_t n_fake = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j].score == s[i].score) ++j;
    // Ranks i+1 .. j share the average rank.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (s[k].label == 1) {
        fake_rank_sum += avg_rank;
        ++n_fake;
      }
    }
    i = j;
  }
  const auto nf = static_cast<double>(n_fake);
  const auto nr = static_cast<double>(s.size() - n_fake);
  return (fake_rank_sum - nf * (nf + 1.0) / 2.0) / (nf * nr);
}

double compute_auc(std::span<const ScoreRecord> records) {
  return compute_auc(labeled_scores(records));
}

EerResult compute_eer(std::span<const LabeledScore> scores) {
  require_both_classes(scores, "EER");
  const auto s = sorted_copy(scores);
  std::size_t n_real = 0;
  for (const auto& x : s) n_real += x.label == 0 ? 1 : 0;
  const std::size_t n_fake = s.size() - n_real;
  const auto nr = static_cast<double>(n_real);
  const auto nf = static_cast<double>(n_fake);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // State at threshold -inf: everything is called fake.
  std::size_t reals_above = n_real;
  std::size_t fakes_below = 0;
  double prev_far = 1.0;
  double prev_frr = 0.0;
  double prev_threshold = -kInf;

  std::size_t i = 0;
  while (true) {
    double far = 0.0;
    double frr = 0.0;
    double threshold = kInf;
    if (i < s.size()) {
      // Move the threshold past the group of scores equal to s[i].score.
      std::size_t j = i;
      while (j < s.size() && s[j].score == s[i].score) {
        if (s[j].label == 0) {
          --reals_above;
        } else {
          ++fakes_below;
        }
        ++j;
      }
      if (j < s.size()) {
        threshold = 0.5 * (s[i].score + s[j].score);
      } else {
        threshold = kInf;
      }
      far = static_cast<double>(reals_above) / nr;
      frr = static_cast<double>(fakes_below) / nf;
      i = j;
    } else {
      far = 0.0;
      frr = 1.0;
    }

    if (frr >= far) {
      if (frr == far) return {far, threshold};
      const double d0 = prev_far - prev_frr;
      const double d1 = far - frr;
      const double alpha = d0 / (d0 - d1);
      const double far_x = prev_far + alpha * (far - prev_far);
      const double frr_x = prev_frr + alpha * (frr - prev_frr);
      double t = 0.0;
      if (std::isfinite(prev_threshold) && std::isfinite(threshold)) {
        t = prev_threshold + alpha * (threshold - prev_threshold);
      } else if (std::isfinite(prev_threshold)) {
        t = prev_threshold;
      } else if (std::isfinite(threshold)) {
        t = threshold;
      } else {
        t = s.front().score;
      }
      return {0.5 * (far_x + frr_x), t};
    }
    prev_far = far;
    prev_frr = frr;
    prev_threshold = threshold;
  }
}

EerResult compute_eer(std::span<const ScoreRecord> records) {
  return compute_eer(labeled_scores(records));
}

namespace {

BreakdownRow make_row(std::string tag, std::span<const LabeledScore> scores) {
  BreakdownRow row;
  row.tag = std::move(tag);
  for (const auto& s : scores) (s.label == 1 ? row.n_fake : row.n_real) += 1;
  if (row.n_fake > 0 && row.n_real > 0) {
    row.eer = compute_eer(scores).eer;
    row.auc = compute_auc(scores);
  }
  return row;
}

}  // namespace

BreakdownTable breakdown(std::span<const ScoreRecord> records, TagKey key) {
  std::map<std::string, std::vector<LabeledScore>> groups;
  for (const auto& r : records) {
    const std::string tag =
        key == TagKey::kDataset ? r.dataset_tag : r.codec_tag.value_or("none");
    groups[tag].push_back({r.score, r.label});
  }
  BreakdownTable table;
  table.key = key;
  for (const auto& [tag, scores] : groups) table.rows.push_back(make_row(tag, scores));
  table.overall = make_row("overall", labeled_scores(records));
  return table;
}

std::string format_breakdown(const BreakdownTable& table) {
  std::vector<const BreakdownRow*> cols;
  for (const auto& r : table.rows) cols.push_back(&r);
  cols.push_back(&table.overall);

  auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.2f}", 100.0 * *v) : std::string("-");
  };
  std::size_t width = 8;
  for (const auto* c : cols) width = std::max(width, c->tag.size() + 2);

  std::string out = fmt::format("{:<10}", table.key == TagKey::kCodec ? "codec" : "dataset");
  for (const auto* c : cols) out += fmt::format("{:>{}}", c->tag, width);
  out += '\n';
  out += fmt::format("{:<10}", "EER (%)");
  for (const auto* c : cols) out += fmt::format("{:>{}}", cell(c->eer), width);
  out += '\n';
  out += fmt::format("{:<10}", "AUC (%)");
  for (const auto* c : cols) out += fmt::format("{:>{}}", cell(c->auc), width);
  out += '\n';
  return out;
}

std::string to_jsonl(const ScoreRecord& r) {
  nlohmann::json j;
  j["utt_id"] = r.utt_id;
  j["score"] = r.score;
  j["label"] = r.label;
  j["dataset_tag"] = r.dataset_tag;
  j["codec_tag"] = r.codec_tag ? nlohmann::json(*r.codec_tag) : nlohmann::json(nullptr);
  j["frame_weights"] = r.frame_weights;
  j["voicing_prob"] = r.voicing_prob;
  if (r.gt_voiced) j["gt_voiced"] = *r.gt_voiced;
  return j.dump();
}

ScoreRecord score_record_from_json(const std::string& line) {
  ScoreRecord r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.utt_id = j.at("utt_id").get<std::string>();
    r.score = j.at("score").get<double>();
    r.label = j.at("label").get<int>();
    r.dataset_tag = j.at("dataset_tag").get<std::string>();
    if (j.contains("codec_tag") && !j["codec_tag"].is_null()) {
      r.codec_tag = j["codec_tag"].get<std::string>();
    }
    r.frame_weights = j.at("frame_weights").get<std::vector<double>>();
    r.voicing_prob = j.at("voicing_prob").get<std::vector<double>>();
    if (j.contains("gt_voiced")) r.gt_voiced = j["gt_voiced"].get<std::vector<bool>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad score record: ") + e.what());
  }
  if (r.label != 0 && r.label != 1) throw ParseError("score record label must be 0 or 1");
  if (!(r.score >= 0.0 && r.score <= 1.0)) throw ParseError("score must lie in [0, 1]");
  return r;
}

void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << to_jsonl(r) << '\n';
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(score_record_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace voxtrace
