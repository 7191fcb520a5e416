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

#include "voxtrace/explain.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "voxtrace/errors.h"

namespace voxtrace {

Reliance utterance_reliance(std::span<const double> frame_weights,
                            const std::vector<bool>& voiced) {
  if (frame_weights.size() != voiced.size()) {
    throw InvalidWeights(fmt::format("{} weights for {} voicing flags", frame_weights.size(),
                                     voiced.size()));
  }
  double total = 0.0;
  double on_voiced = 0.0;
  for (std::size_t t = 0; t < frame_weights.size(); ++t) {
    const double w = frame_weights[t];
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidWeights(fmt::format("frame {} has weight {}", t, w));
    }
    total += w;
    if (voiced[t]) on_voiced += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw InvalidWeights(fmt::format("frame weights sum to {}", total));
  }
  return {on_voiced, 1.0 - on_voiced};
}

std::vector<bool> record_voicing(const ScoreRecord& r, VoicingSource source) {
  if (source == VoicingSource::kGroundTruth) {
    if (!r.gt_voiced) throw DataError("record " + r.utt_id + " has no ground-truth voicing");
    return *r.gt_voiced;
  }
  std::vector<bool> v(r.voicing_prob.size());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = r.voicing_prob[t] >= kVoicingThreshold;
  return v;
}

bool correctly_classified(const ScoreRecord& r, double threshold) {
  const int predicted = r.score >= threshold ? 1 : 0;
  return predicted == r.label;
}

RelianceReport aggregate(std::span<const ScoreRecord> records, double threshold,
                         VoicingSource source) {
  RelianceReport report;
  report.threshold = threshold;
  report.source = source;

  std::map<std::pair<std::string, int>, std::vector<double>> voiced_shares;
  for (const auto& r : records) {
    voiced_shares[{r.dataset_tag, r.label}];
    if (!correctly_classified(r, threshold)) continue;
    report.rows.push_back({r.utt_id, r.dataset_tag, r.label, r.score,
                           utterance_reliance(r.frame_weights, record_voicing(r, source))});
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const RelianceRow& a, const RelianceRow& b) { return a.utt_id < b.utt_id; });
  for (const auto& row : report.rows) {
    voiced_shares[{row.dataset_tag, row.label}].push_back(row.reliance.voiced_share);
  }

  for (const auto& [key, shares] : voiced_shares) {
    RelianceGroup g;
    g.dataset_tag = key.first;
    g.label = key.second;
    g.n_utterances = shares.size();
    if (!shares.empty()) {
      const double mean =
          std::accumulate(shares.begin(), shares.end(), 0.0) / static_cast<double>(shares.size());
      g.voiced_share = mean;
      g.unvoiced_share = 1.0 - mean;
    }
    report.groups.push_back(std::move(g));
  }
  return report;
}

std::vector<TopFrame> top_frames(const ScoreRecord& r, std::size_t k, VoicingSource source) {
  const std::size_t n = r.frame_weights.size();
  if (k > n) throw std::invalid_argument(fmt::format("k = {} exceeds {} frames", k, n));
  const auto voiced = record_voicing(r, source);
  if (voiced.size() != n) {
    throw InvalidWeights(fmt::format("{} weights for {} voicing flags", n, voiced.size()));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return r.frame_weights[a] > r.frame_weights[b];
  });
  std::vector<TopFrame> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({idx[i], r.frame_weights[idx[i]], voiced[idx[i]]});
  }
  return out;
}

namespace {

const char* class_name(int label) { return label == 1 ? "fake" : "real"; }

}  // namespace

std::string report_json(const RelianceReport& report) {
  nlohmann::json j;
  j["threshold"] = report.threshold;
  j["voicing_source"] = report.source == VoicingSource::kModel ? "model" : "ground_truth";
  j["groups"] = nlohmann::json::array();
  for (const auto& g : report.groups) {
    nlohmann::json row;
    row["dataset_tag"] = g.dataset_tag;
    row["class"] = class_name(g.label);
    row["n_utterances"] = g.n_utterances;
    row["voiced_share"] = g.voiced_share ? nlohmann::json(*g.voiced_share) : nlohmann::json();
    row["unvoiced_share"] =
        g.unvoiced_share ? nlohmann::json(*g.unvoiced_share) : nlohmann::json();
    j["groups"].push_back(std::move(row));
  }
  j["utterances"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["utterances"].push_back({{"utt_id", r.utt_id},
                               {"dataset_tag", r.dataset_tag},
                               {"class", class_name(r.label)},
                               {"score", r.score},
                               {"voiced_share", r.reliance.voiced_share},
                               {"unvoiced_share", r.reliance.unvoiced_share}});
  }
  return j.dump(2);
}

std::string report_csv(const RelianceReport& report) {
  std::string out = "dataset_tag,class,n,voiced_share,unvoiced_share\n";
  for (const auto& g : report.groups) {
    out += fmt::format("{},{},{},{},{}\n", g.dataset_tag, class_name(g.label), g.n_utterances,
                       g.voiced_share ? fmt::format("{:.6f}", *g.voiced_share) : "",
                       g.unvoiced_share ? fmt::format("{:.6f}", *g.unvoiced_share) : "");
  }
  return out;
}

}  // namespace voxtrace
