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

// voxtrace command-line interface.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "voxtrace/annotate.h"
#include "voxtrace/config.h"
#include "voxtrace/dsp.h"
#include "voxtrace/errors.h"
#include "voxtrace/explain.h"
#include "voxtrace/metrics.h"
#include "voxtrace/pipeline.h"
#include "voxtrace/synth.h"
#include "voxtrace/train.h"
#include "voxtrace/wav.h"

namespace fs = std::filesystem;
using namespace voxtrace;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

void check_front_end(const ModelConfig& m) {
  if (m.n_frames != kNumFrames || m.n_bins != kNumBins) {
    throw UsageError(fmt::format("model expects {} x {} tokens but audio yields {} x {}",
                                 m.n_frames, m.n_bins, kNumFrames, kNumBins));
  }
}

void report_skips(const CacheStats& stats) {
  for (const auto& s : stats.skipped_items) {
    std::cerr << fmt::format("skipped {}: {}\n", s.utt_id, s.reason);
  }
}

// Drops entries whose audio cannot be annotated, after reporting them.
std::vector<ManifestEntry> usable(const std::vector<ManifestEntry>& entries,
                                  const CacheStats& stats) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    bool skipped = false;
    for (const auto& s : stats.skipped_items) skipped = skipped || s.utt_id == e.utt_id;
    if (!skipped) out.push_back(e);
  }
  return out;
}

int run_annotate(const std::string& manifest_path, const std::string& cache,
                 const std::string& config_path, std::size_t workers) {
  const RunConfig cfg = config_or_default(config_path);
  const Manifest m = load_manifest(manifest_path);
  const auto stats =
      annotate_corpus(m.entries, cache, cfg.annotator, workers ? workers : cfg.workers);
  report_skips(stats);
  std::cout << fmt::format("annotated {} utterances: {} computed, {} reused, {} skipped\n",
                           m.entries.size(), stats.computed, stats.reused, stats.skipped);
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& cache,
              const std::string& config_path, const std::string& out,
              const std::string& history_path) {
  const RunConfig cfg = config_or_default(config_path);
  check_front_end(cfg.model);
  const Manifest m = load_manifest(manifest_path);
  auto [train_entries, val_entries] = training_splits(m, cfg.train.seed);

  std::vector<ManifestEntry> all = train_entries;
  all.insert(all.end(), val_entries.begin(), val_entries.end());
  const auto stats = annotate_corpus(all, cache, cfg.annotator, cfg.workers);
  report_skips(stats);
  train_entries = usable(train_entries, stats);
  val_entries = usable(val_entries, stats);

  const auto train_raw = load_examples(train_entries, fs::path(cache), cfg.annotator);
  const auto val = load_examples(val_entries, fs::path(cache), cfg.annotator);
  const auto train = balance_classes<Example>(train_raw, cfg.train.seed);
  std::cerr << fmt::format("training on {} utterances ({} before balancing), validating on {}\n",
                           train.size(), train_raw.size(), val.size());

  Model<float> model(cfg.model);
  const fs::path history = history_path.empty() ? fs::path(out + ".history.jsonl") : fs::path(history_path);
  if (history.has_parent_path()) fs::create_directories(history.parent_path());
  std::ofstream hist(history, std::ios::binary);
  if (!hist) throw DataError("cannot write " + history.string());
  const auto result = train_loop<float>(model, train, val, cfg.train, [&](const EpochRecord& r) {
    hist << to_jsonl(r) << '\n';
    hist.flush();
    std::cerr << fmt::format("epoch {:3d}  lr {:.2e}  train {:.5f}  val {:.5f}\n", r.epoch, r.lr,
                             r.train_total, r.val_total);
  });

  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_trained(out, model, result.scaler, cfg);
  std::cout << fmt::format("best epoch {} (val loss {:.6f}), {} epochs run{}; saved {}\n",
                           result.best_epoch, result.best_val, result.history.size(),
                           result.stopped_early ? ", stopped early" : "", out);
  return 0;
}

int run_eval(const std::string& manifest_path, const std::string& ckpt,
             const std::string& scores_path, const std::string& by, const std::string& split,
             const std::string& cache) {
  const TrainedModel tm = load_trained(ckpt);
  check_front_end(tm.model.config());
  const Manifest m = load_manifest(manifest_path);

  std::vector<ManifestEntry> entries;
  if (split == "all") {
    entries = m.entries;
  } else if (split.empty()) {
    entries = m.select(Split::kTest);
    if (entries.empty()) entries = m.entries;
  } else {
    entries = m.select(parse_split(split));
  }
  if (entries.empty()) throw DataError("no manifest entries to evaluate");

  std::optional<fs::path> cache_dir;
  if (!cache.empty()) {
    cache_dir = fs::path(cache);
    const auto stats = annotate_corpus(entries, *cache_dir, tm.config.annotator, tm.config.workers);
    report_skips(stats);
    entries = usable(entries, stats);
  }
  const auto examples = load_examples(entries, cache_dir, tm.config.annotator);
  const auto records = score_examples(tm.model, std::span<const Example>(examples), cache_dir.has_value());
  write_scores(scores_path, records);

  const TagKey key = by == "codec" ? TagKey::kCodec : TagKey::kDataset;
  std::cout << format_breakdown(breakdown(records, key));
  return 0;
}

int run_explain(const std::string& scores_path, const std::string& report_path,
                const std::string& csv_path, const std::string& voicing) {
  const auto records = read_scores(scores_path);
  const auto eer = compute_eer(records);
  const auto source = voicing == "gt" ? VoicingSource::kGroundTruth : VoicingSource::kModel;
  const auto report = aggregate(records, eer.threshold, source);
  write_text(report_path, report_json(report) + "\n");
  fs::path csv = csv_path.empty() ? fs::path(report_path).replace_extension(".csv") : fs::path(csv_path);
  write_text(csv, report_csv(report));
  std::cout << fmt::format("EER {:.2f}% at threshold {:.6f}; {} of {} utterances correct\n",
                           100.0 * eer.eer, eer.threshold, report.rows.size(), records.size());
  std::cout << report_csv(report);
  return 0;
}

int run_infer(const std::string& wav, const std::string& ckpt, std::size_t top_k) {
  const TrainedModel tm = load_trained(ckpt);
  check_front_end(tm.model.config());
  const FixedWaveform x = load_waveform(wav, tm.config.annotator.silence_threshold_db);
  const ModelOutput out = tm.model.predict(waveform_to_tokens(x));

  ScoreRecord r;
  r.utt_id = fs::path(wav).stem().string();
  r.score = out.score;
  r.frame_weights = out.frame_weights;
  r.voicing_prob = out.voicing_prob;
  const auto rel = utterance_reliance(r.frame_weights, record_voicing(r, VoicingSource::kModel));
  std::size_t n_voiced = 0;
  for (bool v : out.v_mask) n_voiced += v ? 1 : 0;

  std::cout << fmt::format("score {:.6f}\n", out.score);
  std::cout << fmt::format("voiced frames {} / {}\n", n_voiced, out.v_mask.size());
  std::cout << fmt::format("attention on voiced {:.4f}, unvoiced {:.4f}\n", rel.voiced_share,
                           rel.unvoiced_share);
  const auto top = top_frames(r, std::min(top_k, r.frame_weights.size()));
  for (const auto& f : top) {
    std::cout << fmt::format("frame {:3d}  weight {:.5f}  {}\n", f.index, f.weight,
                             f.voiced ? "voiced" : "unvoiced");
  }
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& out) {
  const SyntheticCorpusSpec spec =
      spec_path.empty() ? SyntheticCorpusSpec{} : spec_from_json(read_text(spec_path));
  const Manifest m = generate_synthetic_corpus(spec, out);
  std::cout << fmt::format("wrote {} utterances and {}\n", m.entries.size(),
                           (fs::path(out) / "manifest.csv").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxtrace: multi-task transformer speech deepfake detector"};
  app.require_subcommand(1);

  std::string manifest, cache, config, out, history, ckpt, scores, by = "dataset", split,
      report, csv, voicing = "model", wav, spec;
  std::size_t workers = 0;
  std::size_t top_k = 5;

  auto* annotate_cmd = app.add_subcommand("annotate", "Compute and cache frame annotations");
  annotate_cmd->add_option("--manifest", manifest, "Manifest CSV")->required();
  annotate_cmd->add_option("--cache", cache, "Annotation cache directory")->required();
  annotate_cmd->add_option("--config", config, "Run configuration (JSON)");
  annotate_cmd->add_option("--workers", workers, "Worker threads (default from config)");

  auto* train_cmd = app.add_subcommand("train", "Train a detector");
  train_cmd->add_option("--manifest", manifest, "Manifest CSV")->required();
  train_cmd->add_option("--cache", cache, "Annotation cache directory")->required();
  train_cmd->add_option("--config", config, "Run configuration (JSON)");
  train_cmd->add_option("--out", out, "Checkpoint path")->required();
  train_cmd->add_option("--history", history, "Epoch history (default CKPT.history.jsonl)");

  auto* eval_cmd = app.add_subcommand("eval", "Score a manifest and report EER/AUC");
  eval_cmd->add_option("--manifest", manifest, "Manifest CSV")->required();
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--scores", scores, "Output score file (JSON lines)")->required();
  eval_cmd->add_option("--by", by, "Breakdown key")->check(CLI::IsMember({"codec", "dataset"}));
  eval_cmd->add_option("--split", split, "train, val, test or all (default: test rows, else all)")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval_cmd->add_option("--cache", cache, "Annotation cache; attaches ground-truth voicing");

  auto* explain_cmd = app.add_subcommand("explain", "Voiced/unvoiced attention reliance");
  explain_cmd->add_option("--scores", scores, "Score file from eval")->required();
  explain_cmd->add_option("--report", report, "Report path (JSON)")->required();
  explain_cmd->add_option("--csv", csv, "Group table path (default: report with .csv)");
  explain_cmd->add_option("--voicing", voicing, "Voicing source")
      ->check(CLI::IsMember({"model", "gt"}));

  auto* infer_cmd = app.add_subcommand("infer", "Score a single WAV file");
  infer_cmd->add_option("--wav", wav, "Input WAV")->required();
  infer_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  infer_cmd->add_option("--top-k", top_k, "Frames to list by attention weight");

  auto* synth_cmd = app.add_subcommand("synth-corpus", "Generate a synthetic corpus");
  synth_cmd->add_option("--spec", spec, "Corpus spec (JSON); defaults when omitted");
  synth_cmd->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*annotate_cmd) return run_annotate(manifest, cache, config, workers);
    if (*train_cmd) return run_train(manifest, cache, config, out, history);
    if (*eval_cmd) return run_eval(manifest, ckpt, scores, by, split, cache);
    if (*explain_cmd) return run_explain(scores, report, csv, voicing);
    if (*infer_cmd) return run_infer(wav, ckpt, top_k);
    if (*synth_cmd) return run_synth(spec, out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
