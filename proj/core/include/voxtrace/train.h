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

// Multi-task objective and the optimization loop.
//
// Per utterance:
//   total = bce(score, label) + w_v * mean_t bce(voicing[t], voiced[t])
//                             + w_f * mse over voiced frames of standardized ln(Hz)
// Batch terms are means over utterances and the batch total is formed from
// those means with the same weights.

#ifndef VOXTRACE_TRAIN_H_
#define VOXTRACE_TRAIN_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "voxtrace/annotate.h"
#include "voxtrace/dsp.h"
#include "voxtrace/errors.h"
#include "voxtrace/model.h"
#include "voxtrace/tensor.h"

namespace voxtrace {

struct LossWeights {
  double score = 1.0;
  double voicing = 0.3;
  double formant = 0.3;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

inline constexpr double kProbabilityClamp = 1e-7;

// Per-formant statistics of ln(Hz) over voiced training frames. Index 0 is
// f0, 1 is F1, 2 is F2.
struct FormantScaler {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};

  double standardize(double hz, std::size_t k) const;
  double invert(double z, std::size_t k) const;

  friend bool operator==(const FormantScaler&, const FormantScaler&) = default;
};

// Targets are clamped into `ranges` before the log. Throws DegenerateData
// without voiced frames or when a formant has (near) zero spread.
FormantScaler fit_scaler(std::span<const FrameAnnotation> annotations,
                         const std::array<FormantRange, 3>& ranges = kDefaultFormantRanges);

// Clamped (f0, F1, F2) target of frame t; f0 must exist at voiced frames.
std::array<double, 3> formant_target(const FrameAnnotation& a, std::size_t t,
                                     const std::array<FormantRange, 3>& ranges);

template <typename T>
struct LossTerms {
  ag::Tensor<T> total;
  ag::Tensor<T> bce_p;
  ag::Tensor<T> bce_v;
  ag::Tensor<T> mse_f;
};

struct LossValues {
  double total = 0.0;
  double bce_p = 0.0;
  double bce_v = 0.0;
  double mse_f = 0.0;
};

template <typename T>
LossValues loss_values(const LossTerms<T>& terms);

// Throws AlignmentError when the annotation and the model disagree on the
// number of frames.
template <typename T>
LossTerms<T> compound_loss(const ForwardResult<T>& out, const FrameAnnotation& truth,
                           int label, const FormantScaler& scaler,
                           const std::array<FormantRange, 3>& ranges,
                           const LossWeights& weights = {});

// Means of each term over a batch; total recombined from the means.
template <typename T>
LossTerms<T> batch_loss(std::span<const LossTerms<T>> items, const LossWeights& weights = {});

struct Example {
  std::string utt_id;
  int label = 0;  // 0 = real, 1 = fake
  std::string dataset_tag;
  std::optional<std::string> codec_tag;
  Tokens tokens;
  FrameAnnotation annotation;
};

// Indices that equalize class counts: every item once in input order, then
// minority items appended by cycling through a seed-shuffled order. Throws
// ClassMissing unless both labels occur.
std::vector<std::size_t> balance_indices(std::span<const int> labels, std::uint64_t seed);

template <typename Item>
std::vector<Item> balance_classes(std::span<const Item> items, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(items.size());
  for (const auto& it : items) labels.push_back(it.label);
  std::vector<Item> out;
  for (std::size_t i : balance_indices(labels, seed)) out.push_back(items[i]);
  return out;
}

struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-4;
  int plateau_patience = 10;
  double decay_factor = 0.5;
  double improvement_tol = 1e-5;
  int early_stop_patience = 20;
  int max_epochs = 100;
  LossWeights weights;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on non-positive sizes, weights or patience.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Reduce-on-plateau learning rate with early stopping. A loss counts as an
// improvement when it beats the best so far by more than the tolerance.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int plateau_patience, double decay_factor,
                   double improvement_tol, int early_stop_patience);

  // Feeds one epoch's validation loss; returns true on improvement.
  bool step(double val_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  bool should_stop() const { return since_best_ >= early_stop_patience_; }
  int epochs_since_best() const { return since_best_; }

 private:
  double lr_;
  int plateau_patience_;
  double decay_factor_;
  double improvement_tol_;
  int early_stop_patience_;
  double best_;
  int since_best_ = 0;
  int since_decay_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;  // rate used during this epoch
  double train_total = 0.0;
  double val_total = 0.0;
  double bce_p = 0.0;
  double bce_v = 0.0;
  double mse_f = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

std::string to_jsonl(const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> history;
  FormantScaler scaler;
  int best_epoch = 0;
  double best_val = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains in place and leaves the best-validation parameters loaded. The
// scaler is fitted on `train` only. Throws NumericalError on a non-finite
// loss, InsufficientData on an empty split.
template <typename T>
TrainResult train_loop(Model<T>& model, std::span<const Example> train,
                       std::span<const Example> val, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {});

// Mean loss terms over a set, without recording a graph.
template <typename T>
LossValues evaluate_loss(const Model<T>& model, std::span<const Example> examples,
                         const FormantScaler& scaler, const LossWeights& weights = {});

}  // namespace voxtrace

#endif  // VOXTRACE_TRAIN_H_
