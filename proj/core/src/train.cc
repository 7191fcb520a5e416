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

#include "voxtrace/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "voxtrace/optim.h"

namespace voxtrace {

double FormantScaler::standardize(double hz, std::size_t k) const {
  return (std::log(hz) - mean.at(k)) / stddev.at(k);
}

double FormantScaler::invert(double z, std::size_t k) const {
  return std::exp(z * stddev.at(k) + mean.at(k));
}

std::array<double, 3> formant_target(const FrameAnnotation& a, std::size_t t,
                                     const std::array<FormantRange, 3>& ranges) {
  if (!a.f0_hz.at(t)) throw DataError(fmt::format("frame {} has no f0 target", t));
  const std::array<double, 3> raw{*a.f0_hz[t], a.f1_hz.at(t), a.f2_hz.at(t)};
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = std::clamp(raw[k], ranges[k].lo_hz, ranges[k].hi_hz);
  }
  return out;
}

namespace {

void check_aligned(const FrameAnnotation& a, std::size_t n_frames) {
  if (a.voiced.size() != n_frames || a.f0_hz.size() != n_frames ||
      a.f1_hz.size() != n_frames || a.f2_hz.size() != n_frames) {
    throw AlignmentError(fmt::format(
        "annotation has {}/{}/{}/{} (voiced/f0/f1/f2) frames, model produced {}",
        a.voiced.size(), a.f0_hz.size(), a.f1_hz.size(), a.f2_hz.size(), n_frames));
  }
}

}  // namespace

FormantScaler fit_scaler(std::span<const FrameAnnotation> annotations,
                         const std::array<FormantRange, 3>& ranges) {
  std::array<double, 3> sum{};
  std::size_t n = 0;
  for (const auto& a : annotations) {
    check_aligned(a, a.voiced.size());
    for (std::size_t t = 0; t < a.n_frames(); ++t) {
      if (!a.voiced[t]) continue;
      const auto f = formant_target(a, t, ranges);
      for (std::size_t k = 0; k < 3; ++k) sum[k] += std::log(f[k]);
      ++n;
    }
  }
  if (n == 0) throw DegenerateData("no voiced frames to fit the formant scaler");

  FormantScaler s;
  for (std::size_t k = 0; k < 3; ++k) s.mean[k] = sum[k] / static_cast<double>(n);
  std::array<double, 3> sq{};
  for (const auto& a : annotations) {
    for (std::size_t t = 0; t < a.n_frames(); ++t) {
      if (!a.voiced[t]) continue;
      const auto f = formant_target(a, t, ranges);
      for (std::size_t k = 0; k < 3; ++k) {
        const double d = std::log(f[k]) - s.mean[k];
        sq[k] += d * d;
      }
    }
  }
  static constexpr const char* kNames[3] = {"f0", "F1", "F2"};
  for (std::size_t k = 0; k < 3; ++k) {
    s.stddev[k] = std::sqrt(sq[k] / static_cast<double>(n));
    if (!(s.stddev[k] > 1e-8) || !std::isfinite(s.mean[k])) {
      throw DegenerateData(fmt::format("{} has no spread over voiced frames", kNames[k]));
    }
  }
  return s;
}

template <typename T>
LossValues loss_values(const LossTerms<T>& terms) {
  return {static_cast<double>(terms.total.item()), static_cast<double>(terms.bce_p.item()),
          static_cast<double>(terms.bce_v.item()), static_cast<double>(terms.mse_f.item())};
}

namespace {

template <typename T>
ag::Tensor<T> combine(const ag::Tensor<T>& bce_p, const ag::Tensor<T>& bce_v,
                      const ag::Tensor<T>& mse_f, const LossWeights& w) {
  return ag::add(ag::add(ag::scale(bce_p, static_cast<T>(w.score)),
                         ag::scale(bce_v, static_cast<T>(w.voicing))),
                 ag::scale(mse_f, static_cast<T>(w.formant)));
}

// -(y ln p + (1 - y) ln(1 - p)) elementwise, with p clamped away from 0 and 1.
template <typename T>
ag::Tensor<T> bce(const ag::Tensor<T>& p, const std::vector<T>& y) {
  const T eps = static_cast<T>(kProbabilityClamp);
  const auto pc = ag::clamp(p, eps, T(1) - eps);
  std::vector<T> not_y(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) not_y[i] = T(1) - y[i];
  const auto yt = ag::Tensor<T>::from_values(p.shape(), y);
  const auto nyt = ag::Tensor<T>::from_values(p.shape(), std::move(not_y));
  const auto log_p = ag::log(pc);
  const auto log_q = ag::log(ag::add_scalar(ag::scale(pc, T(-1)), T(1)));
  return ag::scale(ag::add(ag::mul(yt, log_p), ag::mul(nyt, log_q)), T(-1));
}

}  // namespace

template <typename T>
LossTerms<T> compound_loss(const ForwardResult<T>& out, const FrameAnnotation& truth,
                           int label, const FormantScaler& scaler,
                           const std::array<FormantRange, 3>& ranges,
                           const LossWeights& weights) {
  if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
  const std::size_t n_frames = out.voicing_prob.dim(0);
  check_aligned(truth, n_frames);

  LossTerms<T> terms;
  terms.bce_p = ag::reshape(bce(out.score, std::vector<T>{static_cast<T>(label)}), {});

  std::vector<T> voiced(n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) voiced[t] = truth.voiced[t] ? T(1) : T(0);
  terms.bce_v = ag::mean(bce(out.voicing_prob, voiced));

  const std::size_t n_voiced = truth.n_voiced();
  if (n_voiced == 0) {
    terms.mse_f = ag::Tensor<T>::scalar(T(0));
  } else {
    std::vector<T> target(n_frames * 3, T(0));
    std::vector<T> mask(n_frames * 3, T(0));
    std::vector<T> inv_std(n_frames * 3);
    std::vector<T> mean(3);
    for (std::size_t k = 0; k < 3; ++k) mean[k] = static_cast<T>(scaler.mean[k]);
    for (std::size_t t = 0; t < n_frames; ++t) {
      for (std::size_t k = 0; k < 3; ++k) inv_std[t * 3 + k] = static_cast<T>(1.0 / scaler.stddev[k]);
      if (!truth.voiced[t]) continue;
      const auto f = formant_target(truth, t, ranges);
      for (std::size_t k = 0; k < 3; ++k) {
        target[t * 3 + k] = static_cast<T>(scaler.standardize(f[k], k));
        mask[t * 3 + k] = T(1);
      }
    }
    const ag::Shape shape{n_frames, 3};
    const auto z = ag::mul(ag::sub(ag::log(out.formants_hz),
                                   ag::Tensor<T>::from_values({1, 3}, std::move(mean))),
                           ag::Tensor<T>::from_values(shape, std::move(inv_std)));
    const auto diff = ag::mul(ag::sub(z, ag::Tensor<T>::from_values(shape, std::move(target))),
                              ag::Tensor<T>::from_values(shape, std::move(mask)));
    terms.mse_f = ag::scale(ag::sum(ag::mul(diff, diff)),
                            static_cast<T>(1.0 / (3.0 * static_cast<double>(n_voiced))));
  }
  terms.total = combine(terms.bce_p, terms.bce_v, terms.mse_f, weights);
  return terms;
}

template <typename T>
LossTerms<T> batch_loss(std::span<const LossTerms<T>> items, const LossWeights& weights) {
  if (items.empty()) throw InsufficientData("batch_loss on an empty batch");
  LossTerms<T> acc{items[0].bce_p, items[0].bce_p, items[0].bce_v, items[0].mse_f};
  for (std::size_t i = 1; i < items.size(); ++i) {
    acc.bce_p = ag::add(acc.bce_p, items[i].bce_p);
    acc.bce_v = ag::add(acc.bce_v, items[i].bce_v);
    acc.mse_f = ag::add(acc.mse_f, items[i].mse_f);
  }
  const T inv = static_cast<T>(1.0 / static_cast<double>(items.size()));
  acc.bce_p = ag::scale(acc.bce_p, inv);
  acc.bce_v = ag::scale(acc.bce_v, inv);
  acc.mse_f = ag::scale(acc.mse_f, inv);
  acc.total = combine(acc.bce_p, acc.bce_v, acc.mse_f, weights);
  return acc;
}

std::vector<std::size_t> balance_indices(std::span<const int> labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("label must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw ClassMissing(fmt::format("cannot balance {} real / {} fake items",
                                   by_class[0].size(), by_class[1].size()));
  }
  std::vector<std::size_t> out(labels.size());
  std::iota(out.begin(), out.end(), std::size_t{0});

  auto& minority = by_class[0].size() < by_class[1].size() ? by_class[0] : by_class[1];
  const std::size_t majority = std::max(by_class[0].size(), by_class[1].size());
  std::mt19937_64 rng(seed);
  std::shuffle(minority.begin(), minority.end(), rng);
  for (std::size_t i = minority.size(), j = 0; i < majority; ++i, ++j) {
    out.push_back(minority[j % minority.size()]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
  if (plateau_patience <= 0 || early_stop_patience <= 0) {
    throw std::invalid_argument("patience values must be positive");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw std::invalid_argument("decay_factor must lie in (0, 1]");
  }
  if (!(improvement_tol >= 0.0)) throw std::invalid_argument("improvement_tol must be >= 0");
  if (max_epochs <= 0) throw std::invalid_argument("max_epochs must be positive");
  if (!(weights.score > 0.0 && weights.voicing > 0.0 && weights.formant > 0.0)) {
    throw std::invalid_argument("loss weights must be strictly positive");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
}

PlateauScheduler::PlateauScheduler(double lr, int plateau_patience, double decay_factor,
                                   double improvement_tol, int early_stop_patience)
    : lr_(lr),
      plateau_patience_(plateau_patience),
      decay_factor_(decay_factor),
      improvement_tol_(improvement_tol),
      early_stop_patience_(early_stop_patience),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ - improvement_tol_) {
    best_ = val_loss;
    since_best_ = 0;
    since_decay_ = 0;
    return true;
  }
  ++since_best_;
  if (++since_decay_ >= plateau_patience_) {
    lr_ *= decay_factor_;
    since_decay_ = 0;
  }
  return false;
}

std::string to_jsonl(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["train_total"] = r.train_total;
  j["val_total"] = r.val_total;
  j["bce_p"] = r.bce_p;
  j["bce_v"] = r.bce_v;
  j["mse_f"] = r.mse_f;
  return j.dump();
}

namespace {

template <typename T>
struct TokenTensors {
  ag::Tensor<T> mag;
  ag::Tensor<T> phase;
};

template <typename T>
std::vector<TokenTensors<T>> to_tensors(std::span<const Example> examples) {
  std::vector<TokenTensors<T>> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    out.push_back({grid_tensor<T>(e.tokens.mag), grid_tensor<T>(e.tokens.phase)});
  }
  return out;
}

void check_finite(const LossValues& v, int epoch, std::size_t batch, const char* stage) {
  const std::pair<const char*, double> parts[] = {
      {"bce_p", v.bce_p}, {"bce_v", v.bce_v}, {"mse_f", v.mse_f}, {"total", v.total}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      throw NumericalError(fmt::format("non-finite {} loss at epoch {}, batch {} (component {} = {})",
                                       stage, epoch, batch, name, value));
    }
  }
}

template <typename T>
LossValues mean_loss(const Model<T>& model, std::span<const Example> examples,
                     std::span<const TokenTensors<T>> tokens, const FormantScaler& scaler,
                     const LossWeights& weights) {
  ag::NoGradGuard no_grad;
  LossValues acc;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto out = model.forward(tokens[i].mag, tokens[i].phase);
    const auto v = loss_values(compound_loss(out, examples[i].annotation, examples[i].label,
                                             scaler, model.config().formant_ranges, weights));
    acc.total += v.total;
    acc.bce_p += v.bce_p;
    acc.bce_v += v.bce_v;
    acc.mse_f += v.mse_f;
  }
  const double n = static_cast<double>(examples.size());
  return {acc.total / n, acc.bce_p / n, acc.bce_v / n, acc.mse_f / n};
}

}  // namespace

template <typename T>
LossValues evaluate_loss(const Model<T>& model, std::span<const Example> examples,
                         const FormantScaler& scaler, const LossWeights& weights) {
  if (examples.empty()) throw InsufficientData("evaluate_loss on an empty set");
  const auto tokens = to_tensors<T>(examples);
  return mean_loss(model, examples, std::span<const TokenTensors<T>>(tokens), scaler, weights);
}

template <typename T>
TrainResult train_loop(Model<T>& model, std::span<const Example> train,
                       std::span<const Example> val, const TrainConfig& cfg,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty() || val.empty()) {
    throw InsufficientData(fmt::format("training needs non-empty splits (train {}, val {})",
                                       train.size(), val.size()));
  }
  const auto& ranges = model.config().formant_ranges;
  std::vector<FrameAnnotation> train_annotations;
  for (const auto& e : train) train_annotations.push_back(e.annotation);

  TrainResult result;
  result.scaler = fit_scaler(train_annotations, ranges);

  const auto train_tokens = to_tensors<T>(train);
  const auto val_tokens = to_tensors<T>(val);

  auto params = model.parameters();
  ag::AdamWConfig opt_cfg;
  opt_cfg.weight_decay = cfg.weight_decay;
  auto opt = ag::make_adamw_state<T>(params, opt_cfg);
  PlateauScheduler sched(cfg.lr, cfg.plateau_patience, cfg.decay_factor, cfg.improvement_tol,
                         cfg.early_stop_patience);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto best_state = model.state();
  result.best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr();
    std::shuffle(order.begin(), order.end(), rng);

    LossValues sum;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      model.zero_grad();
      std::vector<LossTerms<T>> items;
      items.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        const auto out = model.forward(train_tokens[idx].mag, train_tokens[idx].phase);
        items.push_back(compound_loss(out, train[idx].annotation, train[idx].label,
                                      result.scaler, ranges, cfg.weights));
      }
      auto batch = batch_loss<T>(items, cfg.weights);
      items.clear();
      const auto v = loss_values(batch);
      check_finite(v, epoch, batch_no, "training");
      batch.total.backward();
      ag::adamw_step<T>(params, opt, rec.lr);

      const double n = static_cast<double>(end - begin);
      sum.total += v.total * n;
      sum.bce_p += v.bce_p * n;
      sum.bce_v += v.bce_v * n;
      sum.mse_f += v.mse_f * n;
    }
    const double n_train = static_cast<double>(train.size());
    rec.train_total = sum.total / n_train;
    rec.bce_p = sum.bce_p / n_train;
    rec.bce_v = sum.bce_v / n_train;
    rec.mse_f = sum.mse_f / n_train;

    const auto val_loss = mean_loss(model, val, std::span<const TokenTensors<T>>(val_tokens),
                                    result.scaler, cfg.weights);
    check_finite(val_loss, epoch, 0, "validation");
    rec.val_total = val_loss.total;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (sched.step(rec.val_total)) {
      best_state = model.state();
      result.best_epoch = epoch;
      result.best_val = rec.val_total;
    }
    if (sched.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  model.zero_grad();
  model.load_state(best_state);
  return result;
}

#define VOXTRACE_INSTANTIATE_TRAIN(T)                                                       \
  template LossValues loss_values(const LossTerms<T>&);                                     \
  template LossTerms<T> compound_loss(const ForwardResult<T>&, const FrameAnnotation&, int, \
                                      const FormantScaler&,                                 \
                                      const std::array<FormantRange, 3>&,                   \
                                      const LossWeights&);                                  \
  template LossTerms<T> batch_loss(std::span<const LossTerms<T>>, const LossWeights&);      \
  template LossValues evaluate_loss(const Model<T>&, std::span<const Example>,              \
                                    const FormantScaler&, const LossWeights&);              \
  template TrainResult train_loop(Model<T>&, std::span<const Example>,                      \
                                  std::span<const Example>, const TrainConfig&,             \
                                  const EpochCallback&);

VOXTRACE_INSTANTIATE_TRAIN(float)
VOXTRACE_INSTANTIATE_TRAIN(double)

}  // namespace voxtrace
