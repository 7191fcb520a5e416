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
#include <map>
#include <random>
#include <vector>

#include "oracles/oracles.h"
#include "support/synthetic_set.h"
#include "voxtrace/errors.h"
#include "voxtrace/metrics.h"
#include "voxtrace/optim.h"
#include "voxtrace/pipeline.h"
#include "voxtrace/train.h"

namespace voxtrace {
namespace {

using ag::Tensor;
using T = Tensor<double>;

FrameAnnotation make_annotation(const std::vector<std::optional<double>>& f0,
                                const std::vector<double>& f1, const std::vector<double>& f2) {
  FrameAnnotation a;
  a.f0_hz = f0;
  a.f1_hz = f1;
  a.f2_hz = f2;
  for (const auto& v : f0) a.voiced.push_back(v.has_value());
  return a;
}

ForwardResult<double> make_result(double score, const std::vector<double>& voicing,
                                  const std::vector<std::array<double, 3>>& formants) {
  ForwardResult<double> r;
  const std::size_t n = voicing.size();
  std::vector<double> f;
  for (const auto& row : formants) f.insert(f.end(), row.begin(), row.end());
  r.formants_hz = T::from_values({n, 3}, f);
  r.voicing_prob = T::from_values({n, 1}, voicing);
  r.frame_weights = T::full({n, 1}, 1.0 / static_cast<double>(n));
  r.score = T::from_values({1, 1}, {score});
  r.z_enc = T::zeros({n, 1});
  return r;
}

FormantScaler unit_scaler() { return FormantScaler{}; }

// ---- Scaler ---------------------------------------------------------------

TEST(FormantScaler, TwoFrameHandArithmetic) {
  const auto a = make_annotation({100.0, 400.0}, {300.0, 600.0}, {1000.0, 2000.0});
  const auto s = fit_scaler(std::span(&a, 1));
  EXPECT_NEAR(s.mean[0], 0.5 * (std::log(100.0) + std::log(400.0)), 1e-12);
  EXPECT_NEAR(s.stddev[0], 0.5 * std::abs(std::log(400.0) - std::log(100.0)), 1e-12);
  EXPECT_NEAR(s.stddev[2], 0.5 * std::log(2.0), 1e-12);
}

TEST(FormantScaler, IgnoresUnvoicedFrames) {
  const auto a = make_annotation({100.0, std::nullopt, 400.0}, {300.0, 845.0, 600.0},
                                 {1000.0, 2600.0, 2000.0});
  const auto s = fit_scaler(std::span(&a, 1));
  EXPECT_NEAR(s.mean[1], 0.5 * (std::log(300.0) + std::log(600.0)), 1e-12);
}

TEST(FormantScaler, ConstantF0IsDegenerate) {
  const auto a = make_annotation({200.0, 200.0}, {300.0, 600.0}, {1000.0, 2000.0});
  EXPECT_THROW(fit_scaler(std::span(&a, 1)), DegenerateData);
}

TEST(FormantScaler, NoVoicedFramesIsDegenerate) {
  const auto a = make_annotation({std::nullopt, std::nullopt}, {300.0, 600.0}, {1000.0, 2000.0});
  EXPECT_THROW(fit_scaler(std::span(&a, 1)), DegenerateData);
}

TEST(FormantScaler, RoundTrip) {
  const auto a = make_annotation({100.0, 400.0, 150.0}, {300.0, 600.0, 700.0},
                                 {1000.0, 2000.0, 1300.0});
  const auto s = fit_scaler(std::span(&a, 1));
  for (double hz : {61.0, 123.4, 399.0, 2500.0}) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s.invert(s.standardize(hz, k), k), hz, 1e-9);
  }
}

TEST(FormantScaler, TargetsAreClampedIntoRange) {
  const auto a = make_annotation({500.0}, {100.0}, {3000.0});
  const auto t = formant_target(a, 0, kDefaultFormantRanges);
  EXPECT_EQ(t[0], 400.0);
  EXPECT_EQ(t[1], 200.0);
  EXPECT_EQ(t[2], 2700.0);
}

// ---- Compound loss ----------------------------------------------------------

TEST(CompoundLoss, HalfScoreOnFakeIsLn2) {
  const auto a = make_annotation({120.0, std::nullopt}, {500.0, 500.0}, {1500.0, 1500.0});
  const auto r = make_result(0.5, {1.0, 0.0}, {{{120.0, 500.0, 1500.0}}, {{230.0, 525.0, 1750.0}}});
  const auto v = loss_values(compound_loss(r, a, 1, unit_scaler(), kDefaultFormantRanges));
  EXPECT_NEAR(v.bce_p, std::log(2.0), 1e-12);
  EXPECT_NEAR(v.total, std::log(2.0), 1e-6);
  EXPECT_NEAR(v.total, 0.6931, 1e-4);
}

TEST(CompoundLoss, PerfectPredictionsAreNearZero) {
  const auto a = make_annotation({120.0, std::nullopt, 180.0}, {500.0, 400.0, 700.0},
                                 {1500.0, 1200.0, 2100.0});
  const auto r = make_result(0.0, {1.0, 0.0, 1.0},
                             {{{120.0, 500.0, 1500.0}}, {{300.0, 300.0, 900.0}},
                              {{180.0, 700.0, 2100.0}}});
  const auto v = loss_values(compound_loss(r, a, 0, unit_scaler(), kDefaultFormantRanges));
  EXPECT_LT(v.bce_p, 1e-5);
  EXPECT_LT(v.bce_v, 1e-5);
  EXPECT_LT(v.mse_f, 1e-5);
  EXPECT_LT(v.total, 1e-5);
}

TEST(CompoundLoss, ZeroVoicedFramesContributeNoFormantLoss) {
  const auto a = make_annotation({std::nullopt, std::nullopt}, {500.0, 500.0}, {1500.0, 1500.0});
  const auto r = make_result(0.3, {0.2, 0.4}, {{{90.0, 800.0, 900.0}}, {{390.0, 210.0, 2600.0}}});
  const auto terms = compound_loss(r, a, 1, unit_scaler(), kDefaultFormantRanges);
  EXPECT_EQ(loss_values(terms).mse_f, 0.0);
}

TEST(CompoundLoss, FrameMismatchIsAnAlignmentError) {
  const auto a = make_annotation({120.0, 130.0, 140.0}, {500.0, 500.0, 500.0},
                                 {1500.0, 1500.0, 1500.0});
  const auto r = make_result(0.5, {0.5, 0.5}, {{{120.0, 500.0, 1500.0}}, {{120.0, 500.0, 1500.0}}});
  EXPECT_THROW(compound_loss(r, a, 1, unit_scaler(), kDefaultFormantRanges), AlignmentError);
}

struct RandomCase {
  ForwardResult<double> result;
  FrameAnnotation truth;
  int label = 0;
};

RandomCase random_case(std::mt19937_64& rng, std::size_t n, bool allow_voiced = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::optional<double>> f0;
  std::vector<double> f1, f2, voicing;
  std::vector<std::array<double, 3>> formants;
  for (std::size_t t = 0; t < n; ++t) {
    f0.push_back(allow_voiced && u(rng) < 0.6 ? std::optional(60.0 + 400.0 * u(rng)) : std::nullopt);
    f1.push_back(150.0 + 800.0 * u(rng));
    f2.push_back(700.0 + 2200.0 * u(rng));
    voicing.push_back(u(rng));
    formants.push_back({60.0 + 340.0 * u(rng), 200.0 + 650.0 * u(rng), 800.0 + 1900.0 * u(rng)});
  }
  RandomCase c;
  c.truth = make_annotation(f0, f1, f2);
  c.result = make_result(u(rng), voicing, formants);
  c.label = u(rng) < 0.5 ? 1 : 0;
  return c;
}

TEST(CompoundLoss, ComponentsMatchIndependentFormula) {
  std::mt19937_64 rng(21);
  const FormantScaler scaler{{std::log(150.0), std::log(500.0), std::log(1500.0)}, {0.4, 0.3, 0.25}};
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_case(rng, 12);
    const auto v = loss_values(compound_loss(c.result, c.truth, c.label, scaler, kDefaultFormantRanges));
    const double p = c.result.score.item();
    EXPECT_NEAR(v.bce_p, oracle::bce(p, c.label), 1e-12);
    double bv = 0.0, mse = 0.0;
    std::size_t nv = 0;
    for (std::size_t t = 0; t < 12; ++t) {
      const double y = c.truth.voiced[t] ? 1.0 : 0.0;
      bv += oracle::bce(c.result.voicing_prob.values()[t], y) / 12.0;
      if (!c.truth.voiced[t]) continue;
      ++nv;
      const std::array<double, 3> hz{*c.truth.f0_hz[t], c.truth.f1_hz[t], c.truth.f2_hz[t]};
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& r = kDefaultFormantRanges[k];
        const double target = std::clamp(hz[k], r.lo_hz, r.hi_hz);
        const double pred = c.result.formants_hz.at(t, k);
        const double d = (std::log(pred) - std::log(target)) / scaler.stddev[k];
        mse += d * d;
      }
    }
    if (nv > 0) mse /= 3.0 * static_cast<double>(nv);
    EXPECT_NEAR(v.bce_v, bv, 1e-12);
    EXPECT_NEAR(v.mse_f, mse, 1e-12);
  }
}

TEST(CompoundLoss, TotalIsTheWeightedSum) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_case(rng, 10);
    const auto v = loss_values(compound_loss(c.result, c.truth, c.label, unit_scaler(),
                                             kDefaultFormantRanges));
    EXPECT_NEAR(v.total, v.bce_p + 0.3 * v.bce_v + 0.3 * v.mse_f, 1e-12);
    EXPECT_GE(v.bce_p, 0.0);
    EXPECT_GE(v.bce_v, 0.0);
    EXPECT_GE(v.mse_f, 0.0);
  }
}

TEST(CompoundLoss, BatchTotalRecombinesMeans) {
  std::mt19937_64 rng(23);
  std::vector<LossTerms<double>> items;
  for (int i = 0; i < 6; ++i) {
    const auto c = random_case(rng, 8, i % 3 != 0);
    items.push_back(compound_loss(c.result, c.truth, c.label, unit_scaler(), kDefaultFormantRanges));
  }
  const auto b = loss_values(batch_loss<double>(items));
  double p = 0, v = 0, f = 0;
  for (const auto& it : items) {
    const auto x = loss_values(it);
    p += x.bce_p / 6.0;
    v += x.bce_v / 6.0;
    f += x.mse_f / 6.0;
  }
  EXPECT_NEAR(b.bce_p, p, 1e-12);
  EXPECT_NEAR(b.bce_v, v, 1e-12);
  EXPECT_NEAR(b.mse_f, f, 1e-12);
  EXPECT_NEAR(b.total, b.bce_p + 0.3 * b.bce_v + 0.3 * b.mse_f, 1e-12);
}

// ---- Class balancing -------------------------------------------------------------

std::map<std::size_t, int> occurrences(const std::vector<std::size_t>& idx) {
  std::map<std::size_t, int> m;
  for (auto i : idx) ++m[i];
  return m;
}

TEST(Balance, TenFakeFiveReal) {
  std::vector<int> labels(15, 1);
  for (int i = 0; i < 5; ++i) labels[3 * i] = 0;
  const auto idx = balance_indices(labels, 3);
  ASSERT_EQ(idx.size(), 20u);
  const auto occ = occurrences(idx);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(occ.at(i), labels[i] == 0 ? 2 : 1) << i;
}

TEST(Balance, SevenFakeThreeReal) {
  std::vector<int> labels{1, 1, 0, 1, 1, 0, 1, 1, 0, 1};
  const auto idx = balance_indices(labels, 5);
  ASSERT_EQ(idx.size(), 14u);
  int reals = 0;
  for (auto i : idx) reals += labels[i] == 0 ? 1 : 0;
  EXPECT_EQ(reals, 7);
  for (const auto& [i, n] : occurrences(idx)) {
    if (labels[i] == 0) {
      EXPECT_GE(n, 2);
      EXPECT_LE(n, 3);
    } else {
      EXPECT_EQ(n, 1);
    }
  }
}

TEST(Balance, AlreadyBalancedIsUnchanged) {
  std::vector<int> labels{0, 1, 1, 0};
  EXPECT_EQ(balance_indices(labels, 1), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Balance, DeterministicGivenSeed) {
  std::vector<int> labels{1, 1, 1, 1, 1, 1, 1, 0, 0, 0};
  EXPECT_EQ(balance_indices(labels, 9), balance_indices(labels, 9));
}

TEST(Balance, MissingClassThrows) {
  std::vector<int> labels{1, 1, 1};
  EXPECT_THROW(balance_indices(labels, 0), ClassMissing);
}

// ---- Scheduler -------------------------------------------------------------------

TEST(Scheduler, ConstantLossHalvesOnceAtEpochEleven) {
  PlateauScheduler s(1e-3, 10, 0.5, 1e-5, 20);
  for (int epoch = 1; epoch <= 20; ++epoch) {
    s.step(1.0);
    const double expected = epoch < 11 ? 1e-3 : 5e-4;
    EXPECT_DOUBLE_EQ(s.lr(), expected) << "after epoch " << epoch;
    EXPECT_FALSE(s.should_stop()) << epoch;
  }
  s.step(1.0);
  EXPECT_TRUE(s.should_stop());
}

TEST(Scheduler, ImprovementNeedsToBeatTolerance) {
  PlateauScheduler s(1.0, 10, 0.5, 1e-5, 20);
  EXPECT_TRUE(s.step(1.0));
  EXPECT_FALSE(s.step(1.0 - 5e-6));
  EXPECT_TRUE(s.step(0.9));
  EXPECT_EQ(s.epochs_since_best(), 0);
  EXPECT_DOUBLE_EQ(s.best(), 0.9);
}

TEST(Scheduler, ImprovementResetsPatience) {
  PlateauScheduler s(1.0, 3, 0.5, 0.0, 5);
  s.step(1.0);
  for (int i = 0; i < 2; ++i) s.step(1.0);
  s.step(0.5);
  for (int i = 0; i < 2; ++i) s.step(0.5);
  EXPECT_DOUBLE_EQ(s.lr(), 1.0);
  s.step(0.5);
  EXPECT_DOUBLE_EQ(s.lr(), 0.5);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.weights.voicing = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.plateau_patience = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// ---- Training loop ---------------------------------------------------------------

class TrainLoop : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticCorpusSpec spec;
    spec.n_train = 8;
    spec.n_val = 4;
    spec.n_test = 2;
    set_ = new testing::SyntheticSet(
        testing::build_synthetic_set(spec, testing::scratch_dir("train_loop")));
  }
  static void TearDownTestSuite() {
    delete set_;
    set_ = nullptr;
  }
  static TrainConfig small_config() {
    TrainConfig c;
    c.batch_size = 8;
    c.lr = 1e-3;
    c.max_epochs = 5;
    return c;
  }
  static inline testing::SyntheticSet* set_ = nullptr;
};

TEST_F(TrainLoop, ZeroRateStopsAtEpoch21WithFirstCheckpoint) {
  Model<float> m(ModelConfig::toy());
  const auto before = m.state();
  auto cfg = small_config();
  cfg.lr = 0.0;
  cfg.max_epochs = 100;
  const auto r = train_loop(m, set_->train, set_->val, cfg);
  ASSERT_EQ(r.history.size(), 21u);
  EXPECT_EQ(r.best_epoch, 1);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(m.state(), before);
  for (const auto& h : r.history) EXPECT_EQ(h.val_total, r.history.front().val_total);
}

TEST_F(TrainLoop, HistoryRecordsEveryComponent) {
  Model<float> m(ModelConfig::toy());
  auto cfg = small_config();
  cfg.max_epochs = 2;
  std::vector<EpochRecord> seen;
  const auto r = train_loop(m, set_->train, set_->val, cfg,
                            [&](const EpochRecord& e) { seen.push_back(e); });
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(seen, r.history);
  for (const auto& h : r.history) {
    // Components describe the training pass; single precision model.
    EXPECT_NEAR(h.train_total, h.bce_p + 0.3 * h.bce_v + 0.3 * h.mse_f, 1e-5 * h.train_total);
    EXPECT_TRUE(std::isfinite(h.val_total));
    EXPECT_DOUBLE_EQ(h.lr, 1e-3);
  }
  const auto line = to_jsonl(r.history[0]);
  for (const char* key : {"epoch", "lr", "train_total", "val_total", "bce_p", "bce_v", "mse_f"}) {
    EXPECT_NE(line.find(std::string("\"") + key + "\""), std::string::npos) << key;
  }
}

TEST_F(TrainLoop, ReproducibleUnderFixedSeed) {
  auto run = [&] {
    Model<float> m(ModelConfig::toy());
    auto cfg = small_config();
    cfg.batch_size = 3;
    cfg.max_epochs = 3;
    auto r = train_loop(m, set_->train, set_->val, cfg);
    return std::make_pair(r.history, m.state());
  };
  EXPECT_EQ(run(), run());
}

TEST_F(TrainLoop, SmallStepDecreasesLoss) {
  Model<double> m(ModelConfig::toy());
  const auto scaler = fit_scaler([&] {
    std::vector<FrameAnnotation> a;
    for (const auto& e : set_->train) a.push_back(e.annotation);
    return a;
  }());
  auto batch = [&] {
    std::vector<LossTerms<double>> items;
    for (const auto& e : set_->train) {
      items.push_back(compound_loss(m.forward(e.tokens), e.annotation, e.label, scaler,
                                    m.config().formant_ranges));
    }
    return batch_loss<double>(items);
  };
  auto loss = batch();
  const double before = loss.total.item();
  loss.total.backward();
  auto params = m.parameters();
  auto state = ag::make_adamw_state<double>(params);
  ag::adamw_step<double>(params, state, 1e-6);
  ag::NoGradGuard no_grad;
  EXPECT_LT(batch().total.item(), before);
}

TEST_F(TrainLoop, NonFiniteLossAborts) {
  Model<float> m(ModelConfig::toy());
  m.parameter("score.linear.bias").mutable_values()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_loop(m, set_->train, set_->val, small_config());
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST_F(TrainLoop, EmptySplitIsRejected) {
  Model<float> m(ModelConfig::toy());
  EXPECT_THROW(train_loop(m, std::span<const Example>{}, set_->val, small_config()),
               InsufficientData);
}

TEST_F(TrainLoop, OverfitsEightUtterances) {
  Model<float> m(ModelConfig::toy());
  auto cfg = small_config();
  cfg.max_epochs = 30;
  // Validation on the training set keeps the final checkpoint the best fit.
  const auto r = train_loop(m, set_->train, set_->train, cfg);
  ASSERT_GE(r.history.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) {
    EXPECT_LT(r.history[e].train_total, r.history[e - 1].train_total) << "epoch " << e + 1;
  }
  const auto scores = score_examples(m, set_->train, false);
  EXPECT_DOUBLE_EQ(compute_auc(scores), 1.0);
}

}  // namespace
}  // namespace voxtrace
