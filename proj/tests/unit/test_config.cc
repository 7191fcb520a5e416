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

#include <filesystem>
#include <fstream>

#include "support/synthetic_set.h"
#include "voxtrace/config.h"
#include "voxtrace/errors.h"

namespace voxtrace {
namespace {

TEST(RunConfig, DefaultsAreToyModelAndListedTrainingValues) {
  const RunConfig c = config_from_json("{}");
  EXPECT_EQ(c.model, ModelConfig::toy());
  EXPECT_EQ(c.train, TrainConfig{});
  EXPECT_EQ(c.train.plateau_patience, 10);
  EXPECT_EQ(c.train.early_stop_patience, 20);
  EXPECT_EQ(c.train.weights, (LossWeights{1.0, 0.3, 0.3}));
  EXPECT_EQ(c.workers, 1u);
}

TEST(RunConfig, RoundTripCoversEveryField) {
  RunConfig c;
  c.model = ModelConfig::tiny();
  c.model.seed = 42;
  c.model.formant_ranges[2] = {700.0, 3000.0};
  c.train.batch_size = 4;
  c.train.lr = 3e-4;
  c.train.decay_factor = 0.25;
  c.train.weights.voicing = 0.7;
  c.train.seed = 9;
  c.annotator.pitch.threshold_max = 0.3;
  c.annotator.formant.max_bandwidth_hz = 300.0;
  c.annotator.silence_threshold_db = -35.0;
  c.workers = 3;
  const RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.train, c.train);
  EXPECT_EQ(back.annotator.fingerprint(), c.annotator.fingerprint());
  EXPECT_EQ(back.annotator.silence_threshold_db, -35.0);
  EXPECT_EQ(back.workers, 3u);
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(RunConfig, PresetsWithOverrides) {
  const auto full = config_from_json(R"({"model": {"preset": "full"}})");
  EXPECT_EQ(full.model, ModelConfig::full());
  const auto tweaked = config_from_json(R"({"model": {"preset": "tiny", "pool_heads": 5}})");
  auto expected = ModelConfig::tiny();
  expected.pool_heads = 5;
  EXPECT_EQ(tweaked.model, expected);
  EXPECT_THROW(config_from_json(R"({"model": {"preset": "huge"}})"), ParseError);
}

TEST(RunConfig, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(config_from_json(R"({"trian": {}})"), ParseError);
  EXPECT_THROW(config_from_json(R"({"train": {"learning_rate": 1}})"), ParseError);
  EXPECT_THROW(config_from_json(R"({"train": {"loss_weights": {"mse": 1}}})"), ParseError);
  EXPECT_THROW(config_from_json(R"({"train": {"lr": "fast"}})"), ParseError);
  EXPECT_THROW(config_from_json(R"({"model": {"enc_heads": 3}})"), ParseError);
  EXPECT_THROW(config_from_json("not json"), ParseError);
}

TEST(TrainedBundle, SaveLoadRestoresModelScalerAndConfig) {
  const auto dir = testing::scratch_dir("bundle");
  RunConfig cfg;
  cfg.model = ModelConfig::tiny();
  cfg.train.lr = 2e-3;
  Model<float> m(cfg.model);
  const FormantScaler scaler{{4.9, 6.2, 7.4}, {0.2, 0.3, 0.25}};
  save_trained(dir / "m.vxck", m, scaler, cfg);
  EXPECT_TRUE(std::filesystem::exists(sidecar_path(dir / "m.vxck")));
  const auto back = load_trained(dir / "m.vxck");
  EXPECT_EQ(back.scaler, scaler);
  EXPECT_EQ(back.config.model, cfg.model);
  EXPECT_EQ(back.config.train.lr, 2e-3);
  EXPECT_EQ(back.model.state(), m.state());
}

TEST(TrainedBundle, MissingSidecarIsADataError) {
  const auto dir = testing::scratch_dir("bundle_missing");
  EXPECT_THROW(load_trained(dir / "absent.vxck"), DataError);
}

}  // namespace
}  // namespace voxtrace
