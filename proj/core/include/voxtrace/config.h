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

// Run configuration as a JSON document, and trained-model bundles: the
// parameter checkpoint plus a JSON sidecar holding the configuration and the
// formant scaler.

#ifndef VOXTRACE_CONFIG_H_
#define VOXTRACE_CONFIG_H_

#include <cstddef>
#include <filesystem>
#include <string>

#include "voxtrace/model.h"
#include "voxtrace/pipeline.h"
#include "voxtrace/train.h"

namespace voxtrace {

struct RunConfig {
  ModelConfig model = ModelConfig::toy();
  TrainConfig train;
  AnnotatorOptions annotator;
  std::size_t workers = 1;
};

// Sections "model", "train", "annotator" and key "workers". A model section
// may start from {"preset": "full" | "toy" | "tiny"} and override fields.
// Missing keys keep their defaults; unknown keys throw ParseError.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

struct TrainedModel {
  Model<float> model;
  FormantScaler scaler;
  RunConfig config;
};

// The sidecar lives next to the checkpoint with ".json" appended.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

void save_trained(const std::filesystem::path& checkpoint, const Model<float>& model,
                  const FormantScaler& scaler, const RunConfig& cfg);
TrainedModel load_trained(const std::filesystem::path& checkpoint);

}  // namespace voxtrace

#endif  // VOXTRACE_CONFIG_H_
