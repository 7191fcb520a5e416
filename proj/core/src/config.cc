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

#include "voxtrace/config.h"

#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "voxtrace/errors.h"

namespace voxtrace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using FieldSetter = std::function<bool(const std::string&, const json&)>;

void read_object(const json& j, const std::string& section, const FieldSetter& set) {
  if (!j.is_object()) throw ParseError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!set(key, value)) throw ParseError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename V>
bool take(const json& value, V& out) {
  out = value.get<V>();
  return true;
}

json model_json(const ModelConfig& m) {
  json ranges = json::array();
  for (const auto& r : m.formant_ranges) ranges.push_back({r.lo_hz, r.hi_hz});
  return {{"dim", m.dim},
          {"enc_layers", m.enc_layers},
          {"enc_heads", m.enc_heads},
          {"enc_head_dim", m.enc_head_dim},
          {"mlp_dim", m.mlp_dim},
          {"pred_layers", m.pred_layers},
          {"pred_heads", m.pred_heads},
          {"pred_head_dim", m.pred_head_dim},
          {"pool_heads", m.pool_heads},
          {"n_frames", m.n_frames},
          {"n_bins", m.n_bins},
          {"formant_ranges", ranges},
          {"layer_norm_eps", m.layer_norm_eps},
          {"seed", m.seed}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m = ModelConfig::toy();
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "full") m = ModelConfig::full();
    else if (preset == "toy") m = ModelConfig::toy();
    else if (preset == "tiny") m = ModelConfig::tiny();
    else throw ParseError("unknown model preset '" + preset + "'");
  }
  read_object(j, "model", [&](const std::string& k, const json& v) {
    if (k == "preset") return true;
    if (k == "dim") return take(v, m.dim);
    if (k == "enc_layers") return take(v, m.enc_layers);
    if (k == "enc_heads") return take(v, m.enc_heads);
    if (k == "enc_head_dim") return take(v, m.enc_head_dim);
    if (k == "mlp_dim") return take(v, m.mlp_dim);
    if (k == "pred_layers") return take(v, m.pred_layers);
    if (k == "pred_heads") return take(v, m.pred_heads);
    if (k == "pred_head_dim") return take(v, m.pred_head_dim);
    if (k == "pool_heads") return take(v, m.pool_heads);
    if (k == "n_frames") return take(v, m.n_frames);
    if (k == "n_bins") return take(v, m.n_bins);
    if (k == "layer_norm_eps") return take(v, m.layer_norm_eps);
    if (k == "seed") return take(v, m.seed);
    if (k == "formant_ranges") {
      if (!v.is_array() || v.size() != 3) throw ParseError("formant_ranges needs 3 [lo, hi] pairs");
      for (std::size_t i = 0; i < 3; ++i) {
        const auto pair = v[i].get<std::vector<double>>();
        if (pair.size() != 2) throw ParseError("formant_ranges entries must be [lo, hi]");
        m.formant_ranges[i] = {pair[0], pair[1]};
      }
      return true;
    }
    return false;
  });
  m.validate();
  return m;
}

json train_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"lr", t.lr},
          {"plateau_patience", t.plateau_patience},
          {"decay_factor", t.decay_factor},
          {"improvement_tol", t.improvement_tol},
          {"early_stop_patience", t.early_stop_patience},
          {"max_epochs", t.max_epochs},
          {"loss_weights",
           {{"score", t.weights.score}, {"voicing", t.weights.voicing}, {"formant", t.weights.formant}}},
          {"weight_decay", t.weight_decay},
          {"seed", t.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  read_object(j, "train", [&](const std::string& k, const json& v) {
    if (k == "batch_size") return take(v, t.batch_size);
    if (k == "lr") return take(v, t.lr);
    if (k == "plateau_patience") return take(v, t.plateau_patience);
    if (k == "decay_factor") return take(v, t.decay_factor);
    if (k == "improvement_tol") return take(v, t.improvement_tol);
    if (k == "early_stop_patience") return take(v, t.early_stop_patience);
    if (k == "max_epochs") return take(v, t.max_epochs);
    if (k == "weight_decay") return take(v, t.weight_decay);
    if (k == "seed") return take(v, t.seed);
    if (k == "loss_weights") {
      read_object(v, "train.loss_weights", [&](const std::string& wk, const json& wv) {
        if (wk == "score") return take(wv, t.weights.score);
        if (wk == "voicing") return take(wv, t.weights.voicing);
        if (wk == "formant") return take(wv, t.weights.formant);
        return false;
      });
      return true;
    }
    return false;
  });
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  return t;
}

json annotator_json(const AnnotatorOptions& a) {
  const auto& p = a.pitch;
  const auto& f = a.formant;
  return {{"pitch",
           {{"fmin_hz", p.fmin_hz},
            {"fmax_hz", p.fmax_hz},
            {"threshold_max", p.threshold_max},
            {"n_thresholds", p.n_thresholds},
            {"absolute_min_prob", p.absolute_min_prob},
            {"cents_per_bin", p.cents_per_bin},
            {"jump_cost_per_bin", p.jump_cost_per_bin},
            {"max_jump_bins", p.max_jump_bins},
            {"switch_prob", p.switch_prob},
            {"silence_energy", p.silence_energy}}},
          {"formant",
           {{"pre_emphasis", f.pre_emphasis},
            {"lpc_order", f.lpc_order},
            {"floor_hz", f.floor_hz},
            {"ceiling_hz", f.ceiling_hz},
            {"max_bandwidth_hz", f.max_bandwidth_hz},
            {"f1_default_hz", f.f1_default_hz},
            {"f2_default_hz", f.f2_default_hz}}},
          {"silence_threshold_db", a.silence_threshold_db}};
}

AnnotatorOptions annotator_from_json(const json& j) {
  AnnotatorOptions a;
  read_object(j, "annotator", [&](const std::string& k, const json& v) {
    if (k == "silence_threshold_db") return take(v, a.silence_threshold_db);
    if (k == "pitch") {
      auto& p = a.pitch;
      read_object(v, "annotator.pitch", [&](const std::string& pk, const json& pv) {
        if (pk == "fmin_hz") return take(pv, p.fmin_hz);
        if (pk == "fmax_hz") return take(pv, p.fmax_hz);
        if (pk == "threshold_max") return take(pv, p.threshold_max);
        if (pk == "n_thresholds") return take(pv, p.n_thresholds);
        if (pk == "absolute_min_prob") return take(pv, p.absolute_min_prob);
        if (pk == "cents_per_bin") return take(pv, p.cents_per_bin);
        if (pk == "jump_cost_per_bin") return take(pv, p.jump_cost_per_bin);
        if (pk == "max_jump_bins") return take(pv, p.max_jump_bins);
        if (pk == "switch_prob") return take(pv, p.switch_prob);
        if (pk == "silence_energy") return take(pv, p.silence_energy);
        return false;
      });
      return true;
    }
    if (k == "formant") {
      auto& f = a.formant;
      read_object(v, "annotator.formant", [&](const std::string& fk, const json& fv) {
        if (fk == "pre_emphasis") return take(fv, f.pre_emphasis);
        if (fk == "lpc_order") return take(fv, f.lpc_order);
        if (fk == "floor_hz") return take(fv, f.floor_hz);
        if (fk == "ceiling_hz") return take(fv, f.ceiling_hz);
        if (fk == "max_bandwidth_hz") return take(fv, f.max_bandwidth_hz);
        if (fk == "f1_default_hz") return take(fv, f.f1_default_hz);
        if (fk == "f2_default_hz") return take(fv, f.f2_default_hz);
        return false;
      });
      return true;
    }
    return false;
  });
  return a;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("bad " + what + ": " + e.what());
  }
}

RunConfig config_from_object(const json& j) {
  RunConfig cfg;
  try {
    read_object(j, "config", [&](const std::string& k, const json& v) {
      if (k == "model") {
        cfg.model = model_from_json(v);
        return true;
      }
      if (k == "train") {
        cfg.train = train_from_json(v);
        return true;
      }
      if (k == "annotator") {
        cfg.annotator = annotator_from_json(v);
        return true;
      }
      if (k == "workers") return take(v, cfg.workers);
      return false;
    });
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config value: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  return cfg;
}

json config_object(const RunConfig& cfg) {
  return {{"model", model_json(cfg.model)},
          {"train", train_json(cfg.train)},
          {"annotator", annotator_json(cfg.annotator)},
          {"workers", cfg.workers}};
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  return config_from_object(parse_json(text, "config"));
}

std::string config_to_json(const RunConfig& cfg) { return config_object(cfg).dump(2); }

RunConfig load_config(const fs::path& path) { return config_from_json(read_text_file(path)); }

fs::path sidecar_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".json";
  return p;
}

void save_trained(const fs::path& checkpoint, const Model<float>& model,
                  const FormantScaler& scaler, const RunConfig& cfg) {
  save_checkpoint(checkpoint, model.state(), ValueType::kFloat32);
  json j = config_object(cfg);
  j["model"] = model_json(model.config());
  j["scaler"] = {{"mean", scaler.mean}, {"stddev", scaler.stddev}};
  std::ofstream out(sidecar_path(checkpoint), std::ios::binary);
  if (!out) throw DataError("cannot write " + sidecar_path(checkpoint).string());
  out << j.dump(2) << '\n';
}

TrainedModel load_trained(const fs::path& checkpoint) {
  json j = parse_json(read_text_file(sidecar_path(checkpoint)), "checkpoint sidecar");
  FormantScaler scaler;
  try {
    const auto s = j.at("scaler");
    scaler.mean = s.at("mean").get<std::array<double, 3>>();
    scaler.stddev = s.at("stddev").get<std::array<double, 3>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint sidecar lacks a scaler: ") + e.what());
  }
  j.erase("scaler");
  RunConfig cfg = config_from_object(j);
  Model<float> model(cfg.model);
  const auto arrays = load_checkpoint(checkpoint);
  model.load_state(arrays);
  return {std::move(model), scaler, cfg};
}

}  // namespace voxtrace
