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

// Multi-task frame-level transformer detector.
//
//   magnitude tokens --proj+pos--> encoder stack --+
//                                                  +--concat--> fusion --> z_enc
//   phase tokens     --proj+pos--> encoder stack --+
//
//   z_enc --> formant head   (sigmoid mapped onto per-formant Hz ranges)
//   z_enc --> voicing head   (per-frame probability, mask at >= 0.5)
//   z_enc --> predictor stack --> logsumexp/softmax frame pooling
//                             --> layer norm --> linear --> sigmoid score

#ifndef VOXTRACE_MODEL_H_
#define VOXTRACE_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "voxtrace/checkpoint.h"
#include "voxtrace/dsp.h"
#include "voxtrace/tensor.h"

namespace voxtrace {

struct FormantRange {
  double lo_hz = 0.0;
  double hi_hz = 0.0;

  friend bool operator==(const FormantRange&, const FormantRange&) = default;
};

inline constexpr std::array<FormantRange, 3> kDefaultFormantRanges{
    {{60.0, 400.0}, {200.0, 850.0}, {800.0, 2700.0}}};

struct ModelConfig {
  std::size_t dim = 512;
  std::size_t enc_layers = 8;
  std::size_t enc_heads = 8;
  std::size_t enc_head_dim = 64;
  std::size_t mlp_dim = 1024;
  std::size_t pred_layers = 4;
  std::size_t pred_heads = 6;
  std::size_t pred_head_dim = 64;
  std::size_t pool_heads = 4;
  std::size_t n_frames = kNumFrames;
  std::size_t n_bins = kNumBins;
  std::array<FormantRange, 3> formant_ranges = kDefaultFormantRanges;
  double layer_norm_eps = 1e-5;
  std::uint64_t seed = 0;

  // Full-size configuration (~41.9M parameters).
  static ModelConfig full();
  // Small configuration for the 128 x 256 front end that trains on one core.
  static ModelConfig toy();
  // Tiny configuration (L=8, M=16, D=8, single-layer stacks) for gradient checks.
  static ModelConfig tiny();

  // Throws ShapeError on zero sizes, enc_heads * enc_head_dim != dim or
  // invalid formant ranges.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Exact number of learnable scalars of Model<T>(cfg).
std::size_t count_params(const ModelConfig& cfg);

// sigma(z) * (hi - lo) + lo, and its inverse.
double formant_from_logit(double z, const FormantRange& range);
double logit_for_formant(double hz, const FormantRange& range);

template <typename T>
struct NamedParam {
  std::string name;
  ag::Tensor<T> tensor;
};

template <typename T>
struct PoolResult {
  ag::Tensor<T> pooled;         // 1 x D
  ag::Tensor<T> frame_weights;  // L x 1, softmax over frames
  ag::Tensor<T> frame_scores;   // L x 1, logsumexp over heads
};

// Multi-head logsumexp attention pooling over the rows of z (L x D) with head
// projection w_heads (D x H).
template <typename T>
PoolResult<T> attention_pool(const ag::Tensor<T>& z, const ag::Tensor<T>& w_heads);

template <typename T>
struct ForwardResult {
  ag::Tensor<T> z_enc;          // L x D
  ag::Tensor<T> formants_hz;    // L x 3
  ag::Tensor<T> voicing_prob;   // L x 1
  ag::Tensor<T> frame_weights;  // L x 1
  ag::Tensor<T> score;          // 1 x 1
};

// Plain-value view of one forward pass.
struct ModelOutput {
  std::vector<std::array<double, 3>> formants_hz;
  std::vector<double> voicing_prob;
  std::vector<bool> v_mask;
  double score = 0.0;
  std::vector<double> frame_weights;
};

// Formant rows gated by v_mask: unvoiced frames carry no formants.
std::vector<std::optional<std::array<double, 3>>> masked_formants(const ModelOutput& out);

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }

  // Token grids are L x M each. Returns z_enc (L x D).
  ag::Tensor<T> encode(const ag::Tensor<T>& mag_tokens,
                       const ag::Tensor<T>& phase_tokens) const;
  ag::Tensor<T> decode_formants(const ag::Tensor<T>& z_enc) const;
  ag::Tensor<T> decode_voicing(const ag::Tensor<T>& z_enc) const;
  // Returns the 1 x 1 score and the pooling weights.
  PoolResult<T> predictor_pool(const ag::Tensor<T>& z_enc) const;
  ag::Tensor<T> score_from_pooled(const ag::Tensor<T>& pooled) const;

  ForwardResult<T> forward(const ag::Tensor<T>& mag_tokens,
                           const ag::Tensor<T>& phase_tokens) const;
  ForwardResult<T> forward(const Tokens& tokens) const;

  // Inference without graph recording.
  ModelOutput predict(const Tokens& tokens) const;

  const std::vector<NamedParam<T>>& named_parameters() const { return params_; }
  std::vector<ag::Tensor<T>> parameters() const;
  // Throws std::out_of_range for unknown names.
  ag::Tensor<T> parameter(const std::string& name) const;
  std::size_t num_params() const;
  void zero_grad();

  std::vector<NamedArray> state() const;
  // Names and shapes must match exactly.
  void load_state(std::span<const NamedArray> arrays);

 private:
  struct Linear {
    ag::Tensor<T> weight;  // in x out
    ag::Tensor<T> bias;    // 1 x out, undefined when bias-free
  };
  struct Norm {
    ag::Tensor<T> gamma;
    ag::Tensor<T> beta;
  };
  struct Block {
    Norm ln1;
    Linear q, k, v, o;
    Norm ln2;
    Linear fc1, fc2;
    std::size_t heads = 0;
    std::size_t head_dim = 0;
  };
  struct Stack {
    std::vector<Block> blocks;
    std::optional<Norm> final_norm;
  };
  struct Stream {
    Linear token_proj;
    ag::Tensor<T> pos_embedding;  // L x D
    Stack stack;
  };

  ag::Tensor<T> add_param(const std::string& name, ag::Shape shape);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, bool bias);
  Norm make_norm(const std::string& name, std::size_t d);
  Stack make_stack(const std::string& name, std::size_t layers, std::size_t heads,
                   std::size_t head_dim, bool final_norm);
  Stream make_stream(const std::string& name);

  ag::Tensor<T> apply(const Linear& l, const ag::Tensor<T>& x) const;
  ag::Tensor<T> apply(const Norm& n, const ag::Tensor<T>& x) const;
  ag::Tensor<T> apply(const Block& b, const ag::Tensor<T>& x) const;
  ag::Tensor<T> apply(const Stack& s, const ag::Tensor<T>& x) const;
  ag::Tensor<T> apply(const Stream& s, const ag::Tensor<T>& tokens) const;

  ModelConfig cfg_;
  std::mt19937_64 init_rng_;
  std::vector<NamedParam<T>> params_;

  Stream mag_;
  Stream phase_;
  Linear fusion_;
  Linear formant_head_;
  Linear voicing_head_;
  Stack predictor_;
  ag::Tensor<T> pool_heads_;  // D x H
  Norm score_norm_;
  Linear score_head_;
};

template <typename T>
ModelOutput to_output(const ForwardResult<T>& r);

// Converts a token grid to a tensor (no gradient).
template <typename T>
ag::Tensor<T> grid_tensor(const Grid& g);

extern template class Model<float>;
extern template class Model<double>;
extern template PoolResult<float> attention_pool(const ag::Tensor<float>&,
                                                 const ag::Tensor<float>&);
extern template PoolResult<double> attention_pool(const ag::Tensor<double>&,
                                                  const ag::Tensor<double>&);
extern template ModelOutput to_output(const ForwardResult<float>&);
extern template ModelOutput to_output(const ForwardResult<double>&);
extern template ag::Tensor<float> grid_tensor(const Grid&);
extern template ag::Tensor<double> grid_tensor(const Grid&);

}  // namespace voxtrace

#endif  // VOXTRACE_MODEL_H_
