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

#include "voxtrace/model.h"

#include <cmath>
#include <map>
#include <stdexcept>

#include "voxtrace/errors.h"

namespace voxtrace {

using ag::Tensor;

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.dim = 16;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.enc_head_dim = 8;
  c.mlp_dim = 32;
  c.pred_layers = 1;
  c.pred_heads = 2;
  c.pred_head_dim = 8;
  c.pool_heads = 4;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.dim = 8;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.enc_head_dim = 4;
  c.mlp_dim = 16;
  c.pred_layers = 1;
  c.pred_heads = 2;
  c.pred_head_dim = 4;
  c.pool_heads = 2;
  c.n_frames = 8;
  c.n_bins = 16;
  return c;
}

void ModelConfig::validate() const {
  if (dim == 0 || enc_heads == 0 || enc_head_dim == 0 || mlp_dim == 0 ||
      pred_heads == 0 || pred_head_dim == 0 || pool_heads == 0 || n_frames == 0 ||
      n_bins == 0) {
    throw ShapeError("model config sizes must be positive");
  }
  if (enc_heads * enc_head_dim != dim) {
    throw ShapeError("encoder heads * head_dim (" + std::to_string(enc_heads * enc_head_dim) +
                     ") must equal dim (" + std::to_string(dim) + ")");
  }
  for (const auto& r : formant_ranges) {
    if (!(r.lo_hz > 0.0 && r.hi_hz > r.lo_hz)) {
      throw ShapeError("formant ranges need 0 < lo < hi");
    }
  }
}

namespace {

std::size_t block_params(std::size_t d, std::size_t inner, std::size_t mlp) {
  return 2 * d                    // ln1
         + 2 * (d * inner + inner)  // q, v
         + d * inner              // k, bias-free: a key bias only shifts each softmax row
         + (inner * d + d)        // output projection
         + 2 * d                  // ln2
         + (d * mlp + mlp)        // fc1
         + (mlp * d + d);         // fc2
}

}  // namespace

std::size_t count_params(const ModelConfig& c) {
  const std::size_t d = c.dim;
  const std::size_t stream = (c.n_bins * d + d) + c.n_frames * d +
                             c.enc_layers * block_params(d, c.enc_heads * c.enc_head_dim, c.mlp_dim) +
                             (c.enc_layers > 0 ? 2 * d : 0);
  const std::size_t fusion = 2 * d * d + d;
  const std::size_t heads = (d * 3 + 3) + (d + 1);
  const std::size_t predictor =
      c.pred_layers * block_params(d, c.pred_heads * c.pred_head_dim, c.mlp_dim);
  const std::size_t scorer = d * c.pool_heads + 2 * d + (d + 1);
  return 2 * stream + fusion + heads + predictor + scorer;
}

double formant_from_logit(double z, const FormantRange& r) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (r.hi_hz - r.lo_hz) + r.lo_hz;
}

double logit_for_formant(double hz, const FormantRange& r) {
  const double u = (hz - r.lo_hz) / (r.hi_hz - r.lo_hz);
  return std::log(u / (1.0 - u));
}

std::vector<std::optional<std::array<double, 3>>> masked_formants(const ModelOutput& out) {
  std::vector<std::optional<std::array<double, 3>>> rows(out.formants_hz.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (out.v_mask.at(t)) rows[t] = out.formants_hz[t];
  }
  return rows;
}

template <typename T>
PoolResult<T> attention_pool(const Tensor<T>& z, const Tensor<T>& w_heads) {
  PoolResult<T> r;
  r.frame_scores = ag::logsumexp(ag::matmul(z, w_heads), 1);
  r.frame_weights = ag::softmax(r.frame_scores, 0);
  r.pooled = ag::matmul(ag::transpose(r.frame_weights), z);
  return r;
}

template <typename T>
Tensor<T> grid_tensor(const Grid& g) {
  std::vector<T> values(g.data.begin(), g.data.end());
  return Tensor<T>::from_values({g.rows, g.cols}, std::move(values));
}

template <typename T>
Model<T>::Model(ModelConfig cfg) : cfg_(std::move(cfg)), init_rng_(cfg_.seed) {
  cfg_.validate();
  mag_ = make_stream("mag_encoder");
  phase_ = make_stream("phase_encoder");
  fusion_ = make_linear("fusion", 2 * cfg_.dim, cfg_.dim, true);
  formant_head_ = make_linear("formant_head", cfg_.dim, 3, true);
  voicing_head_ = make_linear("voicing_head", cfg_.dim, 1, true);
  predictor_ = make_stack("predictor", cfg_.pred_layers, cfg_.pred_heads, cfg_.pred_head_dim,
                          /*final_norm=*/false);
  pool_heads_ = add_param("pool.heads", {cfg_.dim, cfg_.pool_heads});
  {
    const double limit = std::sqrt(6.0 / static_cast<double>(cfg_.dim + cfg_.pool_heads));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (T& v : pool_heads_.mutable_values()) v = static_cast<T>(dist(init_rng_));
  }
  score_norm_ = make_norm("score.norm", cfg_.dim);
  score_head_ = make_linear("score.linear", cfg_.dim, 1, true);
}

template <typename T>
Tensor<T> Model<T>::add_param(const std::string& name, ag::Shape shape) {
  auto t = Tensor<T>::zeros(std::move(shape), /*requires_grad=*/true);
  params_.push_back({name, t});
  return t;
}

template <typename T>
typename Model<T>::Linear Model<T>::make_linear(const std::string& name, std::size_t in,
                                                std::size_t out, bool bias) {
  Linear l;
  l.weight = add_param(name + ".weight", {in, out});
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (T& v : l.weight.mutable_values()) v = static_cast<T>(dist(init_rng_));
  if (bias) l.bias = add_param(name + ".bias", {1, out});
  return l;
}

template <typename T>
typename Model<T>::Norm Model<T>::make_norm(const std::string& name, std::size_t d) {
  Norm n;
  n.gamma = add_param(name + ".gamma", {1, d});
  for (T& v : n.gamma.mutable_values()) v = T(1);
  n.beta = add_param(name + ".beta", {1, d});
  return n;
}

template <typename T>
typename Model<T>::Stack Model<T>::make_stack(const std::string& name, std::size_t layers,
                                              std::size_t heads, std::size_t head_dim,
                                              bool final_norm) {
  Stack s;
  const std::size_t d = cfg_.dim;
  const std::size_t inner = heads * head_dim;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string p = name + ".layers." + std::to_string(i);
    Block b;
    b.heads = heads;
    b.head_dim = head_dim;
    b.ln1 = make_norm(p + ".ln1", d);
    b.q = make_linear(p + ".attn.q", d, inner, true);
    b.k = make_linear(p + ".attn.k", d, inner, false);
    b.v = make_linear(p + ".attn.v", d, inner, true);
    b.o = make_linear(p + ".attn.out", inner, d, true);
    b.ln2 = make_norm(p + ".ln2", d);
    b.fc1 = make_linear(p + ".mlp.fc1", d, cfg_.mlp_dim, true);
    b.fc2 = make_linear(p + ".mlp.fc2", cfg_.mlp_dim, d, true);
    s.blocks.push_back(std::move(b));
  }
  if (final_norm && layers > 0) s.final_norm = make_norm(name + ".final_norm", d);
  return s;
}

template <typename T>
typename Model<T>::Stream Model<T>::make_stream(const std::string& name) {
  Stream s;
  s.token_proj = make_linear(name + ".token_proj", cfg_.n_bins, cfg_.dim, true);
  s.pos_embedding = add_param(name + ".pos_embedding", {cfg_.n_frames, cfg_.dim});
  std::normal_distribution<double> dist(0.0, 0.02);
  for (T& v : s.pos_embedding.mutable_values()) v = static_cast<T>(dist(init_rng_));
  s.stack = make_stack(name, cfg_.enc_layers, cfg_.enc_heads, cfg_.enc_head_dim,
                       /*final_norm=*/true);
  return s;
}

template <typename T>
Tensor<T> Model<T>::apply(const Linear& l, const Tensor<T>& x) const {
  auto y = ag::matmul(x, l.weight);
  return l.bias.defined() ? ag::add(y, l.bias) : y;
}

template <typename T>
Tensor<T> Model<T>::apply(const Norm& n, const Tensor<T>& x) const {
  return ag::layer_norm(x, n.gamma, n.beta, static_cast<T>(cfg_.layer_norm_eps));
}

template <typename T>
Tensor<T> Model<T>::apply(const Block& b, const Tensor<T>& x) const {
  const auto h = apply(b.ln1, x);
  const auto q = apply(b.q, h);
  const auto k = apply(b.k, h);
  const auto v = apply(b.v, h);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(b.head_dim));
  std::vector<Tensor<T>> outs;
  outs.reserve(b.heads);
  for (std::size_t i = 0; i < b.heads; ++i) {
    const std::size_t lo = i * b.head_dim;
    const std::size_t hi = lo + b.head_dim;
    const auto qh = b.heads == 1 ? q : ag::slice(q, lo, hi);
    const auto kh = b.heads == 1 ? k : ag::slice(k, lo, hi);
    const auto vh = b.heads == 1 ? v : ag::slice(v, lo, hi);
    const auto scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
    outs.push_back(ag::matmul(ag::softmax(scores, 1), vh));
  }
  const auto attended = outs.size() == 1 ? outs.front() : ag::concat(outs);
  auto y = ag::add(x, apply(b.o, attended));
  const auto m = apply(b.fc2, ag::gelu(apply(b.fc1, apply(b.ln2, y))));
  return ag::add(y, m);
}

template <typename T>
Tensor<T> Model<T>::apply(const Stack& s, const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (const auto& b : s.blocks) y = apply(b, y);
  if (s.final_norm) y = apply(*s.final_norm, y);
  return y;
}

template <typename T>
Tensor<T> Model<T>::apply(const Stream& s, const Tensor<T>& tokens) const {
  if (tokens.rank() != 2 || tokens.dim(0) != cfg_.n_frames || tokens.dim(1) != cfg_.n_bins) {
    throw ShapeError("tokens must be " + ag::to_string({cfg_.n_frames, cfg_.n_bins}) +
                     ", got " + ag::to_string(tokens.shape()));
  }
  const auto x = ag::add(apply(s.token_proj, tokens), s.pos_embedding);
  return apply(s.stack, x);
}

template <typename T>
Tensor<T> Model<T>::encode(const Tensor<T>& mag_tokens, const Tensor<T>& phase_tokens) const {
  const auto zx = apply(mag_, mag_tokens);
  const auto zp = apply(phase_, phase_tokens);
  return apply(fusion_, ag::concat<T>({zx, zp}));
}

template <typename T>
Tensor<T> Model<T>::decode_formants(const Tensor<T>& z_enc) const {
  const auto s = ag::sigmoid(apply(formant_head_, z_enc));
  std::vector<Tensor<T>> cols;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& r = cfg_.formant_ranges[i];
    cols.push_back(ag::add_scalar(ag::scale(ag::slice(s, i, i + 1), static_cast<T>(r.hi_hz - r.lo_hz)),
                                  static_cast<T>(r.lo_hz)));
  }
  return ag::concat(cols);
}

template <typename T>
Tensor<T> Model<T>::decode_voicing(const Tensor<T>& z_enc) const {
  return ag::sigmoid(apply(voicing_head_, z_enc));
}

template <typename T>
PoolResult<T> Model<T>::predictor_pool(const Tensor<T>& z_enc) const {
  return attention_pool(apply(predictor_, z_enc), pool_heads_);
}

template <typename T>
Tensor<T> Model<T>::score_from_pooled(const Tensor<T>& pooled) const {
  return ag::sigmoid(apply(score_head_, apply(score_norm_, pooled)));
}

template <typename T>
ForwardResult<T> Model<T>::forward(const Tensor<T>& mag_tokens,
                                   const Tensor<T>& phase_tokens) const {
  ForwardResult<T> r;
  r.z_enc = encode(mag_tokens, phase_tokens);
  r.formants_hz = decode_formants(r.z_enc);
  r.voicing_prob = decode_voicing(r.z_enc);
  const auto pool = predictor_pool(r.z_enc);
  r.frame_weights = pool.frame_weights;
  r.score = score_from_pooled(pool.pooled);
  return r;
}

template <typename T>
ForwardResult<T> Model<T>::forward(const Tokens& tokens) const {
  return forward(grid_tensor<T>(tokens.mag), grid_tensor<T>(tokens.phase));
}

template <typename T>
ModelOutput Model<T>::predict(const Tokens& tokens) const {
  ag::NoGradGuard guard;
  return to_output(forward(tokens));
}

template <typename T>
std::vector<Tensor<T>> Model<T>::parameters() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

template <typename T>
Tensor<T> Model<T>::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("no parameter named " + name);
}

template <typename T>
std::size_t Model<T>::num_params() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
std::vector<NamedArray> Model<T>::state() const {
  std::vector<NamedArray> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    const auto v = p.tensor.values();
    out.push_back({p.name, p.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return out;
}

template <typename T>
void Model<T>::load_state(std::span<const NamedArray> arrays) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  if (by_name.size() != params_.size()) {
    throw ShapeError("checkpoint has " + std::to_string(by_name.size()) +
                     " parameters, model expects " + std::to_string(params_.size()));
  }
  for (auto& p : params_) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ShapeError("checkpoint lacks parameter " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw ShapeError("parameter " + p.name + " has shape " +
                       ag::to_string(it->second->shape) + ", model expects " +
                       ag::to_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->values[i]);
  }
}

template <typename T>
ModelOutput to_output(const ForwardResult<T>& r) {
  ModelOutput out;
  const std::size_t frames = r.voicing_prob.numel();
  out.formants_hz.resize(frames);
  out.voicing_prob.resize(frames);
  out.v_mask.resize(frames);
  out.frame_weights.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      out.formants_hz[t][i] = static_cast<double>(r.formants_hz.values()[t * 3 + i]);
    }
    out.voicing_prob[t] = static_cast<double>(r.voicing_prob.values()[t]);
    out.v_mask[t] = out.voicing_prob[t] >= 0.5;
    out.frame_weights[t] = static_cast<double>(r.frame_weights.values()[t]);
  }
  out.score = static_cast<double>(r.score.item());
  return out;
}

template class Model<float>;
template class Model<double>;
template PoolResult<float> attention_pool(const Tensor<float>&, const Tensor<float>&);
template PoolResult<double> attention_pool(const Tensor<double>&, const Tensor<double>&);
template ModelOutput to_output(const ForwardResult<float>&);
template ModelOutput to_output(const ForwardResult<double>&);
template Tensor<float> grid_tensor(const Grid&);
template Tensor<double> grid_tensor(const Grid&);

}  // namespace voxtrace
