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

// AdamW with decoupled weight decay and bias-corrected moments.

#ifndef VOXTRACE_OPTIM_H_
#define VOXTRACE_OPTIM_H_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxtrace/errors.h"
#include "voxtrace/tensor.h"

namespace voxtrace::ag {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
struct AdamWState {
  AdamWConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

template <typename T>
AdamWState<T> make_adamw_state(std::span<const Tensor<T>> params, AdamWConfig config = {}) {
  AdamWState<T> state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), T(0));
    state.second_moment.emplace_back(p.numel(), T(0));
  }
  return state;
}

// One update of every parameter from its accumulated gradient. A parameter
// without a gradient is treated as having a zero gradient.
template <typename T>
void adamw_step(std::span<Tensor<T>> params, AdamWState<T>& state, double lr) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adamw_step: " + std::to_string(params.size()) +
                     " parameters but state holds " +
                     std::to_string(state.first_moment.size()));
  }
  const AdamWConfig& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * c.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != values.size()) {
      throw ShapeError("adamw_step: moment buffer does not match parameter " +
                       std::to_string(i));
    }
    const auto grad = params[i].grad();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[k]);
      const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      const double vk = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      const double p = static_cast<double>(values[k]) * decay;
      values[k] = static_cast<T>(p - lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace voxtrace::ag

#endif  // VOXTRACE_OPTIM_H_
