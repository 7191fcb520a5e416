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

// Compares reverse-mode gradients of a scalar function of leaf tensors with
// central finite differences.

#ifndef VOXTRACE_TESTS_UNIT_GRAD_CHECK_H_
#define VOXTRACE_TESTS_UNIT_GRAD_CHECK_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "oracles/oracles.h"
#include "voxtrace/tensor.h"

namespace voxtrace::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
};

// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline GradCheckResult grad_check(
    const std::function<ag::Tensor<double>()>& loss_fn, std::vector<ag::Tensor<double>> leaves,
    double h = 1e-5, double floor = 1e-6,
    const std::vector<std::string>& names = {}) {
  for (auto& p : leaves) p.zero_grad();
  auto loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : leaves) {
    const auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.numel(), 0.0);
  }
  GradCheckResult result;
  auto value = [&]() {
    ag::NoGradGuard no_grad;
    return loss_fn().item();
  };
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto numeric = oracle::central_difference(value, leaves[i].mutable_values(), h);
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      const double e = relative_error(analytic[i][k], numeric[k], floor);
      if (e > result.max_rel_error) {
        result.max_rel_error = e;
        result.worst = (i < names.size() ? names[i] : "leaf " + std::to_string(i)) + "[" +
                       std::to_string(k) + "] analytic " + std::to_string(analytic[i][k]) +
                       " numeric " + std::to_string(numeric[k]);
      }
    }
  }
  return result;
}

}  // namespace voxtrace::testing

#endif  // VOXTRACE_TESTS_UNIT_GRAD_CHECK_H_
