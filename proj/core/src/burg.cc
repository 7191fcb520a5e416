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

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "voxtrace/annotate.h"
#include "voxtrace/errors.h"

namespace voxtrace {

std::vector<double> burg_lpc(std::span<const double> x, int order) {
  if (order < 1) throw ShapeError("LPC order must be positive");
  const std::size_t n = x.size();
  const auto p = static_cast<std::size_t>(order);
  std::vector<double> a(p + 1, 0.0);
  a[0] = 1.0;
  if (n <= p) return a;

  std::vector<double> fwd(x.begin(), x.end());
  std::vector<double> bwd(x.begin(), x.end());
  std::vector<double> prev(p + 1);
  for (std::size_t m = 1; m <= p; ++m) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = m; i < n; ++i) {
      num += fwd[i] * bwd[i - 1];
      den += fwd[i] * fwd[i] + bwd[i - 1] * bwd[i - 1];
    }
    if (den <= 0.0) break;
    const double k = -2.0 * num / den;

    prev = a;
    for (std::size_t i = 1; i <= m; ++i) a[i] = prev[i] + k * prev[m - i];

    // Walk downwards so bwd[i - 1] still holds the order m-1 value.
    for (std::size_t i = n - 1; i >= m; --i) {
      const double f = fwd[i];
      fwd[i] = f + k * bwd[i - 1];
      bwd[i] = bwd[i - 1] + k * f;
    }
  }
  return a;
}

std::vector<std::complex<double>> polynomial_roots(std::span<const double> a) {
  std::size_t lead = 0;
  while (lead < a.size() && a[lead] == 0.0) ++lead;
  if (lead + 1 >= a.size()) return {};
  const auto coeffs = a.subspan(lead);
  const auto degree = static_cast<Eigen::Index>(coeffs.size() - 1);

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (Eigen::Index j = 0; j < degree; ++j) {
    companion(0, j) = -coeffs[static_cast<std::size_t>(j) + 1] / coeffs[0];
  }
  for (Eigen::Index i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;

  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto& values = solver.eigenvalues();
  std::vector<std::complex<double>> roots(values.begin(), values.end());
  return roots;
}

std::vector<Resonance> frame_formants(std::span<const double> frame,
                                      const FormantConfig& cfg) {
  const std::size_t n = frame.size();
  std::vector<double> y(n);
  const double edge = std::exp(-12.0);
  const double mid = 0.5 * static_cast<double>(n - 1);
  const double width = static_cast<double>(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double emphasized = i == 0 ? frame[0] : frame[i] - cfg.pre_emphasis * frame[i - 1];
    const double dt = static_cast<double>(i) - mid;
    const double window = (std::exp(-48.0 * dt * dt / (width * width)) - edge) / (1.0 - edge);
    y[i] = emphasized * window;
  }

  const auto a = burg_lpc(y, cfg.lpc_order);
  std::vector<Resonance> out;
  for (const auto& z : polynomial_roots(a)) {
    if (z.imag() <= 0.0) continue;
    const double radius = std::abs(z);
    if (radius <= 0.0) continue;
    const double freq = std::arg(z) * kSampleRate / (2.0 * std::numbers::pi);
    const double bw = -std::log(radius) * kSampleRate / std::numbers::pi;
    if (freq > cfg.floor_hz && freq < cfg.ceiling_hz && bw < cfg.max_bandwidth_hz) {
      out.push_back({freq, bw});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Resonance& l, const Resonance& r) { return l.frequency_hz < r.frequency_hz; });
  return out;
}

std::vector<FormantPair> track_formants(const FixedWaveform& x, const FormantConfig& cfg) {
  std::vector<FormantPair> out(kNumFrames);
  FormantPair held{cfg.f1_default_hz, cfg.f2_default_hz};
  const auto samples = x.samples();
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    const auto found = frame_formants(samples.subspan(t * kHopLength, kFrameLength), cfg);
    if (found.size() >= 2) held = {found[0].frequency_hz, found[1].frequency_hz};
    out[t] = held;
  }
  return out;
}

}  // namespace voxtrace
