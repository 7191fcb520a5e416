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

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "voxtrace/annotate.h"
#include "voxtrace/dsp.h"
#include "voxtrace/metrics.h"
#include "voxtrace/model.h"
#include "voxtrace/train.h"

namespace {

using namespace voxtrace;

FixedWaveform tone(double hz) {
  std::vector<double> x(kFixedLength);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / kSampleRate);
  }
  return FixedWaveform(std::move(x));
}

void BM_Stft(benchmark::State& state) {
  const auto x = tone(220.0);
  for (auto _ : state) benchmark::DoNotOptimize(stft_features(x));
}
BENCHMARK(BM_Stft)->Unit(benchmark::kMillisecond);

void BM_TrackPitch(benchmark::State& state) {
  const auto x = tone(220.0);
  for (auto _ : state) benchmark::DoNotOptimize(track_pitch(x));
}
BENCHMARK(BM_TrackPitch)->Unit(benchmark::kMillisecond);

void BM_TrackFormants(benchmark::State& state) {
  const auto x = tone(220.0);
  for (auto _ : state) benchmark::DoNotOptimize(track_formants(x));
}
BENCHMARK(BM_TrackFormants)->Unit(benchmark::kMillisecond);

void BM_ToyForwardBackward(benchmark::State& state) {
  Model<float> model(ModelConfig::toy());
  const Tokens tokens = waveform_to_tokens(tone(150.0));
  const auto mag = grid_tensor<float>(tokens.mag);
  const auto phase = grid_tensor<float>(tokens.phase);
  for (auto _ : state) {
    model.zero_grad();
    auto out = model.forward(mag, phase);
    auto loss = ag::sum(out.score);
    loss.backward();
  }
}
BENCHMARK(BM_ToyForwardBackward)->Unit(benchmark::kMillisecond);

void BM_Eer(benchmark::State& state) {
  std::vector<LabeledScore> s;
  for (int i = 0; i < state.range(0); ++i) {
    s.push_back({std::fmod(0.6180339887 * i, 1.0), i % 2});
  }
  for (auto _ : state) benchmark::DoNotOptimize(compute_eer(s));
}
BENCHMARK(BM_Eer)->Arg(200)->Arg(20000);

}  // namespace
BENCHMARK_MAIN();
