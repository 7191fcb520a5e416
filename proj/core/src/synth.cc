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

#include "voxtrace/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "voxtrace/errors.h"
#include "voxtrace/wav.h"

namespace voxtrace {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHarmonicCeilingHz = 7000.0;
constexpr double kContentPeak = 0.5;
constexpr double kFloorNoise = 1e-4;
constexpr double kUnvoicedLevel = 0.03;
constexpr std::size_t kRampSamples = 80;

double resonance_gain(double f, double f1, double f2) {
  const double a = (f - f1) / 90.0;
  const double b = (f - f2) / 120.0;
  return 0.15 + std::exp(-0.5 * a * a) + 0.6 * std::exp(-0.5 * b * b);
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  if (n_train + n_val + n_test == 0) throw std::invalid_argument("corpus spec has no utterances");
  if (!(f0_min_hz > 0.0 && f0_max_hz >= f0_min_hz)) {
    throw std::invalid_argument("f0 range must be positive and ordered");
  }
  if (!(vibrato_depth >= 0.0 && vibrato_depth < 0.5)) {
    throw std::invalid_argument("vibrato_depth must lie in [0, 0.5)");
  }
  if (!(fake_tone_hz > 0.0 && fake_tone_hz < kSampleRate / 2.0)) {
    throw std::invalid_argument("fake_tone_hz must lie below Nyquist");
  }
  if (!(fake_chunk_ms > 0.0)) throw std::invalid_argument("fake_chunk_ms must be positive");
  if (content_length < kSilenceBlockLength) throw std::invalid_argument("content_length too short");
  if (dataset_tag.empty()) throw std::invalid_argument("dataset_tag must not be empty");
}

std::string spec_to_json(const SyntheticCorpusSpec& s) {
  nlohmann::json j{{"n_train", s.n_train},
                   {"n_val", s.n_val},
                   {"n_test", s.n_test},
                   {"seed", s.seed},
                   {"dataset_tag", s.dataset_tag},
                   {"codecs", s.codecs},
                   {"f0_min_hz", s.f0_min_hz},
                   {"f0_max_hz", s.f0_max_hz},
                   {"vibrato_depth", s.vibrato_depth},
                   {"vibrato_hz", s.vibrato_hz},
                   {"fake_tone_hz", s.fake_tone_hz},
                   {"fake_tone_db", s.fake_tone_db},
                   {"fake_chunk_ms", s.fake_chunk_ms},
                   {"leading_silence", s.leading_silence},
                   {"content_length", s.content_length}};
  return j.dump(2);
}

SyntheticCorpusSpec spec_from_json(const std::string& text) {
  SyntheticCorpusSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ParseError("corpus spec must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "n_train") s.n_train = value.get<std::size_t>();
      else if (key == "n_val") s.n_val = value.get<std::size_t>();
      else if (key == "n_test") s.n_test = value.get<std::size_t>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "dataset_tag") s.dataset_tag = value.get<std::string>();
      else if (key == "codecs") s.codecs = value.get<std::vector<std::string>>();
      else if (key == "f0_min_hz") s.f0_min_hz = value.get<double>();
      else if (key == "f0_max_hz") s.f0_max_hz = value.get<double>();
      else if (key == "vibrato_depth") s.vibrato_depth = value.get<double>();
      else if (key == "vibrato_hz") s.vibrato_hz = value.get<double>();
      else if (key == "fake_tone_hz") s.fake_tone_hz = value.get<double>();
      else if (key == "fake_tone_db") s.fake_tone_db = value.get<double>();
      else if (key == "fake_chunk_ms") s.fake_chunk_ms = value.get<double>();
      else if (key == "leading_silence") s.leading_silence = value.get<std::size_t>();
      else if (key == "content_length") s.content_length = value.get<std::size_t>();
      else throw ParseError("unknown corpus spec key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad corpus spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::size_t corpus_size(const SyntheticCorpusSpec& spec) {
  return spec.n_train + spec.n_val + spec.n_test;
}

SyntheticUtterance synthesize_utterance(const SyntheticCorpusSpec& spec, std::size_t index) {
  spec.validate();
  if (index >= corpus_size(spec)) throw std::out_of_range("utterance index out of range");

  SyntheticUtterance u;
  std::size_t position = index;
  if (position < spec.n_train) {
    u.split = Split::kTrain;
  } else if ((position -= spec.n_train) < spec.n_val) {
    u.split = Split::kVal;
  } else {
    position -= spec.n_val;
    u.split = Split::kTest;
  }
  u.label = static_cast<int>(position % 2);
  u.utt_id = fmt::format("syn_{}_{:04d}", to_string(u.split), position);
  if (!spec.codecs.empty()) u.codec_tag = spec.codecs[index % spec.codecs.size()];
  u.leading_silence = spec.leading_silence;

  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double fs = kSampleRate;
  const std::size_t n = spec.content_length;
  const double base_f0 = spec.f0_min_hz + (spec.f0_max_hz - spec.f0_min_hz) * unit(rng);
  const double vib_phase = kTwoPi * unit(rng);
  const double f1 = 450.0 + 300.0 * unit(rng);
  const double f2 = 1100.0 + 900.0 * unit(rng);
  const auto n_harmonics = static_cast<std::size_t>(
      std::floor(kHarmonicCeilingHz / (base_f0 * (1.0 + spec.vibrato_depth))));

  // Alternating voiced / unvoiced segments, starting voiced.
  std::vector<std::pair<std::size_t, std::size_t>> voiced_segments;
  std::vector<bool> voiced(n, false);
  for (std::size_t pos = 0, k = 0; pos < n; ++k) {
    const bool is_voiced = k % 2 == 0;
    const double seconds = is_voiced ? 0.35 + 0.25 * unit(rng) : 0.08 + 0.07 * unit(rng);
    const std::size_t end = std::min(n, pos + static_cast<std::size_t>(seconds * fs));
    if (is_voiced) {
      voiced_segments.emplace_back(pos, end);
      std::fill(voiced.begin() + static_cast<std::ptrdiff_t>(pos),
                voiced.begin() + static_cast<std::ptrdiff_t>(end), true);
    }
    pos = end;
  }

  const auto chunk = std::max<std::size_t>(1, static_cast<std::size_t>(spec.fake_chunk_ms * 1e-3 * fs));
  const std::size_t n_phase_sets = u.label == 1 ? (n + chunk - 1) / chunk : 1;
  std::vector<std::vector<double>> phases(n_phase_sets, std::vector<double>(n_harmonics));
  for (auto& set : phases) {
    for (double& p : set) p = kTwoPi * unit(rng);
  }

  std::vector<double> content(n, 0.0);
  u.f0_hz.assign(n, 0.0);
  double phi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f0 = base_f0 * (1.0 + spec.vibrato_depth * std::sin(kTwoPi * spec.vibrato_hz * t + vib_phase));
    phi += kTwoPi * f0 / fs;
    if (!voiced[i]) continue;
    u.f0_hz[i] = f0;
    const auto& theta = phases[u.label == 1 ? i / chunk : 0];
    double s = 0.0;
    for (std::size_t h = 1; h <= n_harmonics; ++h) {
      const double fh = static_cast<double>(h) * f0;
      s += resonance_gain(fh, f1, f2) / std::sqrt(static_cast<double>(h)) *
           std::sin(static_cast<double>(h) * phi + theta[h - 1]);
    }
    content[i] = s;
  }
  for (const auto& [b, e] : voiced_segments) {
    for (std::size_t k = 0; k < kRampSamples && b + k < e; ++k) {
      const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(k) / kRampSamples);
      content[b + k] *= g;
      if (e - 1 - k > b + k) content[e - 1 - k] *= g;
    }
  }

  double voiced_peak = 0.0;
  for (double v : content) voiced_peak = std::max(voiced_peak, std::abs(v));
  for (std::size_t i = 0; i < n; ++i) {
    if (!voiced[i]) content[i] = kUnvoicedLevel * voiced_peak * gauss(rng);
  }
  double peak = 0.0;
  for (double v : content) peak = std::max(peak, std::abs(v));
  const double tone_amp = kContentPeak * std::pow(10.0, spec.fake_tone_db / 20.0);
  for (std::size_t i = 0; i < n; ++i) {
    content[i] *= kContentPeak / peak;
    if (u.label == 1) {
      content[i] += tone_amp * std::sin(kTwoPi * spec.fake_tone_hz * static_cast<double>(i) / fs);
    }
    content[i] += kFloorNoise * gauss(rng);
  }

  u.samples.assign(spec.leading_silence, 0.0);
  u.samples.insert(u.samples.end(), content.begin(), content.end());
  return u;
}

Manifest generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                   const std::filesystem::path& out_dir) {
  spec.validate();
  const auto audio_dir = out_dir / "audio";
  std::filesystem::create_directories(audio_dir);
  Manifest m;
  for (std::size_t i = 0; i < corpus_size(spec); ++i) {
    const auto u = synthesize_utterance(spec, i);
    ManifestEntry e;
    e.utt_id = u.utt_id;
    e.audio_path = audio_dir / (u.utt_id + ".wav");
    e.label = u.label;
    e.dataset_tag = spec.dataset_tag;
    if (!u.codec_tag.empty()) e.codec_tag = u.codec_tag;
    e.split = u.split;
    write_wav16(e.audio_path, u.samples, kSampleRate);
    e.resolvable = true;
    m.entries.push_back(std::move(e));
  }
  write_manifest(out_dir / "manifest.csv", m);
  return m;
}

}  // namespace voxtrace
