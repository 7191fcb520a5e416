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

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "oracles/oracles.h"
#include "oracles/signals.h"
#include "voxtrace/dsp.h"
#include "voxtrace/errors.h"
#include "voxtrace/wav.h"

namespace voxtrace {
namespace {

TEST(Ingest, NativeRateIsIdentity) {
  const auto x = oracle::sine(300.0, 16000);
  const Waveform w = ingest(x, 16000.0);
  EXPECT_EQ(w.sample_rate, 16000);
  EXPECT_EQ(w.samples, x);
  EXPECT_FALSE(w.trimmed);
  EXPECT_FALSE(w.normalized);
}

TEST(Ingest, HalvesLengthFrom32k) {
  const Waveform w = ingest(std::vector<double>(32000, 0.1), 32000.0);
  EXPECT_EQ(w.samples.size(), 16000u);
  EXPECT_EQ(w.sample_rate, 16000);
}

TEST(Ingest, ResampledSineKeepsItsFrequency) {
  const auto x = oracle::sine(440.0, 48000, 0.5, 0.0, 48000.0);
  const Waveform w = ingest(x, 48000.0);
  ASSERT_EQ(w.samples.size(), 16000u);
  // Peak of a 16000-point DFT has 1 Hz resolution.
  double best = 0.0;
  std::size_t best_k = 0;
  for (std::size_t k = 400; k <= 480; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      acc += w.samples[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / 16000.0);
    }
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_k = k;
    }
  }
  EXPECT_NEAR(static_cast<double>(best_k), 440.0, 2.0);
}

TEST(Ingest, RejectsBadInput) {
  EXPECT_THROW(ingest(std::vector<double>{}, 16000.0), InvalidAudio);
  EXPECT_THROW(ingest(std::vector<double>{0.1, 0.2}, 0.0), InvalidAudio);
  EXPECT_THROW(ingest(std::vector<double>{0.1, std::numeric_limits<double>::quiet_NaN()}, 16000.0),
               InvalidAudio);
}

TEST(Preprocess, TilesShortSignal) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> s(16000);
  for (auto& v : s) v = u(rng);
  s[123] = 1.0;  // already peak-normalized
  const FixedWaveform out = preprocess(ingest(s, 16000.0));
  ASSERT_EQ(out.size(), kFixedLength);
  for (std::size_t i = 0; i < kFixedLength; ++i) ASSERT_EQ(out[i], s[i % 16000]) << i;
}

TEST(Preprocess, NormalizesPeak) {
  const auto x = oracle::sine(250.0, 40000, 0.25);
  const FixedWaveform out = preprocess(ingest(x, 16000.0));
  double peak = 0.0;
  for (double v : out.samples()) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 1.0, 1e-12);
  // 250 Hz at 16 kHz samples the crest exactly, so the gain is exactly 4.
  for (std::size_t i = 0; i < kFixedLength; ++i) ASSERT_NEAR(out[i], 4.0 * x[i], 1e-12);
}

TEST(Preprocess, TruncatesLongSignal) {
  std::vector<double> s(50000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(0.01 * static_cast<double>(i)) * 0.5 + 0.5 * (i == 7);
  const FixedWaveform out = preprocess(ingest(s, 16000.0));
  double peak = 0.0;
  for (double v : s) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < kFixedLength; ++i) ASSERT_DOUBLE_EQ(out[i], s[i] / peak);
}

TEST(Preprocess, TrimsLeadingAndTrailingSilence) {
  std::vector<double> s(3200, 0.0);
  const auto tone = oracle::sine(200.0, 8000);
  s.insert(s.end(), tone.begin(), tone.end());
  s.insert(s.end(), 3200, 0.0);
  const Waveform trimmed = trim_silence(ingest(s, 16000.0));
  EXPECT_TRUE(trimmed.trimmed);
  EXPECT_EQ(trimmed.samples.size(), 8000u);
  EXPECT_EQ(trimmed.samples, tone);
}

TEST(Preprocess, TilingInvariant) {
  const auto tone = oracle::sine(170.0, 9600, 1.0);
  const FixedWaveform out = fit_length(tone);
  for (std::size_t i = 0; i + tone.size() < kFixedLength; ++i) {
    ASSERT_EQ(out[i], out[i + tone.size()]);
  }
}

TEST(Preprocess, SilentAudioIsRejected) {
  EXPECT_THROW(preprocess(ingest(std::vector<double>(20000, 0.0), 16000.0)), SilentAudio);
  EXPECT_THROW(normalize_peak(Waveform{std::vector<double>(10, 0.0)}), SilentAudio);
}

TEST(FixedWaveform, RequiresExactLength) {
  EXPECT_THROW(FixedWaveform(std::vector<double>(100)), InvalidAudio);
  EXPECT_NO_THROW(FixedWaveform(std::vector<double>(kFixedLength)));
}

TEST(Stft, ShapeAndFraming) {
  const FeatureGrid g = stft_features(fit_length(oracle::sine(440.0, kFixedLength)));
  EXPECT_EQ(g.log_mag.rows, 128u);
  EXPECT_EQ(g.log_mag.cols, 256u);
  EXPECT_EQ(g.sin_phase.rows, 128u);
  EXPECT_EQ(g.sin_phase.cols, 256u);
  EXPECT_EQ(g.frame_len_samples, 512u);
  EXPECT_EQ(g.hop_samples, 256u);
  EXPECT_EQ((kFixedLength - 512) / 256 + 1, kNumFrames);
}

TEST(Stft, MatchesNaiveDft) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<double> x(kFixedLength);
  for (auto& v : x) v = n(rng);
  const FixedWaveform w(x);
  const FeatureGrid g = stft_features(w);
  for (std::size_t t : {0u, 1u, 63u, 127u}) {
    const auto ref = oracle::windowed_dft(std::span<const double>(x).subspan(t * 256, 512), 256);
    for (std::size_t k = 0; k < 256; ++k) {
      const double mag = std::abs(ref[k]);
      const double lm = std::log(mag + 1e-10);
      ASSERT_NEAR(g.log_mag.at(t, k), lm, 1e-6 * std::max(1.0, std::abs(lm))) << t << "," << k;
      const double sp = std::sin(std::arg(ref[k]));
      ASSERT_NEAR(g.sin_phase.at(t, k), sp, 1e-6) << t << "," << k;
    }
  }
}

TEST(Stft, FrameSpectrumMatchesNaiveDftRelative) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> frame(512);
    for (auto& v : frame) v = u(rng);
    const auto fast = frame_spectrum(frame);
    const auto ref = oracle::windowed_dft(frame, 256);
    ASSERT_EQ(fast.size(), 256u);
    for (std::size_t k = 0; k < 256; ++k) {
      ASSERT_LE(std::abs(fast[k] - ref[k]), 1e-6 * std::max(1e-3, std::abs(ref[k])));
    }
  }
}

TEST(Stft, ZeroFrameGivesFloor) {
  std::vector<double> x(kFixedLength, 0.0);
  for (std::size_t i = 0; i < 4000; ++i) x[i] = std::sin(0.05 * i);
  const FeatureGrid g = stft_features(FixedWaveform(x));
  for (std::size_t k = 0; k < 256; ++k) {
    EXPECT_EQ(g.log_mag.at(127, k), std::log(1e-10));
    EXPECT_EQ(g.sin_phase.at(127, k), 0.0);
  }
}

TEST(Stft, CosineAt1kHzPeaksAtBin32) {
  std::vector<double> x(kFixedLength);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(2.0 * std::numbers::pi * 1000.0 * i / 16000.0);
  const FeatureGrid g = stft_features(FixedWaveform(x));
  for (std::size_t t = 0; t < g.n_frames; ++t) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < 256; ++k) {
      if (g.log_mag.at(t, k) > g.log_mag.at(t, arg)) arg = k;
    }
    ASSERT_EQ(arg, 32u) << "frame " << t;
  }
}

TEST(Stft, PhaseBoundedAndMagnitudeFinite) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(kFixedLength);
    for (auto& v : x) v = trial == 0 ? 0.0 : u(rng) * std::pow(10.0, -trial);
    const FeatureGrid g = stft_features(FixedWaveform(x));
    for (double v : g.sin_phase.data) ASSERT_TRUE(v >= -1.0 && v <= 1.0);
    for (double v : g.log_mag.data) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Tokenize, TokensAreFrames) {
  FeatureGrid g;
  g.log_mag = Grid(128, 256, 0.0);
  g.sin_phase = Grid(128, 256, 0.0);
  g.log_mag.at(17, 40) = 5.0;
  const Tokens t = tokenize(g);
  EXPECT_EQ(t.mag.rows, 128u);
  EXPECT_EQ(t.mag.cols, 256u);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < 128; ++r) {
    for (std::size_t c = 0; c < 256; ++c) {
      if (t.mag.at(r, c) == 5.0) {
        ++hits;
        EXPECT_EQ(r, 17u);
        EXPECT_EQ(c, 40u);
      }
    }
  }
  EXPECT_EQ(hits, 1u);
}

TEST(Tokenize, RoundTrip) {
  const FeatureGrid g = stft_features(fit_length(oracle::sawtooth(130.0, 20000)));
  const FeatureGrid back = detokenize(tokenize(g));
  EXPECT_EQ(back.log_mag, g.log_mag);
  EXPECT_EQ(back.sin_phase, g.sin_phase);
}

TEST(Wav, Pcm16RoundTrip) {
  const auto x = oracle::sine(300.0, 1000, 0.7);
  const auto bytes = encode_wav16(x, 22050);
  const WavData d = parse_wav(bytes);
  EXPECT_EQ(d.sample_rate, 22050);
  EXPECT_EQ(d.channels, 1);
  ASSERT_EQ(d.samples.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(d.samples[i], x[i], 1.0 / 32767.0);
}

TEST(Wav, RejectsGarbage) {
  const std::vector<std::uint8_t> junk{'R', 'I', 'F', 'F', 0, 0};
  EXPECT_THROW(parse_wav(junk), InvalidAudio);
}

}  // namespace
}  // namespace voxtrace
