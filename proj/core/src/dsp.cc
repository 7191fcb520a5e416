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

#include "voxtrace/dsp.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "voxtrace/errors.h"

namespace voxtrace {

FixedWaveform::FixedWaveform(std::vector<double> samples)
    : samples_(std::move(samples)) {
  if (samples_.size() != kFixedLength) {
    throw InvalidAudio("fixed waveform needs " + std::to_string(kFixedLength) +
                       " samples, got " + std::to_string(samples_.size()));
  }
}

Waveform ingest(std::span<const double> raw_samples, double rate) {
  if (raw_samples.empty()) throw InvalidAudio("empty audio");
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw InvalidAudio("sample rate must be positive");
  }
  for (double s : raw_samples) {
    if (!std::isfinite(s)) throw InvalidAudio("non-finite sample");
  }

  Waveform w;
  w.sample_rate = kSampleRate;
  if (rate == kSampleRate) {
    w.samples.assign(raw_samples.begin(), raw_samples.end());
    return w;
  }

  const double step = rate / kSampleRate;
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(raw_samples.size()) / step + 1e-9));
  if (n_out == 0) throw InvalidAudio("audio too short to resample");
  w.samples.resize(n_out);
  const std::size_t last = raw_samples.size() - 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    if (k >= last) {
      w.samples[i] = raw_samples[last];
    } else {
      w.samples[i] = (1.0 - frac) * raw_samples[k] + frac * raw_samples[k + 1];
    }
  }
  return w;
}

namespace {

double peak_of(std::span<const double> x) {
  double peak = 0.0;
  for (double s : x) peak = std::max(peak, std::abs(s));
  return peak;
}

}  // namespace

Waveform trim_silence(const Waveform& w, double threshold_db) {
  const double peak = peak_of(w.samples);
  if (peak == 0.0) throw SilentAudio("all-zero audio");

  const std::size_t n = w.samples.size();
  const std::size_t n_blocks = (n + kSilenceBlockLength - 1) / kSilenceBlockLength;
  auto loud = [&](std::size_t b) {
    const std::size_t begin = b * kSilenceBlockLength;
    const std::size_t end = std::min(n, begin + kSilenceBlockLength);
    double energy = 0.0;
    for (std::size_t i = begin; i < end; ++i) energy += w.samples[i] * w.samples[i];
    const double rms = std::sqrt(energy / static_cast<double>(end - begin));
    if (rms == 0.0) return false;
    return 20.0 * std::log10(rms / peak) >= threshold_db;
  };

  std::size_t first = 0;
  while (first < n_blocks && !loud(first)) ++first;
  if (first == n_blocks) throw SilentAudio("audio is silent after trimming");
  std::size_t last = n_blocks - 1;
  while (last > first && !loud(last)) --last;

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.normalized = false;
  out.trimmed = true;
  const std::size_t begin = first * kSilenceBlockLength;
  const std::size_t end = std::min(n, (last + 1) * kSilenceBlockLength);
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

Waveform normalize_peak(const Waveform& w) {
  const double peak = peak_of(w.samples);
  if (peak == 0.0) throw SilentAudio("cannot normalize an all-zero signal");
  Waveform out = w;
  for (double& s : out.samples) s /= peak;
  out.normalized = true;
  return out;
}

FixedWaveform fit_length(std::span<const double> samples) {
  if (samples.empty()) throw InvalidAudio("empty audio");
  std::vector<double> out(kFixedLength);
  for (std::size_t i = 0; i < kFixedLength; ++i) out[i] = samples[i % samples.size()];
  return FixedWaveform(std::move(out));
}

FixedWaveform preprocess(const Waveform& w, double silence_threshold_db) {
  if (w.sample_rate != kSampleRate) {
    throw InvalidAudio("preprocess expects 16 kHz audio; call ingest first");
  }
  const Waveform normalized = normalize_peak(trim_silence(w, silence_threshold_db));
  return fit_length(normalized.samples);
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

namespace {

class FrameTransform {
 public:
  FrameTransform() : window_(hann_window(kFrameLength)), buffer_(kFrameLength) {}

  void run(std::span<const double> frame, std::vector<std::complex<double>>& out) {
    for (std::size_t i = 0; i < kFrameLength; ++i) buffer_[i] = frame[i] * window_[i];
    fft_.fwd(spectrum_, buffer_);
    out.assign(spectrum_.begin(), spectrum_.begin() + kNumBins);
  }

 private:
  std::vector<double> window_;
  std::vector<double> buffer_;
  std::vector<std::complex<double>> spectrum_;
  Eigen::FFT<double> fft_;
};

}  // namespace

std::vector<std::complex<double>> frame_spectrum(std::span<const double> frame) {
  if (frame.size() != kFrameLength) {
    throw ShapeError("frame_spectrum expects " + std::to_string(kFrameLength) +
                     " samples, got " + std::to_string(frame.size()));
  }
  FrameTransform t;
  std::vector<std::complex<double>> out;
  t.run(frame, out);
  return out;
}

FeatureGrid stft_features(const FixedWaveform& x) {
  FeatureGrid g;
  g.log_mag = Grid(kNumFrames, kNumBins);
  g.sin_phase = Grid(kNumFrames, kNumBins);

  FrameTransform t;
  std::vector<std::complex<double>> bins;
  const auto samples = x.samples();
  for (std::size_t f = 0; f < kNumFrames; ++f) {
    t.run(samples.subspan(f * kHopLength, kFrameLength), bins);
    for (std::size_t k = 0; k < kNumBins; ++k) {
      const double mag = std::abs(bins[k]);
      g.log_mag.at(f, k) = std::log(mag + kMagnitudeFloor);
      g.sin_phase.at(f, k) = std::sin(std::arg(bins[k]));
    }
  }
  return g;
}

Tokens tokenize(const FeatureGrid& g) {
  if (g.log_mag.rows != g.sin_phase.rows || g.log_mag.cols != g.sin_phase.cols) {
    throw ShapeError("magnitude and phase grids differ in shape");
  }
  return Tokens{g.log_mag, g.sin_phase};
}

FeatureGrid detokenize(const Tokens& t) {
  FeatureGrid g;
  g.log_mag = t.mag;
  g.sin_phase = t.phase;
  g.n_frames = t.mag.rows;
  g.n_bins = t.mag.cols;
  return g;
}

Tokens waveform_to_tokens(const FixedWaveform& x) {
  return tokenize(stft_features(x));
}

}  // namespace voxtrace
