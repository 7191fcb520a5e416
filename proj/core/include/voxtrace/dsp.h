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

// Waveform ingestion, preprocessing and the fixed-size STFT front end.
//
// Every utterance goes through the same contract before it reaches the
// network: resample to 16 kHz, trim leading/trailing silence, normalize the
// peak to 1.0, then tile or truncate to exactly 33024 samples. The STFT of
// that signal (512-sample Hann frames, hop 256) yields 128 frames x 256 bins.

#ifndef VOXTRACE_DSP_H_
#define VOXTRACE_DSP_H_

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace voxtrace {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFixedLength = 33024;
inline constexpr std::size_t kFrameLength = 512;
inline constexpr std::size_t kHopLength = 256;
inline constexpr std::size_t kNumFrames = 128;
inline constexpr std::size_t kNumBins = 256;
inline constexpr double kMagnitudeFloor = 1e-10;
inline constexpr double kDefaultSilenceThresholdDb = -40.0;
inline constexpr std::size_t kSilenceBlockLength = 320;  // 20 ms

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
  bool trimmed = false;
  bool normalized = false;
};

// A waveform of exactly kFixedLength samples.
class FixedWaveform {
 public:
  // Throws InvalidAudio unless samples.size() == kFixedLength.
  explicit FixedWaveform(std::vector<double> samples);

  std::span<const double> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::vector<double> samples_;
};

// Dense row-major matrix of doubles. Row t of a feature grid is frame t.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct FeatureGrid {
  Grid log_mag;    // log(|X| + floor), L x M
  Grid sin_phase;  // sin(angle X), L x M
  std::size_t n_frames = kNumFrames;
  std::size_t n_bins = kNumBins;
  std::size_t frame_len_samples = kFrameLength;
  std::size_t hop_samples = kHopLength;
};

// One token per frame: token t is row t (all M bins of frame t).
struct Tokens {
  Grid mag;
  Grid phase;
};

// Resamples to 16 kHz by linear interpolation. Throws InvalidAudio on empty
// input, a non-positive rate or non-finite samples.
Waveform ingest(std::span<const double> raw_samples, double rate);

// Drops leading and trailing 20 ms blocks whose RMS lies below threshold_db
// relative to the signal peak. Throws SilentAudio if nothing is left.
Waveform trim_silence(const Waveform& w,
                      double threshold_db = kDefaultSilenceThresholdDb);

// Scales so that max |sample| == 1. Throws SilentAudio on an all-zero signal.
Waveform normalize_peak(const Waveform& w);

// Tiles a short signal by repetition, or keeps the leading kFixedLength
// samples of a long one.
FixedWaveform fit_length(std::span<const double> samples);

// trim_silence -> normalize_peak -> fit_length.
FixedWaveform preprocess(const Waveform& w,
                         double silence_threshold_db = kDefaultSilenceThresholdDb);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// Hann-windowed 512-point DFT of one frame, first kNumBins bins.
std::vector<std::complex<double>> frame_spectrum(std::span<const double> frame);

FeatureGrid stft_features(const FixedWaveform& x);

Tokens tokenize(const FeatureGrid& g);

// Inverse of tokenize: stacks tokens row-wise back into a grid pair.
FeatureGrid detokenize(const Tokens& t);

// stft_features followed by tokenize.
Tokens waveform_to_tokens(const FixedWaveform& x);

}  // namespace voxtrace

#endif  // VOXTRACE_DSP_H_
