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

// Frame-level ground truth for the decoder heads: f0 from a probabilistic
// YIN tracker with Viterbi smoothing, F1/F2 from Burg LPC roots, and a
// voicing mask that is true exactly where f0 exists.
//
// Annotation frames use the same 512/256 framing as stft_features, so frame
// t of an annotation lines up with token t of the same FixedWaveform.

#ifndef VOXTRACE_ANNOTATE_H_
#define VOXTRACE_ANNOTATE_H_

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxtrace/dsp.h"

namespace voxtrace {

struct PitchConfig {
  double fmin_hz = 60.0;
  double fmax_hz = 400.0;
  // Thresholds are uniform on (0, threshold_max], discretized into
  // n_thresholds equal-mass steps.
  double threshold_max = 0.35;
  int n_thresholds = 100;
  // Mass given to the global minimum when no trough clears a threshold.
  double absolute_min_prob = 0.01;
  double cents_per_bin = 10.0;
  // Transition cost (negative log-probability) per bin of pitch movement.
  double jump_cost_per_bin = 0.1;
  int max_jump_bins = 25;
  double switch_prob = 0.01;
  // Frames with mean energy below this are treated as digital silence.
  double silence_energy = 1e-12;
};

struct FormantConfig {
  double pre_emphasis = 0.97;
  int lpc_order = 10;
  double floor_hz = 50.0;
  double ceiling_hz = 5500.0;
  double max_bandwidth_hz = 400.0;
  // Fallback values before the first frame with two candidates.
  double f1_default_hz = 525.0;
  double f2_default_hz = 1750.0;
};

using PitchTrack = std::vector<std::optional<double>>;

struct FormantPair {
  double f1_hz = 0.0;
  double f2_hz = 0.0;
};

struct FrameAnnotation {
  std::vector<std::optional<double>> f0_hz;
  std::vector<double> f1_hz;
  std::vector<double> f2_hz;
  std::vector<bool> voiced;

  std::size_t n_frames() const { return voiced.size(); }
  std::size_t n_voiced() const;

  friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

// One candidate period from a YIN difference-function trough.
struct PitchCandidate {
  double f0_hz = 0.0;
  double probability = 0.0;
};

// Cumulative-mean-normalized difference function d'(tau) for tau in
// [0, max_lag], integrating over frame.size() - max_lag - 1 samples.
std::vector<double> yin_cmnd(std::span<const double> frame, std::size_t max_lag);

// Probabilistic candidates for one frame (the observation stage).
std::vector<PitchCandidate> pitch_candidates(std::span<const double> frame,
                                             const PitchConfig& cfg = {});

PitchTrack track_pitch(const FixedWaveform& x, const PitchConfig& cfg = {});

std::vector<bool> derive_voicing(const PitchTrack& f0_track);

// Burg-method LPC. Returns a = [1, a1, ..., ap] such that the prediction
// error is e[n] = sum_k a[k] x[n-k].
std::vector<double> burg_lpc(std::span<const double> x, int order);

// Roots of a[0] z^p + a[1] z^{p-1} + ... + a[p].
std::vector<std::complex<double>> polynomial_roots(std::span<const double> a);

struct Resonance {
  double frequency_hz = 0.0;
  double bandwidth_hz = 0.0;
};

// Qualifying LPC resonances of one frame, ascending in frequency.
std::vector<Resonance> frame_formants(std::span<const double> frame,
                                      const FormantConfig& cfg = {});

std::vector<FormantPair> track_formants(const FixedWaveform& x,
                                        const FormantConfig& cfg = {});

// Full annotation. f0 is clamped to [fmin, fmax].
FrameAnnotation annotate(const FixedWaveform& x, const PitchConfig& pitch = {},
                         const FormantConfig& formant = {});

// Stable textual fingerprint of the annotator parameters, used in cache keys.
std::string annotator_fingerprint(const PitchConfig& pitch,
                                  const FormantConfig& formant);

}  // namespace voxtrace

#endif  // VOXTRACE_ANNOTATE_H_
