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
#include <limits>
#include <utility>

#include "voxtrace/annotate.h"

namespace voxtrace {
namespace {

constexpr double kTinyProb = 1e-10;

double parabolic_lag(std::span<const double> d, std::size_t tau) {
  if (tau == 0 || tau + 1 >= d.size()) return static_cast<double>(tau);
  const double a = d[tau - 1];
  const double b = d[tau];
  const double c = d[tau + 1];
  const double denom = a - 2.0 * b + c;
  if (denom <= 0.0) return static_cast<double>(tau);
  const double shift = 0.5 * (a - c) / denom;
  return static_cast<double>(tau) + std::clamp(shift, -1.0, 1.0);
}

std::size_t min_lag(const PitchConfig& cfg) {
  return static_cast<std::size_t>(std::floor(kSampleRate / cfg.fmax_hz));
}

std::size_t max_lag(const PitchConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(kSampleRate / cfg.fmin_hz));
}

// Discrete log-frequency grid shared by the emission and transition models.
class PitchGrid {
 public:
  explicit PitchGrid(const PitchConfig& cfg)
      : fmin_(cfg.fmin_hz), cents_(cfg.cents_per_bin) {
    size_ = static_cast<std::size_t>(
                std::floor(1200.0 * std::log2(cfg.fmax_hz / cfg.fmin_hz) / cents_)) +
            1;
  }

  std::size_t size() const { return size_; }

  std::size_t bin_of(double f0) const {
    const double pos = 1200.0 * std::log2(f0 / fmin_) / cents_;
    const auto rounded = static_cast<long>(std::lround(pos));
    return static_cast<std::size_t>(
        std::clamp<long>(rounded, 0, static_cast<long>(size_) - 1));
  }

  double frequency(std::size_t bin) const {
    return fmin_ * std::exp2(static_cast<double>(bin) * cents_ / 1200.0);
  }

 private:
  double fmin_;
  double cents_;
  std::size_t size_ = 0;
};

}  // namespace

std::vector<double> yin_cmnd(std::span<const double> frame, std::size_t lag_limit) {
  if (lag_limit + 1 >= frame.size()) return {};
  const std::size_t width = frame.size() - lag_limit;
  std::vector<double> d(lag_limit + 1, 0.0);
  for (std::size_t tau = 1; tau <= lag_limit; ++tau) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double diff = frame[j] - frame[j + tau];
      acc += diff * diff;
    }
    d[tau] = acc;
  }
  std::vector<double> cmnd(lag_limit + 1, 1.0);
  double running = 0.0;
  for (std::size_t tau = 1; tau <= lag_limit; ++tau) {
    running += d[tau];
    cmnd[tau] = running > 0.0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
  }
  return cmnd;
}

std::vector<PitchCandidate> pitch_candidates(std::span<const double> frame,
                                             const PitchConfig& cfg) {
  double energy = 0.0;
  for (double s : frame) energy += s * s;
  if (frame.empty() || energy / static_cast<double>(frame.size()) < cfg.silence_energy) {
    return {};
  }

  const std::size_t lo = min_lag(cfg);
  const std::size_t hi = max_lag(cfg);
  const auto cmnd = yin_cmnd(frame, hi + 1);
  if (cmnd.empty()) return {};

  std::vector<std::size_t> troughs;
  for (std::size_t tau = std::max<std::size_t>(lo, 1); tau <= hi; ++tau) {
    if (cmnd[tau] < cmnd[tau - 1] && cmnd[tau] <= cmnd[tau + 1]) troughs.push_back(tau);
  }
  if (troughs.empty()) return {};

  std::size_t global = troughs.front();
  for (std::size_t tau : troughs) {
    if (cmnd[tau] < cmnd[global]) global = tau;
  }

  std::vector<double> mass(troughs.size(), 0.0);
  const double step = 1.0 / cfg.n_thresholds;
  for (int k = 0; k < cfg.n_thresholds; ++k) {
    const double threshold = cfg.threshold_max * (k + 1) / cfg.n_thresholds;
    bool cleared = false;
    for (std::size_t i = 0; i < troughs.size(); ++i) {
      if (cmnd[troughs[i]] < threshold) {
        mass[i] += step;
        cleared = true;
        break;
      }
    }
    if (!cleared) {
      const auto it = std::find(troughs.begin(), troughs.end(), global);
      mass[static_cast<std::size_t>(it - troughs.begin())] += step * cfg.absolute_min_prob;
    }
  }

  std::vector<PitchCandidate> out;
  for (std::size_t i = 0; i < troughs.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    const double lag = parabolic_lag(cmnd, troughs[i]);
    const double f0 = std::clamp(kSampleRate / lag, cfg.fmin_hz, cfg.fmax_hz);
    out.push_back({f0, mass[i]});
  }
  return out;
}

PitchTrack track_pitch(const FixedWaveform& x, const PitchConfig& cfg) {
  const PitchGrid grid(cfg);
  const std::size_t n_bins = grid.size();
  const std::size_t unvoiced = n_bins;
  const std::size_t n_states = n_bins + 1;
  const auto jump = static_cast<std::size_t>(cfg.max_jump_bins);

  std::vector<std::vector<PitchCandidate>> candidates(kNumFrames);
  const auto samples = x.samples();
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    candidates[t] = pitch_candidates(samples.subspan(t * kHopLength, kFrameLength), cfg);
  }

  // Log transition weights for a voiced jump of d bins, normalized per source
  // bin over the reachable neighbourhood.
  std::vector<double> log_norm(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    double z = 0.0;
    const std::size_t j0 = i >= jump ? i - jump : 0;
    const std::size_t j1 = std::min(n_bins - 1, i + jump);
    for (std::size_t j = j0; j <= j1; ++j) {
      z += std::exp(-cfg.jump_cost_per_bin *
                    static_cast<double>(i > j ? i - j : j - i));
    }
    log_norm[i] = std::log(z);
  }
  const double log_stay = std::log(1.0 - cfg.switch_prob);
  const double log_switch = std::log(cfg.switch_prob);
  const double log_enter = std::log(cfg.switch_prob / static_cast<double>(n_bins));

  auto emissions = [&](std::size_t t) {
    std::vector<double> obs(n_states, 0.0);
    double voiced_mass = 0.0;
    for (const auto& c : candidates[t]) {
      obs[grid.bin_of(c.f0_hz)] += c.probability;
      voiced_mass += c.probability;
    }
    obs[unvoiced] = std::max(1.0 - voiced_mass, 0.0);
    for (double& o : obs) o = std::log(o + kTinyProb);
    return obs;
  };

  std::vector<double> score(n_states);
  {
    const auto obs = emissions(0);
    for (std::size_t s = 0; s < n_bins; ++s) {
      score[s] = std::log(0.5 / static_cast<double>(n_bins)) + obs[s];
    }
    score[unvoiced] = std::log(0.5) + obs[unvoiced];
  }

  std::vector<std::vector<std::uint32_t>> back(kNumFrames,
                                               std::vector<std::uint32_t>(n_states, 0));
  std::vector<double> next(n_states);
  for (std::size_t t = 1; t < kNumFrames; ++t) {
    const auto obs = emissions(t);
    for (std::size_t j = 0; j < n_bins; ++j) {
      double best = score[unvoiced] + log_enter;
      auto arg = static_cast<std::uint32_t>(unvoiced);
      const std::size_t i0 = j >= jump ? j - jump : 0;
      const std::size_t i1 = std::min(n_bins - 1, j + jump);
      for (std::size_t i = i0; i <= i1; ++i) {
        const double dist = static_cast<double>(i > j ? i - j : j - i);
        const double cand =
            score[i] + log_stay - cfg.jump_cost_per_bin * dist - log_norm[i];
        if (cand > best) {
          best = cand;
          arg = static_cast<std::uint32_t>(i);
        }
      }
      next[j] = best + obs[j];
      back[t][j] = arg;
    }
    double best = score[unvoiced] + log_stay;
    auto arg = static_cast<std::uint32_t>(unvoiced);
    for (std::size_t i = 0; i < n_bins; ++i) {
      const double cand = score[i] + log_switch;
      if (cand > best) {
        best = cand;
        arg = static_cast<std::uint32_t>(i);
      }
    }
    next[unvoiced] = best + obs[unvoiced];
    back[t][unvoiced] = arg;
    std::swap(score, next);
  }

  std::vector<std::size_t> path(kNumFrames);
  path.back() = static_cast<std::size_t>(
      std::max_element(score.begin(), score.end()) - score.begin());
  for (std::size_t t = kNumFrames - 1; t > 0; --t) path[t - 1] = back[t][path[t]];

  PitchTrack track(kNumFrames);
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    if (path[t] == unvoiced) continue;
    const std::size_t bin = path[t];
    double f0 = grid.frequency(bin);
    std::size_t best_dist = std::numeric_limits<std::size_t>::max();
    for (const auto& c : candidates[t]) {
      const std::size_t b = grid.bin_of(c.f0_hz);
      const std::size_t dist = b > bin ? b - bin : bin - b;
      if (dist <= 1 && dist < best_dist) {
        best_dist = dist;
        f0 = c.f0_hz;
      }
    }
    track[t] = std::clamp(f0, cfg.fmin_hz, cfg.fmax_hz);
  }
  return track;
}

std::vector<bool> derive_voicing(const PitchTrack& f0_track) {
  std::vector<bool> mask(f0_track.size());
  for (std::size_t t = 0; t < f0_track.size(); ++t) mask[t] = f0_track[t].has_value();
  return mask;
}

}  // namespace voxtrace
