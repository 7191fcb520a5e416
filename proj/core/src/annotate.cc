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

#include "voxtrace/annotate.h"

#include <algorithm>
#include <cstdio>

namespace voxtrace {

std::size_t FrameAnnotation::n_voiced() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), true));
}

FrameAnnotation annotate(const FixedWaveform& x, const PitchConfig& pitch,
                         const FormantConfig& formant) {
  FrameAnnotation ann;
  ann.f0_hz = track_pitch(x, pitch);
  for (auto& f0 : ann.f0_hz) {
    if (f0) f0 = std::clamp(*f0, pitch.fmin_hz, pitch.fmax_hz);
  }
  ann.voiced = derive_voicing(ann.f0_hz);
  const auto formants = track_formants(x, formant);
  ann.f1_hz.reserve(formants.size());
  ann.f2_hz.reserve(formants.size());
  for (const auto& f : formants) {
    ann.f1_hz.push_back(f.f1_hz);
    ann.f2_hz.push_back(f.f2_hz);
  }
  return ann;
}

std::string annotator_fingerprint(const PitchConfig& p, const FormantConfig& f) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "pitch:%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%d,%.17g,%.17g;"
                "formant:%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g;"
                "frame:%zu,%zu,%zu",
                p.fmin_hz, p.fmax_hz, p.threshold_max, p.n_thresholds,
                p.absolute_min_prob, p.cents_per_bin, p.jump_cost_per_bin,
                p.max_jump_bins, p.switch_prob, p.silence_energy, f.pre_emphasis,
                f.lpc_order, f.floor_hz, f.ceiling_hz, f.max_bandwidth_hz,
                f.f1_default_hz, f.f2_default_hz, kFrameLength, kHopLength,
                kFixedLength);
  return buf;
}

}  // namespace voxtrace
