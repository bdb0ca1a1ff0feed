// include/mtcascade/overlap-sim.h

// Copyright 2026  mtcascade authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MTCASCADE_OVERLAP_SIM_H_
#define MTCASCADE_OVERLAP_SIM_H_

#include <string>
#include <vector>

#include "mtcascade/common.h"
#include "mtcascade/frontend.h"

namespace mtcascade {

// Half-open time interval in seconds.
struct Span {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end > start ? end - start : 0.0; }
  bool Contains(double t) const { return start <= t && t < end; }
  bool operator==(const Span &) const = default;
};

Span Intersect(const Span &a, const Span &b);

struct SourceUtterance {
  Waveform wave;
  TokenSequence tokens;
};

struct OverlapMixture {
  Waveform mixed;
  TokenSequence transcript_1, transcript_2;
  Span span_1, span_2;
  Span overlap;

  bool overlapped() const { return !transcript_2.empty() || span_2.length() > 0; }
};

// Places `a` at time 0 and `b` at offset dur_a - target so the two spans
// intersect for target_overlap_s (to the nearest sample), then sums. b is
// scaled by gain_b; no normalization or clipping is applied.
OverlapMixture MixOverlap(const SourceUtterance &a, const SourceUtterance &b,
                          double target_overlap_s, double gain_b = 1.0);

// A single-speaker "mixture": span_2 and overlap are empty.
OverlapMixture SingleSpeakerMixture(const SourceUtterance &a);

struct FrameActivityLabels {
  // T x M, entries 0/1.
  Matrix labels;
  double frame_rate = 0.0;
};

// labels(t, m) = 1 iff start_m <= (t + 0.5) / frame_rate < end_m.
FrameActivityLabels DeriveFrameLabels(const OverlapMixture &mix,
                                      double frame_rate, int32_t num_frames,
                                      int32_t num_channels = 2);
// Frame count taken from the frontend geometry of the mixed waveform.
FrameActivityLabels DeriveFrameLabels(const OverlapMixture &mix,
                                      const FrontendConfig &frontend,
                                      int32_t num_channels = 2);

enum class UtteranceKind { kSingle, kOverlapped };

const char *KindName(UtteranceKind kind);
UtteranceKind ParseKind(const std::string &s);

struct ManifestEntry {
  std::string id;
  // Relative to the manifest's directory.
  std::string audio;
  UtteranceKind kind = UtteranceKind::kSingle;
  std::vector<TokenSequence> transcripts;
  std::vector<Span> spans;
  Span overlap;
  uint64_t seed = 0;
};

struct DatasetManifest {
  std::string split;
  uint64_t seed = 0;
  // Affine map from the [overlap_min_s, overlap_max_s] draw onto toy
  // durations; 1.0 means unscaled.
  double overlap_scale = 1.0;
  // Directory the relative audio paths resolve against.
  std::string base_dir;
  std::vector<ManifestEntry> entries;

  std::string AudioPath(const ManifestEntry &e) const;
};

struct CorpusConfig {
  ToneCorpusConfig tones;
  int32_t min_tokens = 4;
  int32_t max_tokens = 12;
  // Overlap draw, uniform in seconds.
  double overlap_min_s = 0.5;
  double overlap_max_s = 4.0;
  // Longest overlap the toy utterances can host. Draws are mapped onto
  // [overlap_min_s, toy_max_overlap_s], keeping the lower edge fixed.
  double toy_max_overlap_s = 2.4;
  double gain_b = 1.0;

  double OverlapScale() const;
  double MapOverlap(double full_range_draw) const;
  void Validate() const;
};

// Generates n_single + n_overlap entries deterministically from `seed`,
// writing WAVs to <out_dir>/audio/<content-hash>.wav and the manifest to
// <out_dir>/<split>.jsonl. Returns the manifest.
DatasetManifest BuildDataset(const CorpusConfig &cfg, int32_t n_single,
                             int32_t n_overlap, uint64_t seed,
                             const std::string &out_dir,
                             const std::string &split);

// In-memory variant: the mixtures themselves, in manifest order.
std::vector<OverlapMixture> GenerateMixtures(const CorpusConfig &cfg,
                                             int32_t n_single,
                                             int32_t n_overlap, uint64_t seed,
                                             std::vector<ManifestEntry> *entries);

void WriteManifest(const DatasetManifest &manifest, const std::string &path);
DatasetManifest ReadManifest(const std::string &path);

OverlapMixture LoadMixture(const DatasetManifest &manifest,
                           const ManifestEntry &entry);

// FNV-1a 64-bit, hex.
std::string ContentHash(const std::string &bytes);

}  // namespace mtcascade

#endif  // MTCASCADE_OVERLAP_SIM_H_
