// include/mtcascade/mt-sad.h

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

#ifndef MTCASCADE_MT_SAD_H_
#define MTCASCADE_MT_SAD_H_

#include <ostream>
#include <string>
#include <vector>

#include "mtcascade/mt-model.h"
#include "mtcascade/trainer.h"

namespace mtcascade {

// Linear probe over mask-encoder activations: p = sigmoid(a w + b).
struct ProbeModel {
  Matrix weights;  // D_act x 1
  Real bias = 0;
  // 0-based mask-encoder block index.
  int32_t insertion_layer = 0;
  double theta = 0.5;

  int32_t dim() const { return static_cast<int32_t>(weights.rows()); }
  void Validate() const;
};

struct ProbeConfig {
  // Negative counts from the end: -1 is the final mask-encoder block.
  int32_t insertion_layer = -1;
  double theta = 0.5;
  int64_t max_steps = 400;
  double learning_rate = 0.02;
  // Stop when the loss improves by less than this over `patience` steps.
  double plateau_tol = 1e-5;
  int32_t patience = 25;
  uint64_t seed = 7;

  void Validate() const;
};

struct ActivityTrack {
  RowVector probs;
  double frame_rate = 0.0;
  int32_t size() const { return static_cast<int32_t>(probs.size()); }
};

enum class OverlapDecision { kSingle, kOverlapped };
const char *DecisionName(OverlapDecision d);

struct OverlapEstimate {
  double overlap_s = 0.0;
  int32_t co_active_frames = 0;
  OverlapDecision decision = OverlapDecision::kSingle;
  double threshold_s = 0.5;
};

// Resolves a possibly negative layer index against the bundle's mask depth.
int32_t ResolveInsertionLayer(const ModelBundle &bundle, int32_t layer);

// Activations at `layer` for channel-select m, one T x D matrix.
Matrix MaskActivations(const ModelBundle &bundle, const Matrix &features,
                       const ChannelId &m, int32_t layer);

struct ProbeTrainStats {
  int64_t steps = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

// Binary cross-entropy on cached activations. acts[i] has T_i rows and
// labels[i] holds T_i targets in {0, 1}.
ProbeModel TrainProbeOnActivations(const std::vector<Matrix> &acts,
                                   const std::vector<RowVector> &labels,
                                   const ProbeConfig &cfg, int32_t layer,
                                   ProbeTrainStats *stats = nullptr);

// Caches mask-encoder activations for every (example, m) once, then trains
// the probe; the bundle is read-only.
ProbeModel TrainProbe(const ModelBundle &bundle,
                      const std::vector<Example> &examples,
                      const ProbeConfig &cfg, ProbeTrainStats *stats = nullptr);

ActivityTrack ApplyProbe(const ProbeModel &probe, const Matrix &activations,
                         double frame_rate);
ActivityTrack InferActivity(const ModelBundle &bundle, const ProbeModel &probe,
                            const Matrix &features, const ChannelId &m,
                            double frame_rate);

OverlapEstimate EstimateOverlap(const ActivityTrack &track_1,
                                const ActivityTrack &track_2, double theta,
                                double threshold_s = 0.5);

// Fraction of frames where (p > theta) matches the label.
double FrameAccuracy(const ActivityTrack &track, const RowVector &labels,
                     double theta);

struct ConditionedResult {
  OverlapDecision mode = OverlapDecision::kSingle;
  std::vector<TokenSequence> outputs;
  OverlapEstimate estimate;
  std::vector<ActivityTrack> tracks;
  // Wall time split between probe inference and decoding.
  double probe_seconds = 0.0, decode_seconds = 0.0;
  DecodeStats decode_stats;
};

// Probe both channels, then decode_mt when overlapped, else decode_st.
ConditionedResult ConditionedDecode(const Matrix &features,
                                    const ModelBundle &bundle,
                                    const ProbeModel &probe, double frame_rate,
                                    double threshold_s = 0.5);

void SaveProbe(const ProbeModel &probe, const std::string &path);
ProbeModel LoadProbe(const std::string &path);

// Rows: utt_id,m,t,prob
void WriteActivityCsvHeader(std::ostream &os);
void WriteActivityCsv(std::ostream &os, const std::string &utt_id, int32_t m,
                      const ActivityTrack &track);

}  // namespace mtcascade

#endif  // MTCASCADE_MT_SAD_H_
