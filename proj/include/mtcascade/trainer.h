// include/mtcascade/trainer.h

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

#ifndef MTCASCADE_TRAINER_H_
#define MTCASCADE_TRAINER_H_

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "mtcascade/frontend.h"
#include "mtcascade/mt-model.h"
#include "mtcascade/optimizer.h"
#include "mtcascade/overlap-sim.h"

namespace mtcascade {

// A featurized utterance with references and frame activity targets.
struct Example {
  std::string id;
  UtteranceKind kind = UtteranceKind::kSingle;
  Matrix features;
  std::vector<TokenSequence> transcripts;
  // T x M, 1 where speaker m is active in the stacked frame.
  Matrix activity;
  double overlap_s = 0.0;
};

Example MakeExample(const OverlapMixture &mix, const std::string &id,
                    const FrontendConfig &frontend, int32_t num_channels);
std::vector<Example> LoadExamples(const DatasetManifest &manifest,
                                  const FrontendConfig &frontend,
                                  int32_t num_channels);
// In-memory corpus, same content BuildDataset would write.
std::vector<Example> SynthesizeExamples(const CorpusConfig &corpus,
                                        int32_t n_single, int32_t n_overlap,
                                        uint64_t seed,
                                        const FrontendConfig &frontend,
                                        int32_t num_channels);

// Per-dimension mean and standard deviation over all frames.
void FeatureStats(const std::vector<Example> &examples, RowVector *mean,
                  RowVector *stddev);

struct TrainConfig {
  int64_t steps = 1000;
  int32_t batch_size = 8;
  ScheduleConfig schedule;
  AdamOptions adam;
  double grad_clip = 5.0;
  uint64_t seed = 1;
  // 0 reads MTCASCADE_THREADS, falling back to 1.
  int32_t threads = 0;
  // Single-talker training skips overlapped items.
  bool single_only_for_st = true;

  void Validate() const;
};

struct StepMetrics {
  int64_t step = 0;
  double loss = 0.0;  // batch mean of L_t
  double lr = 0.0;
  double grad_norm = 0.0;
  int32_t audio_items = 0, mask_items = 0, resampled = 0;
  std::string branch() const;
};

using StepCallback = std::function<void(const StepMetrics &)>;

// Runs Adam over mini-batches. Writes one JSON object per step to
// `metrics` when non-null: {step, L_t, branch, lr, ...}. Item-level
// gradients are reduced in item order, so results do not depend on the
// thread count.
std::vector<StepMetrics> Train(ModelBundle *bundle,
                               const std::vector<Example> &data,
                               const TrainConfig &cfg,
                               std::ostream *metrics = nullptr,
                               const StepCallback &callback = nullptr);

// Mean loss of every example under the bundle's own objective, without
// branch sampling (mask branch for MT wirings).
double MeanLoss(const ModelBundle &bundle, const std::vector<Example> &data);

int32_t ResolveThreads(int32_t requested);

}  // namespace mtcascade

#endif  // MTCASCADE_TRAINER_H_
