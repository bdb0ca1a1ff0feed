// include/mtcascade/optimizer.h

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

#ifndef MTCASCADE_OPTIMIZER_H_
#define MTCASCADE_OPTIMIZER_H_

#include <cstdint>

#include "mtcascade/param-store.h"

namespace mtcascade {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
};

// Bias-corrected Adam update of every trainable parameter using its .grad,
// then zeroes all gradients. `step` is 1-based.
void AdamStep(ParamStore *store, double lr, const AdamOptions &opts,
              int64_t step);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double ClipGradNorm(ParamStore *store, double max_norm);

struct ScheduleConfig {
  int64_t warmup_steps = 30000;
  double peak_lr = 5e-4;
  int64_t total_steps = 300000;
  double floor_lr = 0.0;

  void Validate() const;
};

// Linear warmup 0 -> peak, cosine decay peak -> floor, floor afterwards.
double LearningRateAt(int64_t step, const ScheduleConfig &cfg);

}  // namespace mtcascade

#endif  // MTCASCADE_OPTIMIZER_H_
