// src/optimizer.cc

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

#include "mtcascade/optimizer.h"

#include <cmath>

namespace mtcascade {

void AdamStep(ParamStore *store, double lr, const AdamOptions &opts,
              int64_t step) {
  if (step < 1) throw ConfigError("Adam step count must be >= 1");
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
  const Real b1 = static_cast<Real>(opts.beta1), b2 = static_cast<Real>(opts.beta2);
  for (size_t i = 0; i < store->size(); ++i) {
    Parameter &p = store->at(i);
    if (p.trainable) {
      p.first_moment = b1 * p.first_moment + (Real(1) - b1) * p.grad;
      p.second_moment =
          b2 * p.second_moment + (Real(1) - b2) * p.grad.cwiseProduct(p.grad);
      auto m_hat = p.first_moment.array() / static_cast<Real>(c1);
      auto v_hat = p.second_moment.array() / static_cast<Real>(c2);
      p.value.array() -= static_cast<Real>(lr) * m_hat /
                         (v_hat.sqrt() + static_cast<Real>(opts.epsilon));
    }
    p.grad.setZero();
  }
}

double ClipGradNorm(ParamStore *store, double max_norm) {
  double sq = 0.0;
  for (size_t i = 0; i < store->size(); ++i)
    if (store->at(i).trainable)
      sq += static_cast<double>(store->at(i).grad.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const Real s = static_cast<Real>(max_norm / norm);
    for (size_t i = 0; i < store->size(); ++i) store->at(i).grad *= s;
  }
  return norm;
}

void ScheduleConfig::Validate() const {
  if (warmup_steps < 0 || total_steps < 0 || warmup_steps > total_steps)
    throw ConfigError("schedule requires 0 <= warmup_steps <= total_steps");
  if (floor_lr < 0.0 || floor_lr > peak_lr)
    throw ConfigError("schedule requires 0 <= floor_lr <= peak_lr");
}

double LearningRateAt(int64_t step, const ScheduleConfig &cfg) {
  if (step < 0) step = 0;
  if (step < cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step) /
           static_cast<double>(cfg.warmup_steps);
  if (step >= cfg.total_steps) return cfg.floor_lr;
  const double decay = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double progress = static_cast<double>(step - cfg.warmup_steps) / decay;
  return cfg.floor_lr +
         (cfg.peak_lr - cfg.floor_lr) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace mtcascade
