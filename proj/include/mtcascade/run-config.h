// include/mtcascade/run-config.h

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

#ifndef MTCASCADE_RUN_CONFIG_H_
#define MTCASCADE_RUN_CONFIG_H_

#include <string>

#include "json.hpp"
#include "mtcascade/frontend.h"
#include "mtcascade/mt-model.h"
#include "mtcascade/mt-sad.h"
#include "mtcascade/overlap-sim.h"
#include "mtcascade/trainer.h"

namespace mtcascade {

struct RunConfig {
  std::string profile = "toy";
  uint64_t seed = 1;
  std::string data_dir = "data";
  std::string checkpoint_dir = "checkpoints";
  std::string report_dir = "reports";

  FrontendConfig frontend;
  CorpusConfig corpus;
  int32_t n_single = 360;
  int32_t n_overlap = 360;
  WiringDescriptor wiring;
  TrainConfig train;
  ProbeConfig probe;
  double threshold_s = 0.5;

  // Re-derives the encoder input width from the frontend geometry.
  void SyncDerived();
  void Validate() const;
  nlohmann::json ToJson() const;
};

// "toy": the desk-scale dims used by the tests. "full": 17x512 audio,
// 8x512 mask, 2-layer 2048 BiLSTM label encoder, 640 joint, 30K-step warmup.
RunConfig MakeProfile(const std::string &name);

// Overlays a JSON document onto `cfg`. Sections: profile, seed, paths,
// frontend, corpus, model, train, probe. Unknown keys and wrong types throw
// ConfigError.
void ApplyConfigJson(const nlohmann::json &j, RunConfig *cfg);

// Reads the file, resolves its "profile" first, then overlays the rest.
RunConfig LoadRunConfig(const std::string &path, const std::string &profile = "");

}  // namespace mtcascade

#endif  // MTCASCADE_RUN_CONFIG_H_
