// include/mtcascade/checkpoint.h

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

#ifndef MTCASCADE_CHECKPOINT_H_
#define MTCASCADE_CHECKPOINT_H_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mtcascade/param-store.h"

namespace mtcascade {

// Container layout:
//   "MTCK" | u32 version | u64 header_bytes | JSON header | float32 blobs
// The header lists {name, shape, dtype} per tensor in blob order plus a
// free-form "wiring" object. All integers and floats are little-endian.
inline constexpr char kCheckpointMagic[4] = {'M', 'T', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  nlohmann::json wiring;
  std::vector<CheckpointTensor> tensors;
};

void SaveCheckpoint(const ParamStore &store, const nlohmann::json &wiring,
                    const std::string &path);
Checkpoint ReadCheckpoint(const std::string &path);

// Copies tensors whose names start with `prefix` into the store. With
// strict=true every selected tensor must exist in the store with a matching
// shape; with strict=false unknown names are skipped (shape mismatches
// still fail). Returns the number of tensors copied.
size_t LoadTensors(const Checkpoint &ckpt, ParamStore *store,
                   std::string_view prefix = "", bool strict = true);

}  // namespace mtcascade

#endif  // MTCASCADE_CHECKPOINT_H_
