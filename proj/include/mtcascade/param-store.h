// include/mtcascade/param-store.h

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

#ifndef MTCASCADE_PARAM_STORE_H_
#define MTCASCADE_PARAM_STORE_H_

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtcascade/common.h"

namespace mtcascade {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  // Adam moment slots, same shape as value.
  Matrix first_moment;
  Matrix second_moment;
  // Non-trainable parameters (e.g. feature normalization statistics) are
  // saved in checkpoints but never updated by the optimizer.
  bool trainable = true;
  int32_t index = -1;
};

// Named parameter container. Insertion order is the canonical order used for
// checkpoint blobs, gradient buffers and optimizer sweeps.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore &other);
  ParamStore &operator=(const ParamStore &other);
  ParamStore(ParamStore &&) = default;
  ParamStore &operator=(ParamStore &&) = default;

  Parameter &Add(const std::string &name, Matrix init, bool trainable = true);

  Parameter *Find(std::string_view name);
  const Parameter *Find(std::string_view name) const;
  Parameter &Get(std::string_view name);
  const Parameter &Get(std::string_view name) const;

  Parameter &at(size_t i) { return *params_[i]; }
  const Parameter &at(size_t i) const { return *params_[i]; }
  size_t size() const { return params_.size(); }

  void ZeroGrad();
  size_t NumValues() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Per-item gradient accumulator, aligned with a ParamStore by index. Used so
// batch items can be differentiated independently and reduced in order.
class GradientBuffer {
 public:
  explicit GradientBuffer(const ParamStore &store);
  // True when p belongs to the store this buffer was built for.
  bool Owns(const Parameter &p) const;
  Matrix &For(const Parameter &p);
  bool Has(size_t i) const { return grads_[i].size() > 0; }
  const Matrix &at(size_t i) const { return grads_[i]; }
  size_t size() const { return grads_.size(); }
  void Clear();
  // store.grad += this, for every populated slot.
  void AddTo(ParamStore *store) const;

 private:
  const ParamStore *store_;
  std::vector<Eigen::Index> rows_, cols_;
  std::vector<Matrix> grads_;
};

}  // namespace mtcascade

#endif  // MTCASCADE_PARAM_STORE_H_
