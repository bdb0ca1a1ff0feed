// include/mtcascade/autograd.h

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

#ifndef MTCASCADE_AUTOGRAD_H_
#define MTCASCADE_AUTOGRAD_H_

#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtcascade/common.h"
#include "mtcascade/param-store.h"

namespace mtcascade {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Matrix &value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(const Tape *tape, int32_t id) : tape_(tape), id_(id) {}
  const Tape *tape_ = nullptr;
  int32_t id_ = -1;
};

// Reverse-mode differentiation over row-major matrices. Every op records its
// value and, when recording is on and an input needs a gradient, a closure
// that pushes the output gradient to its inputs. Rows are time steps
// throughout the library.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool recording() const { return record_; }

  Var Constant(Matrix value);
  // Leaf bound to a parameter. `trainable` false treats it as a constant
  // (frozen sub-networks). One node per parameter per tape.
  Var Param(const Parameter &p, bool trainable = true);

  Var MatMul(Var a, Var b);
  // a * b^T
  Var MatMulNT(Var a, Var b);
  Var Add(Var a, Var b);
  // x[N x D] + bias[1 x D] broadcast over rows.
  Var AddBias(Var x, Var bias);
  Var Scale(Var a, Real s);
  Var Mul(Var a, Var b);
  Var Sigmoid(Var x);
  Var Tanh(Var x);
  Var Relu(Var x);
  Var Swish(Var x);
  // Row-wise normalization followed by gamma/beta affine ([1 x D] each).
  Var LayerNorm(Var x, Var gamma, Var beta, Real eps = 1e-5);
  Var Softmax(Var x);
  Var LogSoftmax(Var x);
  Var Transpose(Var x);
  Var SliceCols(Var x, Eigen::Index start, Eigen::Index n);
  Var SliceRows(Var x, Eigen::Index start, Eigen::Index n);
  Var ConcatCols(std::span<const Var> parts);
  // Rows of `table` selected by ids (embedding lookup).
  Var GatherRows(Var table, std::span<const int32_t> ids);
  // Same-padded depthwise 1-D convolution over rows; kernel [K x D], K odd.
  Var DepthwiseConv1d(Var x, Var kernel, Var bias);
  // out[t * U1 + u] = enc[t] + pred[u]; the transducer joint grid.
  Var PairwiseSum(Var enc, Var pred);
  // Single-layer LSTM over rows of x. Gate order in the 4H columns is
  // (input, forget, cell, output). reverse=true runs right to left but keeps
  // outputs at their original row positions.
  Var Lstm(Var x, Var wx, Var wh, Var b, bool reverse);

  // Sets d(objective)/d(var) = seed for each pair and sweeps the tape once.
  void Backward(std::span<const std::pair<Var, Matrix>> seeds);
  void Backward(Var out, Matrix seed);

  // Gradient reaching a node during the last sweep (zeros if none).
  Matrix GradOf(Var v) const;
  // Adds parameter-leaf gradients to the buffer.
  void AccumulateParamGrads(GradientBuffer *buffer) const;

  size_t num_nodes() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    const Parameter *param = nullptr;
    bool needs_grad = false;
  };

  Var Push(Matrix value, bool needs_grad);
  bool NeedsGrad(Var v) const { return nodes_[v.id_].needs_grad; }
  Matrix &Grad(int32_t id);
  const Matrix &Value(int32_t id) const { return nodes_[id].value; }
  void CheckOwned(Var v) const;

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter *, int32_t> param_nodes_;
};

}  // namespace mtcascade

#endif  // MTCASCADE_AUTOGRAD_H_
