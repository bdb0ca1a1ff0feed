// include/mtcascade/layers.h

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

#ifndef MTCASCADE_LAYERS_H_
#define MTCASCADE_LAYERS_H_

#include <span>
#include <string>
#include <vector>

#include "mtcascade/autograd.h"
#include "mtcascade/param-store.h"

namespace mtcascade {

// Binds a tape to a parameter store for one forward pass. Layers hold
// parameter indices, not pointers, so a model stays valid when copied.
struct GraphContext {
  Tape *tape;
  const ParamStore *store;
  bool trainable = true;

  Var P(size_t index) const {
    const Parameter &p = store->at(index);
    return tape->Param(p, trainable && p.trainable);
  }
};

// Uniform(-limit, limit) with limit = sqrt(6 / fan_in).
Matrix HeUniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                 Rng *rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore *store, const std::string &prefix, int32_t in_dim,
         int32_t out_dim, Rng *rng, bool bias = true);
  Var Forward(const GraphContext &ctx, Var x) const;
  int32_t in_dim() const { return in_dim_; }
  int32_t out_dim() const { return out_dim_; }
  size_t weight_index() const { return weight_; }
  bool has_bias() const { return has_bias_; }
  size_t bias_index() const { return bias_; }
  // x W + b on plain matrices, no tape.
  Matrix Apply(const ParamStore &store, const Matrix &x) const;

 private:
  size_t weight_ = 0, bias_ = 0;
  bool has_bias_ = false;
  int32_t in_dim_ = 0, out_dim_ = 0;
};

class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParamStore *store, const std::string &prefix, int32_t dim);
  Var Forward(const GraphContext &ctx, Var x) const;

 private:
  size_t gamma_ = 0, beta_ = 0;
};

struct ConformerConfig {
  int32_t dim = 32;
  int32_t num_heads = 2;
  int32_t ff_mult = 4;
  int32_t conv_kernel = 7;
};

// Macaron conformer block: x + FF/2, + MHSA, + conv module, + FF/2, then a
// final layer norm. Attention is unmasked (full context). The conv module's
// batch norm is replaced by layer norm so single-utterance batches behave
// the same in training and inference.
class ConformerBlock {
 public:
  ConformerBlock() = default;
  ConformerBlock(ParamStore *store, const std::string &prefix,
                 const ConformerConfig &cfg, Rng *rng);
  Var Forward(const GraphContext &ctx, Var x) const;

 private:
  Var FeedForward(const GraphContext &ctx, Var x, int which) const;
  Var SelfAttention(const GraphContext &ctx, Var x) const;
  Var ConvModule(const GraphContext &ctx, Var x) const;

  ConformerConfig cfg_;
  LayerNormLayer ff_norm_[2];
  Linear ff_in_[2], ff_out_[2];
  LayerNormLayer att_norm_;
  Linear query_, key_, value_, att_out_;
  LayerNormLayer conv_norm_;
  Linear pointwise_in_;
  size_t depthwise_kernel_ = 0, depthwise_bias_ = 0;
  LayerNormLayer conv_inner_norm_;
  Linear pointwise_out_;
  LayerNormLayer final_norm_;
};

struct EncoderConfig {
  int32_t input_dim = 240;
  int32_t num_layers = 2;
  ConformerConfig block;
  // Learned absolute positions, one row per frame; sequences longer than
  // this are rejected.
  int32_t max_frames = 512;
  bool positional = true;
};

// Input projection + positional table + conformer stack.
class ConformerEncoder {
 public:
  ConformerEncoder() = default;
  ConformerEncoder(ParamStore *store, const std::string &prefix,
                   const EncoderConfig &cfg, Rng *rng);
  // Output of every block, first to last.
  std::vector<Var> ForwardLayers(const GraphContext &ctx, Var x) const;
  Var Forward(const GraphContext &ctx, Var x) const;
  const EncoderConfig &config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  Linear input_proj_;
  size_t positions_ = 0;
  std::vector<ConformerBlock> blocks_;
};

// One LSTM direction; parameters wx [Din x 4H], wh [H x 4H], b [1 x 4H].
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(ParamStore *store, const std::string &prefix, int32_t in_dim,
            int32_t hidden, Rng *rng);
  Var Forward(const GraphContext &ctx, Var x, bool reverse) const;
  int32_t hidden() const { return hidden_; }

 private:
  size_t wx_ = 0, wh_ = 0, b_ = 0;
  int32_t hidden_ = 0;
};

// Stacked LSTM, optionally bidirectional: each layer's output is
// concat(forward pass, backward pass) of width 2H.
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(ParamStore *store, const std::string &prefix, int32_t in_dim,
            int32_t hidden, int32_t num_layers, bool bidirectional, Rng *rng);
  Var Forward(const GraphContext &ctx, Var x) const;
  int32_t output_dim() const { return bidirectional_ ? 2 * hidden_ : hidden_; }
  bool bidirectional() const { return bidirectional_; }

 private:
  std::vector<LstmLayer> forward_, backward_;
  int32_t hidden_ = 0;
  bool bidirectional_ = false;
};

struct DecoderConfig {
  // Includes blank at id 0.
  int32_t vocab_size = 17;
  int32_t embed_dim = 32;
  int32_t hidden = 64;
  int32_t num_layers = 1;
  bool bidirectional = false;
  int32_t joint_dim = 48;
};

// Label encoder over [blank, y1, ..., yU]. Row u depends only on the first
// u + 1 symbols. A bidirectional stack is re-run over every prefix so the
// same states are reproduced during left-to-right decoding.
class PredictionNetwork {
 public:
  PredictionNetwork() = default;
  PredictionNetwork(ParamStore *store, const std::string &prefix,
                    const DecoderConfig &cfg, Rng *rng);
  // Returns [(U+1) x output_dim] for the label sequence (without blank).
  Var Forward(const GraphContext &ctx, std::span<const int32_t> labels) const;
  // State after consuming blank + history.
  Var Step(const GraphContext &ctx, std::span<const int32_t> history) const;
  int32_t output_dim() const { return lstm_.output_dim(); }

 private:
  DecoderConfig cfg_;
  size_t embedding_ = 0;
  LstmStack lstm_;
};

// tanh(enc W_e + pred W_p + b) W_o + b_o, log-softmax over the vocabulary.
class JointNetwork {
 public:
  JointNetwork() = default;
  JointNetwork(ParamStore *store, const std::string &prefix, int32_t enc_dim,
               int32_t pred_dim, const DecoderConfig &cfg, Rng *rng);
  // Lattice of log-probs, row t * (U+1) + u.
  Var Lattice(const GraphContext &ctx, Var enc, Var pred) const;
  // Logits for one (projected encoder frame, prediction state) pair.
  RowVector Logits(const ParamStore &store, const RowVector &enc_proj_row,
                   const RowVector &pred_row) const;
  Var ProjectEncoder(const GraphContext &ctx, Var enc) const;

 private:
  Linear enc_proj_, pred_proj_, output_;
};

}  // namespace mtcascade

#endif  // MTCASCADE_LAYERS_H_
