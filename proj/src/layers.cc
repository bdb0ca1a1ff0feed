// src/layers.cc

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

#include "mtcascade/layers.h"

#include <cmath>

namespace mtcascade {

Matrix HeUniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                 Rng *rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<Real>(rng->Uniform(-limit, limit));
  return m;
}

Linear::Linear(ParamStore *store, const std::string &prefix, int32_t in_dim,
               int32_t out_dim, Rng *rng, bool bias)
    : has_bias_(bias), in_dim_(in_dim), out_dim_(out_dim) {
  weight_ = store->Add(prefix + ".weight", HeUniform(in_dim, out_dim, in_dim, rng))
                .index;
  if (bias) bias_ = store->Add(prefix + ".bias", Matrix::Zero(1, out_dim)).index;
}

Var Linear::Forward(const GraphContext &ctx, Var x) const {
  Var y = ctx.tape->MatMul(x, ctx.P(weight_));
  return has_bias_ ? ctx.tape->AddBias(y, ctx.P(bias_)) : y;
}

Matrix Linear::Apply(const ParamStore &store, const Matrix &x) const {
  Matrix y = x * store.at(weight_).value;
  if (has_bias_) y.rowwise() += store.at(bias_).value.row(0);
  return y;
}

LayerNormLayer::LayerNormLayer(ParamStore *store, const std::string &prefix,
                               int32_t dim) {
  gamma_ = store->Add(prefix + ".gamma", Matrix::Ones(1, dim)).index;
  beta_ = store->Add(prefix + ".beta", Matrix::Zero(1, dim)).index;
}

Var LayerNormLayer::Forward(const GraphContext &ctx, Var x) const {
  return ctx.tape->LayerNorm(x, ctx.P(gamma_), ctx.P(beta_));
}

ConformerBlock::ConformerBlock(ParamStore *store, const std::string &prefix,
                               const ConformerConfig &cfg, Rng *rng)
    : cfg_(cfg) {
  if (cfg.num_heads < 1 || cfg.dim % cfg.num_heads != 0)
    throw ConfigError("conformer dim " + std::to_string(cfg.dim) +
                      " not divisible by " + std::to_string(cfg.num_heads) +
                      " heads");
  if (cfg.conv_kernel < 1 || cfg.conv_kernel % 2 == 0)
    throw ConfigError("conformer conv kernel must be odd");
  const int32_t d = cfg.dim, ff = cfg.dim * cfg.ff_mult;
  for (int k = 0; k < 2; ++k) {
    std::string p = prefix + ".ff" + std::to_string(k + 1);
    ff_norm_[k] = LayerNormLayer(store, p + ".norm", d);
    ff_in_[k] = Linear(store, p + ".in", d, ff, rng);
    ff_out_[k] = Linear(store, p + ".out", ff, d, rng);
  }
  att_norm_ = LayerNormLayer(store, prefix + ".att.norm", d);
  query_ = Linear(store, prefix + ".att.query", d, d, rng);
  key_ = Linear(store, prefix + ".att.key", d, d, rng);
  value_ = Linear(store, prefix + ".att.value", d, d, rng);
  att_out_ = Linear(store, prefix + ".att.out", d, d, rng);
  conv_norm_ = LayerNormLayer(store, prefix + ".conv.norm", d);
  pointwise_in_ = Linear(store, prefix + ".conv.pointwise_in", d, 2 * d, rng);
  depthwise_kernel_ =
      store->Add(prefix + ".conv.depthwise.kernel",
                 HeUniform(cfg.conv_kernel, d, cfg.conv_kernel, rng))
          .index;
  depthwise_bias_ =
      store->Add(prefix + ".conv.depthwise.bias", Matrix::Zero(1, d)).index;
  conv_inner_norm_ = LayerNormLayer(store, prefix + ".conv.inner_norm", d);
  pointwise_out_ = Linear(store, prefix + ".conv.pointwise_out", d, d, rng);
  final_norm_ = LayerNormLayer(store, prefix + ".final_norm", d);
}

Var ConformerBlock::FeedForward(const GraphContext &ctx, Var x, int which) const {
  Tape &t = *ctx.tape;
  Var h = ff_norm_[which].Forward(ctx, x);
  h = t.Swish(ff_in_[which].Forward(ctx, h));
  return ff_out_[which].Forward(ctx, h);
}

Var ConformerBlock::SelfAttention(const GraphContext &ctx, Var x) const {
  Tape &t = *ctx.tape;
  Var h = att_norm_.Forward(ctx, x);
  Var q = query_.Forward(ctx, h), k = key_.Forward(ctx, h),
      v = value_.Forward(ctx, h);
  const int32_t dk = cfg_.dim / cfg_.num_heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));
  std::vector<Var> heads;
  for (int32_t n = 0; n < cfg_.num_heads; ++n) {
    Var qh = t.SliceCols(q, n * dk, dk), kh = t.SliceCols(k, n * dk, dk),
        vh = t.SliceCols(v, n * dk, dk);
    Var weights = t.Softmax(t.Scale(t.MatMulNT(qh, kh), scale));
    heads.push_back(t.MatMul(weights, vh));
  }
  Var joined = heads.size() == 1 ? heads[0] : t.ConcatCols(heads);
  return att_out_.Forward(ctx, joined);
}

Var ConformerBlock::ConvModule(const GraphContext &ctx, Var x) const {
  Tape &t = *ctx.tape;
  const int32_t d = cfg_.dim;
  Var h = pointwise_in_.Forward(ctx, conv_norm_.Forward(ctx, x));
  // GLU over the channel axis.
  h = t.Mul(t.SliceCols(h, 0, d), t.Sigmoid(t.SliceCols(h, d, d)));
  h = t.DepthwiseConv1d(h, ctx.P(depthwise_kernel_), ctx.P(depthwise_bias_));
  h = t.Swish(conv_inner_norm_.Forward(ctx, h));
  return pointwise_out_.Forward(ctx, h);
}

Var ConformerBlock::Forward(const GraphContext &ctx, Var x) const {
  Tape &t = *ctx.tape;
  if (x.cols() != cfg_.dim)
    throw DataError("conformer block expects width " + std::to_string(cfg_.dim) +
                    ", got " + ShapeString(x.value()));
  x = t.Add(x, t.Scale(FeedForward(ctx, x, 0), Real(0.5)));
  x = t.Add(x, SelfAttention(ctx, x));
  x = t.Add(x, ConvModule(ctx, x));
  x = t.Add(x, t.Scale(FeedForward(ctx, x, 1), Real(0.5)));
  return final_norm_.Forward(ctx, x);
}

ConformerEncoder::ConformerEncoder(ParamStore *store, const std::string &prefix,
                                   const EncoderConfig &cfg, Rng *rng)
    : cfg_(cfg) {
  if (cfg.num_layers < 0) throw ConfigError("negative encoder depth");
  input_proj_ = Linear(store, prefix + ".input_proj", cfg.input_dim,
                       cfg.block.dim, rng);
  if (cfg.positional) {
    Matrix pos(cfg.max_frames, cfg.block.dim);
    for (Eigen::Index i = 0; i < pos.size(); ++i)
      pos.data()[i] = static_cast<Real>(rng->Uniform(-0.1, 0.1));
    positions_ = store->Add(prefix + ".positions", std::move(pos)).index;
  }
  for (int32_t l = 0; l < cfg.num_layers; ++l)
    blocks_.emplace_back(store, prefix + ".layer" + std::to_string(l),
                         cfg.block, rng);
}

std::vector<Var> ConformerEncoder::ForwardLayers(const GraphContext &ctx,
                                                 Var x) const {
  Tape &t = *ctx.tape;
  if (x.cols() != cfg_.input_dim)
    throw GeometryError("encoder expects input width " +
                        std::to_string(cfg_.input_dim) + ", got " +
                        ShapeString(x.value()));
  if (x.rows() > cfg_.max_frames)
    throw DataError("sequence of " + std::to_string(x.rows()) +
                    " frames exceeds encoder max_frames " +
                    std::to_string(cfg_.max_frames));
  Var h = input_proj_.Forward(ctx, x);
  if (cfg_.positional)
    h = t.Add(h, t.SliceRows(ctx.P(positions_), 0, x.rows()));
  std::vector<Var> outputs;
  if (blocks_.empty()) outputs.push_back(h);
  for (const auto &block : blocks_) {
    h = block.Forward(ctx, h);
    outputs.push_back(h);
  }
  return outputs;
}

Var ConformerEncoder::Forward(const GraphContext &ctx, Var x) const {
  return ForwardLayers(ctx, x).back();
}

LstmLayer::LstmLayer(ParamStore *store, const std::string &prefix,
                     int32_t in_dim, int32_t hidden, Rng *rng)
    : hidden_(hidden) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto uniform = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<Real>(rng->Uniform(-limit, limit));
    return m;
  };
  wx_ = store->Add(prefix + ".wx", uniform(in_dim, 4 * hidden)).index;
  wh_ = store->Add(prefix + ".wh", uniform(hidden, 4 * hidden)).index;
  Matrix b = Matrix::Zero(1, 4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget-gate bias
  b_ = store->Add(prefix + ".b", std::move(b)).index;
}

Var LstmLayer::Forward(const GraphContext &ctx, Var x, bool reverse) const {
  return ctx.tape->Lstm(x, ctx.P(wx_), ctx.P(wh_), ctx.P(b_), reverse);
}

LstmStack::LstmStack(ParamStore *store, const std::string &prefix,
                     int32_t in_dim, int32_t hidden, int32_t num_layers,
                     bool bidirectional, Rng *rng)
    : hidden_(hidden), bidirectional_(bidirectional) {
  if (num_layers < 1) throw ConfigError("LSTM stack needs at least one layer");
  int32_t dim = in_dim;
  for (int32_t l = 0; l < num_layers; ++l) {
    std::string p = prefix + ".layer" + std::to_string(l);
    forward_.emplace_back(store, p + ".fwd", dim, hidden, rng);
    if (bidirectional) backward_.emplace_back(store, p + ".bwd", dim, hidden, rng);
    dim = bidirectional ? 2 * hidden : hidden;
  }
}

Var LstmStack::Forward(const GraphContext &ctx, Var x) const {
  for (size_t l = 0; l < forward_.size(); ++l) {
    Var f = forward_[l].Forward(ctx, x, false);
    if (!bidirectional_) {
      x = f;
      continue;
    }
    Var b = backward_[l].Forward(ctx, x, true);
    Var parts[] = {f, b};
    x = ctx.tape->ConcatCols(parts);
  }
  return x;
}

PredictionNetwork::PredictionNetwork(ParamStore *store,
                                     const std::string &prefix,
                                     const DecoderConfig &cfg, Rng *rng)
    : cfg_(cfg) {
  if (cfg.vocab_size < 2) throw ConfigError("vocabulary must include blank + 1");
  Matrix emb(cfg.vocab_size, cfg.embed_dim);
  for (Eigen::Index i = 0; i < emb.size(); ++i)
    emb.data()[i] = static_cast<Real>(rng->Uniform(-1.0, 1.0));
  embedding_ = store->Add(prefix + ".embedding", std::move(emb)).index;
  lstm_ = LstmStack(store, prefix + ".lstm", cfg.embed_dim, cfg.hidden,
                    cfg.num_layers, cfg.bidirectional, rng);
}

Var PredictionNetwork::Forward(const GraphContext &ctx,
                               std::span<const int32_t> labels) const {
  Tape &t = *ctx.tape;
  std::vector<int32_t> ids;
  ids.reserve(labels.size() + 1);
  ids.push_back(kBlankId);
  for (int32_t y : labels) {
    if (y <= kBlankId || y >= cfg_.vocab_size)
      throw DataError("label id " + std::to_string(y) +
                      " outside vocabulary [1, " +
                      std::to_string(cfg_.vocab_size - 1) + "]");
    ids.push_back(y);
  }
  Var emb = t.GatherRows(ctx.P(embedding_), ids);
  if (!lstm_.bidirectional()) return lstm_.Forward(ctx, emb);
  std::vector<Var> rows;
  for (size_t u = 0; u < ids.size(); ++u) {
    Var out = lstm_.Forward(ctx, t.SliceRows(emb, 0, u + 1));
    rows.push_back(t.SliceRows(out, u, 1));
  }
  // Stack rows via transpose/concat to keep the op set small.
  std::vector<Var> cols;
  for (Var r : rows) cols.push_back(t.Transpose(r));
  return t.Transpose(t.ConcatCols(cols));
}

Var PredictionNetwork::Step(const GraphContext &ctx,
                            std::span<const int32_t> history) const {
  Var all = Forward(ctx, history);
  return ctx.tape->SliceRows(all, all.rows() - 1, 1);
}

JointNetwork::JointNetwork(ParamStore *store, const std::string &prefix,
                           int32_t enc_dim, int32_t pred_dim,
                           const DecoderConfig &cfg, Rng *rng) {
  enc_proj_ = Linear(store, prefix + ".enc_proj", enc_dim, cfg.joint_dim, rng);
  pred_proj_ = Linear(store, prefix + ".pred_proj", pred_dim, cfg.joint_dim,
                      rng, /*bias=*/false);
  output_ = Linear(store, prefix + ".output", cfg.joint_dim, cfg.vocab_size, rng);
}

Var JointNetwork::ProjectEncoder(const GraphContext &ctx, Var enc) const {
  return enc_proj_.Forward(ctx, enc);
}

Var JointNetwork::Lattice(const GraphContext &ctx, Var enc, Var pred) const {
  Tape &t = *ctx.tape;
  Var e = enc_proj_.Forward(ctx, enc);
  Var p = pred_proj_.Forward(ctx, pred);
  Var h = t.Tanh(t.PairwiseSum(e, p));
  return t.LogSoftmax(output_.Forward(ctx, h));
}

RowVector JointNetwork::Logits(const ParamStore &store,
                               const RowVector &enc_proj_row,
                               const RowVector &pred_row) const {
  Matrix h = (enc_proj_row + pred_proj_.Apply(store, pred_row)).array().tanh();
  return output_.Apply(store, h).row(0);
}

}  // namespace mtcascade
