// src/transducer.cc

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

#include "mtcascade/transducer.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtcascade {

namespace {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

inline Real LogAdd(Real a, Real b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Core recursion on one item. `lp` points at row (0, 0); row (t, u) starts at
// lp + (t * u_stride + u) * vocab. Writes d loss / d lp into `grad` (same
// layout) when non-null and scales it by grad_scale.
RnntResult RnntKernel(const Real *lp, int32_t frames, int32_t num_labels,
                      int32_t u_stride, int32_t vocab, const int32_t *labels,
                      int32_t blank, const RnntOptions &opts, Real *grad,
                      Real grad_scale) {
  if (frames < 1) throw DataError("transducer loss needs at least one frame");
  if (blank < 0 || blank >= vocab) throw DataError("blank id outside vocabulary");
  for (int32_t u = 0; u < num_labels; ++u) {
    if (labels[u] < 0 || labels[u] >= vocab)
      throw DataError("label " + std::to_string(labels[u]) + " outside vocabulary");
    if (labels[u] == blank) throw DataError("blank appears in the reference");
  }
  const int32_t u1 = num_labels + 1;
  auto row = [&](int32_t t, int32_t u) {
    return lp + (static_cast<size_t>(t) * u_stride + u) * vocab;
  };
  if (opts.check_normalized) {
    for (int32_t t = 0; t < frames; ++t)
      for (int32_t u = 0; u < u1; ++u) {
        const Real *r = row(t, u);
        Real lse = kNegInf;
        for (int32_t k = 0; k < vocab; ++k) lse = LogAdd(lse, r[k]);
        if (!(std::fabs(lse) <= opts.normalization_tolerance))
          throw DataError("lattice not normalized at (t=" + std::to_string(t) +
                          ", u=" + std::to_string(u) + ")");
      }
  }
  Matrix alpha(frames, u1), beta(frames, u1);
  alpha(0, 0) = 0;
  for (int32_t t = 0; t < frames; ++t) {
    for (int32_t u = 0; u < u1; ++u) {
      if (t == 0 && u == 0) continue;
      Real a = kNegInf;
      if (t > 0) a = alpha(t - 1, u) + row(t - 1, u)[blank];
      if (u > 0) a = LogAdd(a, alpha(t, u - 1) + row(t, u - 1)[labels[u - 1]]);
      alpha(t, u) = a;
    }
  }
  for (int32_t t = frames - 1; t >= 0; --t) {
    for (int32_t u = num_labels; u >= 0; --u) {
      if (t == frames - 1 && u == num_labels) {
        beta(t, u) = row(t, u)[blank];
        continue;
      }
      Real b = kNegInf;
      if (t < frames - 1) b = beta(t + 1, u) + row(t, u)[blank];
      if (u < num_labels) b = LogAdd(b, beta(t, u + 1) + row(t, u)[labels[u]]);
      beta(t, u) = b;
    }
  }
  RnntResult res;
  const Real ll = alpha(frames - 1, num_labels) + row(frames - 1, num_labels)[blank];
  res.loss = -ll;
  res.loss_from_beta = -beta(0, 0);
  if (!std::isfinite(ll)) throw DataError("transducer log-likelihood is not finite");
  if (grad) {
    for (int32_t t = 0; t < frames; ++t) {
      for (int32_t u = 0; u < u1; ++u) {
        Real *g = grad + (static_cast<size_t>(t) * u_stride + u) * vocab;
        const Real *r = row(t, u);
        const Real a = alpha(t, u);
        if (t < frames - 1)
          g[blank] = -grad_scale * std::exp(a + r[blank] + beta(t + 1, u) - ll);
        else if (u == num_labels)
          g[blank] = -grad_scale * std::exp(a + r[blank] - ll);
        if (u < num_labels)
          g[labels[u]] =
              -grad_scale * std::exp(a + r[labels[u]] + beta(t, u + 1) - ll);
      }
    }
  }
  if (opts.keep_alpha_beta) {
    res.alpha = std::move(alpha);
    res.beta = std::move(beta);
  }
  return res;
}

}  // namespace

RnntResult RnntLoss(const JointLattice &lattice, std::span<const int32_t> labels,
                    const RnntOptions &opts) {
  if (static_cast<int32_t>(labels.size()) != lattice.num_labels)
    throw DataError("lattice has U=" + std::to_string(lattice.num_labels) +
                    " but reference has " + std::to_string(labels.size()) +
                    " labels");
  const Eigen::Index expected_rows =
      static_cast<Eigen::Index>(lattice.num_frames) * (lattice.num_labels + 1);
  if (lattice.log_probs.rows() != expected_rows)
    throw DataError("lattice rows " + std::to_string(lattice.log_probs.rows()) +
                    " != T*(U+1) = " + std::to_string(expected_rows));
  Matrix grad;
  if (opts.compute_grad)
    grad = Matrix::Zero(lattice.log_probs.rows(), lattice.log_probs.cols());
  RnntResult res = RnntKernel(
      lattice.log_probs.data(), lattice.num_frames, lattice.num_labels,
      lattice.num_labels + 1, lattice.vocab(), labels.data(), lattice.blank_id,
      opts, opts.compute_grad ? grad.data() : nullptr, Real(1));
  res.grad = std::move(grad);
  return res;
}

Matrix NodeOccupancy(const RnntResult &result) {
  if (result.alpha.size() == 0)
    throw Error("NodeOccupancy needs keep_alpha_beta");
  const Real ll = -result.loss;
  return (result.alpha + result.beta).array().unaryExpr(
      [ll](Real v) { return std::exp(v - ll); });
}

void PaddedLatticeBatch::Resize(int32_t b, int32_t t, int32_t u, int32_t v) {
  batch = b;
  max_frames = t;
  max_labels = u;
  vocab = v;
  log_probs.assign(static_cast<size_t>(b) * ItemStride(), Real(0));
  labels.assign(static_cast<size_t>(b) * u, 0);
  frame_lengths.assign(b, 0);
  label_lengths.assign(b, 0);
}

void PaddedLatticeBatch::Set(int32_t b, const JointLattice &lattice,
                             std::span<const int32_t> lab) {
  if (b < 0 || b >= batch) throw DataError("batch slot out of range");
  if (lattice.num_frames > max_frames || lattice.num_labels > max_labels ||
      lattice.vocab() != vocab)
    throw GeometryError("lattice exceeds padded batch dimensions");
  if (static_cast<int32_t>(lab.size()) != lattice.num_labels)
    throw DataError("label count does not match lattice U");
  Real *dst = log_probs.data() + b * ItemStride();
  for (int32_t t = 0; t < lattice.num_frames; ++t)
    for (int32_t u = 0; u <= lattice.num_labels; ++u)
      std::copy_n(lattice.Slice(t, u), vocab,
                  dst + (static_cast<size_t>(t) * (max_labels + 1) + u) * vocab);
  std::copy(lab.begin(), lab.end(), labels.begin() + b * max_labels);
  frame_lengths[b] = lattice.num_frames;
  label_lengths[b] = lattice.num_labels;
}

BatchRnntResult BatchRnntLoss(const PaddedLatticeBatch &batch,
                              const RnntOptions &opts) {
  BatchRnntResult out;
  if (batch.batch == 0) return out;
  if (batch.log_probs.size() != static_cast<size_t>(batch.batch) * batch.ItemStride())
    throw DataError("batch buffer size does not match its dimensions");
  if (opts.compute_grad) out.grad.assign(batch.log_probs.size(), Real(0));
  const Real scale = Real(1) / static_cast<Real>(batch.batch);
  double total = 0.0;
  for (int32_t b = 0; b < batch.batch; ++b) {
    const int32_t t_len = batch.frame_lengths[b], u_len = batch.label_lengths[b];
    if (t_len > batch.max_frames || u_len > batch.max_labels || t_len < 0 ||
        u_len < 0)
      throw DataError("item " + std::to_string(b) +
                      " length exceeds padded dimensions");
    const size_t off = b * batch.ItemStride();
    RnntResult r = RnntKernel(batch.log_probs.data() + off, t_len, u_len,
                              batch.max_labels + 1, batch.vocab,
                              batch.labels.data() + b * batch.max_labels,
                              batch.blank_id, opts,
                              opts.compute_grad ? out.grad.data() + off : nullptr,
                              scale);
    out.losses.push_back(r.loss);
    total += static_cast<double>(r.loss);
  }
  out.mean_loss = static_cast<Real>(total / batch.batch);
  return out;
}

DecodeStats &DecodeStats::operator+=(const DecodeStats &o) {
  frames += o.frames;
  emitted += o.emitted;
  joint_evals += o.joint_evals;
  forced_advances += o.forced_advances;
  return *this;
}

TokenSequence GreedyDecode(const Matrix &encoder_out,
                           const DecoderClosure &decoder,
                           int32_t max_symbols_per_frame, int32_t blank_id,
                           DecodeStats *stats) {
  TokenSequence hyp;
  DecodeStats local;
  RowVector state = decoder.step(hyp);
  for (Eigen::Index t = 0; t < encoder_out.rows(); ++t) {
    const RowVector frame = encoder_out.row(t);
    int32_t emitted = 0;
    while (true) {
      if (emitted >= max_symbols_per_frame) {
        ++local.forced_advances;
        break;
      }
      RowVector logits = decoder.joint(frame, state);
      ++local.joint_evals;
      Eigen::Index best;
      logits.maxCoeff(&best);
      if (best == blank_id) break;
      hyp.push_back(static_cast<int32_t>(best));
      ++emitted;
      state = decoder.step(hyp);
    }
    local.emitted += emitted;
    ++local.frames;
  }
  if (stats) *stats += local;
  return hyp;
}

}  // namespace mtcascade
