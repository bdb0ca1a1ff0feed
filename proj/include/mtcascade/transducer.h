// include/mtcascade/transducer.h

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

#ifndef MTCASCADE_TRANSDUCER_H_
#define MTCASCADE_TRANSDUCER_H_

#include <functional>
#include <span>
#include <vector>

#include "mtcascade/common.h"

namespace mtcascade {

// Log-softmaxed joint outputs over the alignment grid. log_probs has
// num_frames * (num_labels + 1) rows (row t * (U+1) + u) and vocab columns.
struct JointLattice {
  Matrix log_probs;
  int32_t num_frames = 0;
  int32_t num_labels = 0;
  int32_t blank_id = kBlankId;

  int32_t vocab() const { return static_cast<int32_t>(log_probs.cols()); }
  const Real *Slice(int32_t t, int32_t u) const {
    return log_probs.data() +
           (static_cast<Eigen::Index>(t) * (num_labels + 1) + u) * log_probs.cols();
  }
};

struct RnntOptions {
  bool compute_grad = true;
  bool check_normalized = true;
  // Maximum |logsumexp| of a (t, u) slice before the lattice is rejected.
  double normalization_tolerance = 1e-3;
  bool keep_alpha_beta = false;
};

struct RnntResult {
  // Negative log-likelihood from the forward variables.
  Real loss = 0;
  // Same quantity from the backward variables at the origin.
  Real loss_from_beta = 0;
  // d loss / d log_probs, same layout as the lattice. Empty unless requested.
  Matrix grad;
  // [T x (U+1)] forward/backward log-variables when keep_alpha_beta is set.
  Matrix alpha, beta;
};

// Exact transducer loss by forward-backward over the T x (U+1) grid.
// Raises DataError on label-length mismatch, T < 1, out-of-vocabulary or
// blank labels, or an unnormalized lattice ("lattice not normalized").
RnntResult RnntLoss(const JointLattice &lattice, std::span<const int32_t> labels,
                    const RnntOptions &opts = {});

// Posterior probability of visiting each grid node, exp(alpha + beta - LL).
Matrix NodeOccupancy(const RnntResult &result);

// Items padded to common (max_frames, max_labels + 1, vocab) in a single
// contiguous buffer, (u, v) innermost.
struct PaddedLatticeBatch {
  int32_t batch = 0;
  int32_t max_frames = 0;
  int32_t max_labels = 0;
  int32_t vocab = 0;
  int32_t blank_id = kBlankId;
  std::vector<Real> log_probs;
  // batch x max_labels, padding ignored.
  std::vector<int32_t> labels;
  std::vector<int32_t> frame_lengths;
  std::vector<int32_t> label_lengths;

  void Resize(int32_t batch, int32_t max_frames, int32_t max_labels,
              int32_t vocab);
  size_t ItemStride() const {
    return static_cast<size_t>(max_frames) * (max_labels + 1) * vocab;
  }
  // Copies an unpadded lattice into slot b.
  void Set(int32_t b, const JointLattice &lattice,
           std::span<const int32_t> labels);
};

struct BatchRnntResult {
  Real mean_loss = 0;
  std::vector<Real> losses;
  // Gradient of the mean loss, same layout as the batch buffer (zeros in
  // padding).
  std::vector<Real> grad;
};

BatchRnntResult BatchRnntLoss(const PaddedLatticeBatch &batch,
                              const RnntOptions &opts = {});

struct DecodeStats {
  int64_t frames = 0;
  int64_t emitted = 0;
  int64_t joint_evals = 0;
  // Frames where the emission cap was hit and the frame was force-advanced.
  int64_t forced_advances = 0;

  DecodeStats &operator+=(const DecodeStats &o);
};

// Prediction network + joint, as seen by the decoder.
struct DecoderClosure {
  // Prediction-network state after blank + history.
  std::function<RowVector(std::span<const int32_t> history)> step;
  // Joint logits for encoder frame row and prediction state.
  std::function<RowVector(const RowVector &enc_frame,
                          const RowVector &pred_state)>
      joint;
};

inline constexpr int32_t kMaxSymbolsPerFrame = 10;

// Per frame, emit argmax symbols until blank (or the cap), then advance.
TokenSequence GreedyDecode(const Matrix &encoder_out,
                           const DecoderClosure &decoder,
                           int32_t max_symbols_per_frame = kMaxSymbolsPerFrame,
                           int32_t blank_id = kBlankId,
                           DecodeStats *stats = nullptr);

}  // namespace mtcascade

#endif  // MTCASCADE_TRANSDUCER_H_
