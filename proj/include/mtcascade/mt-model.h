// include/mtcascade/mt-model.h

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

#ifndef MTCASCADE_MT_MODEL_H_
#define MTCASCADE_MT_MODEL_H_

#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtcascade/checkpoint.h"
#include "mtcascade/layers.h"
#include "mtcascade/overlap-sim.h"
#include "mtcascade/param-store.h"
#include "mtcascade/transducer.h"

namespace mtcascade {

enum class WiringKind { kSingleTalker, kMtBaseline, kMtCascade };

const char *WiringName(WiringKind kind);
// Accepts "single-talker", "mt-baseline", "mt-cascade".
WiringKind ParseWiring(const std::string &s);

struct WiringDescriptor {
  WiringKind kind = WiringKind::kSingleTalker;
  // Maximum number of overlapping label sequences (M).
  int32_t num_channels = 1;
  // Probability of taking the audio branch per item (cascade only).
  double lambda = 0.5;
  EncoderConfig audio_encoder;
  // input_dim is derived: audio width + M.
  EncoderConfig mask_encoder;
  DecoderConfig decoder;
  bool pretrained_audio = false;
  bool freeze_audio = false;

  bool HasMaskEncoder() const { return kind != WiringKind::kSingleTalker; }
  bool HasDirectAudioPath() const { return kind != WiringKind::kMtBaseline; }
  void Validate() const;
  nlohmann::json ToJson() const;
  static WiringDescriptor FromJson(const nlohmann::json &j);
};

// One-based channel sequence index m in [1, M].
class ChannelId {
 public:
  ChannelId(int32_t m, int32_t num_channels);
  int32_t value() const { return m_; }
  int32_t num_channels() const { return num_channels_; }

 private:
  int32_t m_;
  int32_t num_channels_;
};

enum class Branch { kAudio, kMask };

struct LossReport {
  // L_t for this item: L_a on the audio branch, sum_m L_m on the mask branch.
  double total = 0.0;
  std::optional<double> audio_branch;
  std::vector<double> mask_branch;
  Branch branch_taken = Branch::kMask;
  // Audio branch was drawn for an overlapped item and replaced by the mask
  // branch.
  bool resampled = false;
  int64_t step = 0;
};

// Appends one-hot(m) of width M to every frame.
Matrix AppendChannelIndex(const Matrix &enc_out, const ChannelId &m);
Var AppendChannelIndex(Tape *tape, Var enc_out, const ChannelId &m);

class ModelBundle {
 public:
  ModelBundle(const WiringDescriptor &wiring, uint64_t seed);
  ModelBundle(const ModelBundle &other);
  ModelBundle &operator=(const ModelBundle &) = delete;

  const WiringDescriptor &wiring() const { return wiring_; }
  WiringDescriptor &mutable_wiring() { return wiring_; }
  ParamStore &params() { return store_; }
  const ParamStore &params() const { return store_; }

  // Per-dimension feature normalization applied before the audio encoder;
  // stored as non-trainable audio-encoder tensors.
  void SetFeatureStats(const RowVector &mean, const RowVector &stddev);

  Var EncodeAudio(const GraphContext &ctx, const Matrix &features) const;
  // Mask encoder outputs per layer for channel m.
  std::vector<Var> EncodeMaskLayers(const GraphContext &ctx, Var audio_out,
                                    const ChannelId &m) const;
  Var EncodeMask(const GraphContext &ctx, Var audio_out, const ChannelId &m) const;
  // Log-prob lattice for an encoder output and reference.
  Var Lattice(const GraphContext &ctx, Var encoder_out,
              std::span<const int32_t> labels) const;
  // Greedy decode of one encoder output through the shared decoder.
  TokenSequence DecodeEncoderOutput(const Matrix &encoder_out,
                                    DecodeStats *stats) const;

  int32_t mask_depth() const { return wiring_.mask_encoder.num_layers; }
  int64_t audio_encoder_calls() const { return audio_calls_.load(); }
  void ResetCounters() { audio_calls_ = 0; }

  void Save(const std::string &path) const;
  static ModelBundle Load(const std::string &path);
  // Replaces "audio_encoder." tensors from a checkpoint; returns the count.
  size_t LoadAudioEncoder(const Checkpoint &ckpt);

 private:
  WiringDescriptor wiring_;
  ParamStore store_;
  size_t feat_mean_ = 0, feat_std_ = 0;
  ConformerEncoder audio_;
  ConformerEncoder mask_;
  PredictionNetwork prediction_;
  JointNetwork joint_;
  mutable std::atomic<int64_t> audio_calls_{0};
};

struct ForwardOptions {
  // When set, gradients of grad_scale * total are accumulated here.
  GradientBuffer *grads = nullptr;
  Real grad_scale = 1;
};

// Audio encoder -> shared decoder -> L_a.
LossReport ForwardSingleTalker(const ModelBundle &bundle, const Matrix &features,
                               const TokenSequence &reference,
                               const ForwardOptions &opts = {});

// Audio encoder, then per channel m: append index -> mask encoder -> shared
// decoder -> L_m. total = sum_m L_m. Missing channels use empty references.
LossReport ForwardMtBaseline(const ModelBundle &bundle, const Matrix &features,
                             std::span<const TokenSequence> transcripts,
                             const ForwardOptions &opts = {});

// With probability lambda the audio branch (single-speaker items only),
// otherwise the mask branch as in ForwardMtBaseline.
LossReport ForwardMtCascade(const ModelBundle &bundle, const Matrix &features,
                            std::span<const TokenSequence> transcripts,
                            UtteranceKind kind, Rng *rng,
                            const ForwardOptions &opts = {});

// Draws the branch exactly as ForwardMtCascade does.
Branch SampleCascadeBranch(double lambda, UtteranceKind kind, Rng *rng,
                           bool *resampled);

// One mask-encoder pass per channel; the audio encoder runs once.
std::vector<TokenSequence> DecodeMt(const Matrix &features,
                                    const ModelBundle &bundle,
                                    DecodeStats *stats = nullptr);

// Direct audio-encoder -> decoder path. Throws GeometryError for MT-Baseline.
TokenSequence DecodeSt(const Matrix &features, const ModelBundle &bundle,
                       DecodeStats *stats = nullptr);

}  // namespace mtcascade

#endif  // MTCASCADE_MT_MODEL_H_
