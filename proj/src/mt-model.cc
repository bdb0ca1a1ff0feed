// src/mt-model.cc

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

#include "mtcascade/mt-model.h"

#include <cmath>

namespace mtcascade {

namespace {

using nlohmann::json;

json EncoderToJson(const EncoderConfig &c) {
  return {{"input_dim", c.input_dim},
          {"num_layers", c.num_layers},
          {"dim", c.block.dim},
          {"num_heads", c.block.num_heads},
          {"ff_mult", c.block.ff_mult},
          {"conv_kernel", c.block.conv_kernel},
          {"max_frames", c.max_frames},
          {"positional", c.positional}};
}

EncoderConfig EncoderFromJson(const json &j) {
  EncoderConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.block.dim = j.value("dim", c.block.dim);
  c.block.num_heads = j.value("num_heads", c.block.num_heads);
  c.block.ff_mult = j.value("ff_mult", c.block.ff_mult);
  c.block.conv_kernel = j.value("conv_kernel", c.block.conv_kernel);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.positional = j.value("positional", c.positional);
  return c;
}

void ValidateEncoder(const EncoderConfig &c, const char *what) {
  if (c.input_dim <= 0 || c.num_layers <= 0 || c.block.dim <= 0 ||
      c.block.num_heads <= 0 || c.block.dim % c.block.num_heads != 0 ||
      c.block.ff_mult <= 0 || c.block.conv_kernel <= 0 ||
      c.block.conv_kernel % 2 == 0 || c.max_frames <= 0)
    throw ConfigError(std::string("invalid ") + what + " encoder config");
}

EncoderConfig MaskEncoderConfig(const WiringDescriptor &w) {
  EncoderConfig c = w.mask_encoder;
  c.input_dim = w.audio_encoder.block.dim + w.num_channels;
  return c;
}

// Lattice + RNN-T loss for one channel; pushes the lattice seed when
// gradients are wanted.
double ChannelLoss(const ModelBundle &bundle, const GraphContext &ctx,
                   Var enc, const TokenSequence &ref, bool want_grad,
                   std::vector<std::pair<Var, Matrix>> *seeds) {
  Var lattice = bundle.Lattice(ctx, enc, ref);
  JointLattice jl;
  jl.log_probs = lattice.value();
  jl.num_frames = enc.rows();
  jl.num_labels = static_cast<int32_t>(ref.size());
  jl.blank_id = kBlankId;
  RnntOptions opts;
  opts.compute_grad = want_grad;
  opts.check_normalized = false;
  RnntResult r = RnntLoss(jl, ref, opts);
  if (want_grad) seeds->emplace_back(lattice, std::move(r.grad));
  return r.loss;
}

void Finish(Tape *tape, std::vector<std::pair<Var, Matrix>> *seeds,
            const ForwardOptions &opts) {
  if (!opts.grads || seeds->empty()) return;
  for (auto &s : *seeds) s.second *= opts.grad_scale;
  tape->Backward(*seeds);
  tape->AccumulateParamGrads(opts.grads);
}

GraphContext AudioContext(const ModelBundle &b, Tape *tape, bool grads) {
  return {tape, &b.params(), grads && !b.wiring().freeze_audio};
}

LossReport MaskBranch(const ModelBundle &bundle, const Matrix &features,
                      std::span<const TokenSequence> transcripts,
                      const ForwardOptions &opts) {
  const WiringDescriptor &w = bundle.wiring();
  if (static_cast<int32_t>(transcripts.size()) > w.num_channels)
    throw GeometryError("more transcripts than output channels");
  bool want = opts.grads != nullptr;
  Tape tape(want);
  GraphContext actx = AudioContext(bundle, &tape, want);
  GraphContext ctx{&tape, &bundle.params(), want};
  Var audio = bundle.EncodeAudio(actx, features);
  std::vector<std::pair<Var, Matrix>> seeds;
  LossReport rep;
  rep.branch_taken = Branch::kMask;
  static const TokenSequence kEmpty;
  for (int32_t m = 1; m <= w.num_channels; ++m) {
    const TokenSequence &ref =
        m <= static_cast<int32_t>(transcripts.size()) ? transcripts[m - 1] : kEmpty;
    Var enc = bundle.EncodeMask(ctx, audio, ChannelId(m, w.num_channels));
    double l = 0.0;
    try {
      l = ChannelLoss(bundle, ctx, enc, ref, want, &seeds);
    } catch (const GeometryError &e) {
      throw GeometryError("channel " + std::to_string(m) + ": " + e.what());
    } catch (const DataError &e) {
      throw DataError("channel " + std::to_string(m) + ": " + e.what());
    }
    rep.mask_branch.push_back(l);
    rep.total += l;
  }
  Finish(&tape, &seeds, opts);
  return rep;
}

LossReport AudioBranch(const ModelBundle &bundle, const Matrix &features,
                       const TokenSequence &reference,
                       const ForwardOptions &opts) {
  bool want = opts.grads != nullptr;
  Tape tape(want);
  GraphContext actx = AudioContext(bundle, &tape, want);
  GraphContext ctx{&tape, &bundle.params(), want};
  Var audio = bundle.EncodeAudio(actx, features);
  std::vector<std::pair<Var, Matrix>> seeds;
  LossReport rep;
  rep.branch_taken = Branch::kAudio;
  rep.total = ChannelLoss(bundle, ctx, audio, reference, want, &seeds);
  rep.audio_branch = rep.total;
  Finish(&tape, &seeds, opts);
  return rep;
}

}  // namespace

const char *WiringName(WiringKind kind) {
  switch (kind) {
    case WiringKind::kSingleTalker: return "single-talker";
    case WiringKind::kMtBaseline: return "mt-baseline";
    case WiringKind::kMtCascade: return "mt-cascade";
  }
  return "unknown";
}

WiringKind ParseWiring(const std::string &s) {
  if (s == "single-talker" || s == "st") return WiringKind::kSingleTalker;
  if (s == "mt-baseline") return WiringKind::kMtBaseline;
  if (s == "mt-cascade") return WiringKind::kMtCascade;
  throw ConfigError("unknown wiring '" + s + "'");
}

void WiringDescriptor::Validate() const {
  ValidateEncoder(audio_encoder, "audio");
  if (HasMaskEncoder()) {
    ValidateEncoder(MaskEncoderConfig(*this), "mask");
    if (num_channels < 1) throw ConfigError("num_channels must be >= 1");
    if (kind == WiringKind::kMtCascade &&
        mask_encoder.block.dim != audio_encoder.block.dim)
      throw ConfigError(
          "cascade wiring shares the decoder: audio and mask encoder widths "
          "must match");
  } else if (num_channels != 1) {
    throw ConfigError("single-talker wiring has exactly one channel");
  }
  if (kind == WiringKind::kMtCascade && !(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("lambda must lie in [0, 1]");
  if (decoder.vocab_size < 2 || decoder.embed_dim <= 0 || decoder.hidden <= 0 ||
      decoder.num_layers <= 0 || decoder.joint_dim <= 0)
    throw ConfigError("invalid decoder config");
}

json WiringDescriptor::ToJson() const {
  json j = {{"kind", WiringName(kind)},
            {"num_channels", num_channels},
            {"lambda", lambda},
            {"audio_encoder", EncoderToJson(audio_encoder)},
            {"decoder",
             {{"vocab_size", decoder.vocab_size},
              {"embed_dim", decoder.embed_dim},
              {"hidden", decoder.hidden},
              {"num_layers", decoder.num_layers},
              {"bidirectional", decoder.bidirectional},
              {"joint_dim", decoder.joint_dim}}},
            {"pretrained_audio", pretrained_audio},
            {"freeze_audio", freeze_audio}};
  if (HasMaskEncoder()) j["mask_encoder"] = EncoderToJson(mask_encoder);
  return j;
}

WiringDescriptor WiringDescriptor::FromJson(const json &j) {
  WiringDescriptor w;
  try {
    w.kind = ParseWiring(j.at("kind").get<std::string>());
    w.num_channels = j.value("num_channels", w.num_channels);
    w.lambda = j.value("lambda", w.lambda);
    w.audio_encoder = EncoderFromJson(j.at("audio_encoder"));
    if (j.contains("mask_encoder"))
      w.mask_encoder = EncoderFromJson(j.at("mask_encoder"));
    const json &d = j.at("decoder");
    w.decoder.vocab_size = d.value("vocab_size", w.decoder.vocab_size);
    w.decoder.embed_dim = d.value("embed_dim", w.decoder.embed_dim);
    w.decoder.hidden = d.value("hidden", w.decoder.hidden);
    w.decoder.num_layers = d.value("num_layers", w.decoder.num_layers);
    w.decoder.bidirectional = d.value("bidirectional", w.decoder.bidirectional);
    w.decoder.joint_dim = d.value("joint_dim", w.decoder.joint_dim);
    w.pretrained_audio = j.value("pretrained_audio", false);
    w.freeze_audio = j.value("freeze_audio", false);
  } catch (const json::exception &e) {
    throw ConfigError(std::string("bad wiring descriptor: ") + e.what());
  }
  w.Validate();
  return w;
}

ChannelId::ChannelId(int32_t m, int32_t num_channels)
    : m_(m), num_channels_(num_channels) {
  if (num_channels < 1 || m < 1 || m > num_channels)
    throw GeometryError("channel index " + std::to_string(m) +
                        " outside [1, " + std::to_string(num_channels) + "]");
}

Matrix AppendChannelIndex(const Matrix &enc_out, const ChannelId &m) {
  Matrix out = Matrix::Zero(enc_out.rows(), enc_out.cols() + m.num_channels());
  out.leftCols(enc_out.cols()) = enc_out;
  out.col(enc_out.cols() + m.value() - 1).setOnes();
  return out;
}

Var AppendChannelIndex(Tape *tape, Var enc_out, const ChannelId &m) {
  Matrix onehot = Matrix::Zero(enc_out.rows(), m.num_channels());
  onehot.col(m.value() - 1).setOnes();
  Var parts[2] = {enc_out, tape->Constant(std::move(onehot))};
  return tape->ConcatCols(parts);
}

ModelBundle::ModelBundle(const WiringDescriptor &wiring, uint64_t seed)
    : wiring_(wiring) {
  wiring_.Validate();
  Rng rng(seed);
  int32_t d_in = wiring_.audio_encoder.input_dim;
  feat_mean_ =
      store_.Add("audio_encoder.feat_mean", Matrix::Zero(1, d_in), false).index;
  feat_std_ =
      store_.Add("audio_encoder.feat_std", Matrix::Ones(1, d_in), false).index;
  audio_ = ConformerEncoder(&store_, "audio_encoder", wiring_.audio_encoder, &rng);
  if (wiring_.HasMaskEncoder())
    mask_ = ConformerEncoder(&store_, "mask_encoder", MaskEncoderConfig(wiring_),
                             &rng);
  prediction_ = PredictionNetwork(&store_, "decoder.prediction", wiring_.decoder,
                                  &rng);
  int32_t enc_dim = wiring_.HasMaskEncoder() ? wiring_.mask_encoder.block.dim
                                             : wiring_.audio_encoder.block.dim;
  joint_ = JointNetwork(&store_, "decoder.joint", enc_dim,
                        prediction_.output_dim(), wiring_.decoder, &rng);
}

ModelBundle::ModelBundle(const ModelBundle &o)
    : wiring_(o.wiring_),
      store_(o.store_),
      feat_mean_(o.feat_mean_),
      feat_std_(o.feat_std_),
      audio_(o.audio_),
      mask_(o.mask_),
      prediction_(o.prediction_),
      joint_(o.joint_),
      audio_calls_(0) {}

void ModelBundle::SetFeatureStats(const RowVector &mean, const RowVector &stddev) {
  if (mean.size() != wiring_.audio_encoder.input_dim ||
      stddev.size() != mean.size())
    throw GeometryError("feature stats width mismatch");
  store_.at(feat_mean_).value = mean;
  store_.at(feat_std_).value = stddev.cwiseMax(Real(1e-5));
}

Var ModelBundle::EncodeAudio(const GraphContext &ctx,
                             const Matrix &features) const {
  if (features.cols() != wiring_.audio_encoder.input_dim)
    throw GeometryError("feature width " + std::to_string(features.cols()) +
                        " != audio encoder input " +
                        std::to_string(wiring_.audio_encoder.input_dim));
  audio_calls_.fetch_add(1);
  const RowVector &mu = store_.at(feat_mean_).value.row(0);
  RowVector inv = store_.at(feat_std_).value.row(0).cwiseInverse();
  Matrix x = (features.rowwise() - mu).array().rowwise() * inv.array();
  return audio_.Forward(ctx, ctx.tape->Constant(std::move(x)));
}

std::vector<Var> ModelBundle::EncodeMaskLayers(const GraphContext &ctx,
                                               Var audio_out,
                                               const ChannelId &m) const {
  if (!wiring_.HasMaskEncoder())
    throw GeometryError("wiring has no mask encoder");
  if (m.num_channels() != wiring_.num_channels)
    throw GeometryError("channel id built for a different M");
  return mask_.ForwardLayers(ctx, AppendChannelIndex(ctx.tape, audio_out, m));
}

Var ModelBundle::EncodeMask(const GraphContext &ctx, Var audio_out,
                            const ChannelId &m) const {
  return EncodeMaskLayers(ctx, audio_out, m).back();
}

Var ModelBundle::Lattice(const GraphContext &ctx, Var encoder_out,
                         std::span<const int32_t> labels) const {
  for (int32_t y : labels)
    if (y <= kBlankId || y >= wiring_.decoder.vocab_size)
      throw DataError("label id " + std::to_string(y) + " outside vocabulary");
  Var pred = prediction_.Forward(ctx, labels);
  return joint_.Lattice(ctx, encoder_out, pred);
}

TokenSequence ModelBundle::DecodeEncoderOutput(const Matrix &encoder_out,
                                               DecodeStats *stats) const {
  Tape tape(false);
  GraphContext ctx{&tape, &store_, false};
  Matrix enc_proj = joint_.ProjectEncoder(ctx, tape.Constant(encoder_out)).value();
  DecoderClosure closure;
  closure.step = [&](std::span<const int32_t> history) -> RowVector {
    Tape t(false);
    GraphContext c{&t, &store_, false};
    return prediction_.Step(c, history).value().row(0);
  };
  closure.joint = [&](const RowVector &enc_row, const RowVector &pred_state) {
    return joint_.Logits(store_, enc_row, pred_state);
  };
  return GreedyDecode(enc_proj, closure, kMaxSymbolsPerFrame, kBlankId, stats);
}

void ModelBundle::Save(const std::string &path) const {
  SaveCheckpoint(store_, wiring_.ToJson(), path);
}

ModelBundle ModelBundle::Load(const std::string &path) {
  Checkpoint ckpt = ReadCheckpoint(path);
  ModelBundle bundle(WiringDescriptor::FromJson(ckpt.wiring), 0);
  LoadTensors(ckpt, &bundle.store_, "", true);
  return bundle;
}

size_t ModelBundle::LoadAudioEncoder(const Checkpoint &ckpt) {
  size_t n = LoadTensors(ckpt, &store_, "audio_encoder.", false);
  if (n == 0) throw ConfigError("checkpoint has no audio_encoder tensors");
  wiring_.pretrained_audio = true;
  return n;
}

LossReport ForwardSingleTalker(const ModelBundle &bundle, const Matrix &features,
                               const TokenSequence &reference,
                               const ForwardOptions &opts) {
  if (!bundle.wiring().HasDirectAudioPath())
    throw GeometryError("no direct audio decode path in mt-baseline wiring");
  return AudioBranch(bundle, features, reference, opts);
}

LossReport ForwardMtBaseline(const ModelBundle &bundle, const Matrix &features,
                             std::span<const TokenSequence> transcripts,
                             const ForwardOptions &opts) {
  return MaskBranch(bundle, features, transcripts, opts);
}

Branch SampleCascadeBranch(double lambda, UtteranceKind kind, Rng *rng,
                           bool *resampled) {
  bool audio = rng->Uniform() < lambda;
  *resampled = false;
  if (audio && kind == UtteranceKind::kOverlapped) {
    *resampled = true;
    return Branch::kMask;
  }
  return audio ? Branch::kAudio : Branch::kMask;
}

LossReport ForwardMtCascade(const ModelBundle &bundle, const Matrix &features,
                            std::span<const TokenSequence> transcripts,
                            UtteranceKind kind, Rng *rng,
                            const ForwardOptions &opts) {
  if (bundle.wiring().kind != WiringKind::kMtCascade)
    throw GeometryError("ForwardMtCascade needs the cascade wiring");
  if (transcripts.empty()) throw DataError("item has no transcripts");
  bool resampled = false;
  Branch b = SampleCascadeBranch(bundle.wiring().lambda, kind, rng, &resampled);
  LossReport rep = b == Branch::kAudio
                       ? AudioBranch(bundle, features, transcripts[0], opts)
                       : MaskBranch(bundle, features, transcripts, opts);
  rep.resampled = resampled;
  return rep;
}

std::vector<TokenSequence> DecodeMt(const Matrix &features,
                                    const ModelBundle &bundle,
                                    DecodeStats *stats) {
  const WiringDescriptor &w = bundle.wiring();
  if (!w.HasMaskEncoder()) throw GeometryError("wiring has no mask encoder");
  Tape tape(false);
  GraphContext ctx{&tape, &bundle.params(), false};
  Var audio = bundle.EncodeAudio(ctx, features);
  std::vector<TokenSequence> out;
  for (int32_t m = 1; m <= w.num_channels; ++m) {
    Var enc = bundle.EncodeMask(ctx, audio, ChannelId(m, w.num_channels));
    out.push_back(bundle.DecodeEncoderOutput(enc.value(), stats));
  }
  return out;
}

TokenSequence DecodeSt(const Matrix &features, const ModelBundle &bundle,
                       DecodeStats *stats) {
  if (!bundle.wiring().HasDirectAudioPath())
    throw GeometryError("no direct audio decode path in mt-baseline wiring");
  Tape tape(false);
  GraphContext ctx{&tape, &bundle.params(), false};
  Var audio = bundle.EncodeAudio(ctx, features);
  return bundle.DecodeEncoderOutput(audio.value(), stats);
}

}  // namespace mtcascade
