// src/mt-sad.cc

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

#include "mtcascade/mt-sad.h"

#include <chrono>
#include <cmath>
#include <limits>

#include "mtcascade/checkpoint.h"
#include "mtcascade/optimizer.h"

namespace mtcascade {

namespace {

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
      .count();
}

RowVector Sigmoid(const Matrix &z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix().transpose();
}

}  // namespace

void ProbeModel::Validate() const {
  if (weights.rows() < 1 || weights.cols() != 1)
    throw GeometryError("probe weights must be D x 1, got " +
                        ShapeString(weights));
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
  if (insertion_layer < 0) throw ConfigError("negative insertion layer");
}

void ProbeConfig::Validate() const {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

const char *DecisionName(OverlapDecision d) {
  return d == OverlapDecision::kOverlapped ? "overlapped" : "single";
}

int32_t ResolveInsertionLayer(const ModelBundle &bundle, int32_t layer) {
  if (!bundle.wiring().HasMaskEncoder())
    throw GeometryError("probe needs a multi-talker bundle");
  int32_t depth = bundle.mask_depth();
  int32_t resolved = layer < 0 ? depth + layer : layer;
  if (resolved < 0 || resolved >= depth)
    throw GeometryError("insertion layer " + std::to_string(layer) +
                        " out of range for mask depth " + std::to_string(depth));
  return resolved;
}

Matrix MaskActivations(const ModelBundle &bundle, const Matrix &features,
                       const ChannelId &m, int32_t layer) {
  int32_t l = ResolveInsertionLayer(bundle, layer);
  Tape tape(false);
  GraphContext ctx{&tape, &bundle.params(), false};
  Var audio = bundle.EncodeAudio(ctx, features);
  return bundle.EncodeMaskLayers(ctx, audio, m)[l].value();
}

ProbeModel TrainProbeOnActivations(const std::vector<Matrix> &acts,
                                   const std::vector<RowVector> &labels,
                                   const ProbeConfig &cfg, int32_t layer,
                                   ProbeTrainStats *stats) {
  cfg.Validate();
  if (acts.empty()) throw DataError("no probe training data");
  if (acts.size() != labels.size())
    throw GeometryError("activation/label count mismatch: " +
                        std::to_string(acts.size()) + " vs " +
                        std::to_string(labels.size()));
  Eigen::Index d = acts[0].cols(), total = 0;
  for (size_t i = 0; i < acts.size(); ++i) {
    if (acts[i].cols() != d) throw GeometryError("activation width mismatch");
    if (acts[i].rows() != labels[i].size())
      throw GeometryError("label/frame length mismatch: " +
                          std::to_string(labels[i].size()) + " labels vs " +
                          std::to_string(acts[i].rows()) + " frames");
    total += acts[i].rows();
  }
  Matrix x(total, d);
  Matrix y(total, 1);
  for (size_t i = 0, r = 0; i < acts.size(); r += acts[i].rows(), ++i) {
    x.middleRows(r, acts[i].rows()) = acts[i];
    y.middleRows(r, acts[i].rows()) = labels[i].transpose();
  }

  ParamStore store;
  Rng rng(cfg.seed);
  Matrix w0(d, 1);
  for (Eigen::Index i = 0; i < d; ++i) w0(i, 0) = Real(0.01 * rng.Normal());
  Parameter &w = store.Add("probe.weight", w0);
  Parameter &b = store.Add("probe.bias", Matrix::Zero(1, 1));

  // Full-batch Adam on the mean binary cross-entropy.
  AdamOptions adam;
  adam.beta2 = 0.999;
  adam.epsilon = 1e-8;
  double best = std::numeric_limits<double>::infinity(), loss = 0.0;
  int32_t since_best = 0;
  int64_t step = 0;
  const Real inv_n = Real(1) / static_cast<Real>(total);
  for (; step < cfg.max_steps; ++step) {
    Matrix z = x * w.value;
    z.array() += b.value(0, 0);
    Matrix p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    // Stable log(1 + e^z) - y z.
    loss = 0.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      double zi = z(i, 0);
      loss += std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - y(i, 0) * zi;
    }
    loss /= static_cast<double>(total);
    Matrix dz = (p - y) * inv_n;
    w.grad = x.transpose() * dz;
    b.grad(0, 0) = dz.sum();
    AdamStep(&store, cfg.learning_rate, adam, step + 1);
    if (loss < best - cfg.plateau_tol) {
      best = loss;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      ++step;
      break;
    }
  }

  ProbeModel probe;
  probe.weights = w.value;
  probe.bias = b.value(0, 0);
  probe.insertion_layer = layer;
  probe.theta = cfg.theta;
  if (stats) {
    stats->steps = step;
    stats->final_loss = loss;
    Matrix z = x * probe.weights;
    z.array() += probe.bias;
    int64_t correct = 0;
    for (Eigen::Index i = 0; i < total; ++i) {
      double p = 1.0 / (1.0 + std::exp(-z(i, 0)));
      correct += ((p > cfg.theta) == (y(i, 0) > 0.5));
    }
    stats->train_accuracy = static_cast<double>(correct) / total;
  }
  return probe;
}

ProbeModel TrainProbe(const ModelBundle &bundle,
                      const std::vector<Example> &examples,
                      const ProbeConfig &cfg, ProbeTrainStats *stats) {
  cfg.Validate();
  int32_t layer = ResolveInsertionLayer(bundle, cfg.insertion_layer);
  const int32_t M = bundle.wiring().num_channels;
  std::vector<Matrix> acts;
  std::vector<RowVector> labels;
  for (const Example &ex : examples) {
    if (ex.activity.cols() < M)
      throw GeometryError("example '" + ex.id + "' has " +
                          std::to_string(ex.activity.cols()) +
                          " activity columns, need " + std::to_string(M));
    Tape tape(false);
    GraphContext ctx{&tape, &bundle.params(), false};
    Var audio = bundle.EncodeAudio(ctx, ex.features);
    for (int32_t m = 1; m <= M; ++m) {
      Matrix a = bundle.EncodeMaskLayers(ctx, audio, ChannelId(m, M))[layer].value();
      if (a.rows() != ex.activity.rows())
        throw GeometryError("label/frame length mismatch for '" + ex.id +
                            "': " + std::to_string(ex.activity.rows()) +
                            " labels vs " + std::to_string(a.rows()) + " frames");
      acts.push_back(std::move(a));
      labels.push_back(ex.activity.col(m - 1).transpose());
    }
  }
  return TrainProbeOnActivations(acts, labels, cfg, layer, stats);
}

ActivityTrack ApplyProbe(const ProbeModel &probe, const Matrix &activations,
                         double frame_rate) {
  probe.Validate();
  if (activations.cols() != probe.dim())
    throw GeometryError("probe expects " + std::to_string(probe.dim()) +
                        "-dim activations, got " + ShapeString(activations));
  Matrix z = activations * probe.weights;
  z.array() += probe.bias;
  ActivityTrack track;
  track.probs = Sigmoid(z);
  track.frame_rate = frame_rate;
  return track;
}

ActivityTrack InferActivity(const ModelBundle &bundle, const ProbeModel &probe,
                            const Matrix &features, const ChannelId &m,
                            double frame_rate) {
  return ApplyProbe(probe,
                    MaskActivations(bundle, features, m, probe.insertion_layer),
                    frame_rate);
}

OverlapEstimate EstimateOverlap(const ActivityTrack &track_1,
                                const ActivityTrack &track_2, double theta,
                                double threshold_s) {
  if (track_1.size() != track_2.size())
    throw GeometryError("activity length mismatch: " +
                        std::to_string(track_1.size()) + " vs " +
                        std::to_string(track_2.size()));
  if (track_1.frame_rate != track_2.frame_rate || !(track_1.frame_rate > 0))
    throw GeometryError("activity frame rates differ or are not positive");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
  OverlapEstimate est;
  est.threshold_s = threshold_s;
  for (int32_t t = 0; t < track_1.size(); ++t)
    est.co_active_frames += track_1.probs[t] > theta && track_2.probs[t] > theta;
  est.overlap_s = est.co_active_frames / track_1.frame_rate;
  est.decision = est.overlap_s > threshold_s ? OverlapDecision::kOverlapped
                                             : OverlapDecision::kSingle;
  return est;
}

double FrameAccuracy(const ActivityTrack &track, const RowVector &labels,
                     double theta) {
  if (track.size() != labels.size())
    throw GeometryError("label/frame length mismatch");
  if (track.size() == 0) return 1.0;
  int32_t correct = 0;
  for (int32_t t = 0; t < track.size(); ++t)
    correct += (track.probs[t] > theta) == (labels[t] > 0.5);
  return static_cast<double>(correct) / track.size();
}

ConditionedResult ConditionedDecode(const Matrix &features,
                                    const ModelBundle &bundle,
                                    const ProbeModel &probe, double frame_rate,
                                    double threshold_s) {
  if (bundle.wiring().kind != WiringKind::kMtCascade)
    throw GeometryError("conditioned decoding needs the cascade wiring");
  const int32_t M = bundle.wiring().num_channels;
  if (M != 2) throw GeometryError("conditioned decoding is defined for M = 2");
  ConditionedResult res;
  auto t0 = std::chrono::steady_clock::now();
  {
    int32_t layer = ResolveInsertionLayer(bundle, probe.insertion_layer);
    Tape tape(false);
    GraphContext ctx{&tape, &bundle.params(), false};
    Var audio = bundle.EncodeAudio(ctx, features);
    for (int32_t m = 1; m <= M; ++m)
      res.tracks.push_back(ApplyProbe(
          probe, bundle.EncodeMaskLayers(ctx, audio, ChannelId(m, M))[layer].value(),
          frame_rate));
  }
  res.estimate = EstimateOverlap(res.tracks[0], res.tracks[1], probe.theta,
                                 threshold_s);
  res.mode = res.estimate.decision;
  res.probe_seconds = Seconds(t0);
  auto t1 = std::chrono::steady_clock::now();
  if (res.mode == OverlapDecision::kOverlapped)
    res.outputs = DecodeMt(features, bundle, &res.decode_stats);
  else
    res.outputs = {DecodeSt(features, bundle, &res.decode_stats)};
  res.decode_seconds = Seconds(t1);
  return res;
}

void SaveProbe(const ProbeModel &probe, const std::string &path) {
  probe.Validate();
  ParamStore store;
  store.Add("probe.weight", probe.weights, false);
  store.Add("probe.bias", Matrix::Constant(1, 1, probe.bias), false);
  nlohmann::json meta = {{"probe",
                          {{"insertion_layer", probe.insertion_layer},
                           {"theta", probe.theta},
                           {"dim", probe.dim()}}}};
  SaveCheckpoint(store, meta, path);
}

ProbeModel LoadProbe(const std::string &path) {
  Checkpoint ckpt = ReadCheckpoint(path);
  if (!ckpt.wiring.contains("probe"))
    throw ConfigError("'" + path + "' is not a probe checkpoint");
  const auto &meta = ckpt.wiring["probe"];
  int32_t dim = meta.value("dim", 0);
  if (dim < 1) throw ConfigError("probe checkpoint has no dimension");
  ParamStore store;
  store.Add("probe.weight", Matrix::Zero(dim, 1), false);
  store.Add("probe.bias", Matrix::Zero(1, 1), false);
  LoadTensors(ckpt, &store, "probe.", true);
  ProbeModel probe;
  probe.weights = store.Get("probe.weight").value;
  probe.bias = store.Get("probe.bias").value(0, 0);
  probe.insertion_layer = meta.value("insertion_layer", 0);
  probe.theta = meta.value("theta", 0.5);
  probe.Validate();
  return probe;
}

void WriteActivityCsvHeader(std::ostream &os) { os << "utt_id,m,t,prob\n"; }

void WriteActivityCsv(std::ostream &os, const std::string &utt_id, int32_t m,
                      const ActivityTrack &track) {
  for (int32_t t = 0; t < track.size(); ++t)
    os << utt_id << ',' << m << ',' << t << ',' << track.probs[t] << '\n';
}

}  // namespace mtcascade
