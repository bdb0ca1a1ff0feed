// src/trainer.cc

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

#include "mtcascade/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace mtcascade {

Example MakeExample(const OverlapMixture &mix, const std::string &id,
                    const FrontendConfig &frontend, int32_t num_channels) {
  Example ex;
  ex.id = id;
  ex.kind = mix.overlapped() ? UtteranceKind::kOverlapped : UtteranceKind::kSingle;
  ex.features = ComputeFeatures(mix.mixed, frontend).frames;
  ex.transcripts.push_back(mix.transcript_1);
  if (num_channels > 1)
    ex.transcripts.push_back(mix.transcript_2);
  else if (ex.kind == UtteranceKind::kOverlapped)
    throw GeometryError("overlapped item '" + id + "' needs M >= 2");
  int32_t labels_m = std::max(num_channels, 2);
  ex.activity = DeriveFrameLabels(mix, frontend, labels_m)
                    .labels.leftCols(num_channels);
  ex.overlap_s = mix.overlap.length();
  return ex;
}

std::vector<Example> LoadExamples(const DatasetManifest &manifest,
                                  const FrontendConfig &frontend,
                                  int32_t num_channels) {
  std::vector<Example> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry &e : manifest.entries)
    out.push_back(MakeExample(LoadMixture(manifest, e), e.id, frontend,
                              num_channels));
  return out;
}

std::vector<Example> SynthesizeExamples(const CorpusConfig &corpus,
                                        int32_t n_single, int32_t n_overlap,
                                        uint64_t seed,
                                        const FrontendConfig &frontend,
                                        int32_t num_channels) {
  std::vector<ManifestEntry> entries;
  std::vector<OverlapMixture> mixes =
      GenerateMixtures(corpus, n_single, n_overlap, seed, &entries);
  std::vector<Example> out;
  out.reserve(mixes.size());
  for (size_t i = 0; i < mixes.size(); ++i)
    out.push_back(MakeExample(mixes[i], entries[i].id, frontend, num_channels));
  return out;
}

void FeatureStats(const std::vector<Example> &examples, RowVector *mean,
                  RowVector *stddev) {
  if (examples.empty()) throw DataError("no examples for feature stats");
  Eigen::Index d = examples[0].features.cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d), sq = sum;
  double n = 0;
  for (const Example &ex : examples) {
    if (ex.features.cols() != d) throw GeometryError("feature width mismatch");
    Eigen::MatrixXd f = ex.features.cast<double>();
    sum += f.colwise().sum();
    sq += f.array().square().matrix().colwise().sum();
    n += static_cast<double>(f.rows());
  }
  Eigen::RowVectorXd mu = sum / n;
  Eigen::RowVectorXd var = (sq / n).array() - mu.array().square();
  *mean = mu.cast<Real>();
  *stddev = var.cwiseMax(0.0).cwiseSqrt().cast<Real>();
}

void TrainConfig::Validate() const {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(grad_clip > 0)) throw ConfigError("grad_clip must be positive");
  schedule.Validate();
}

std::string StepMetrics::branch() const {
  if (audio_items > 0 && mask_items > 0) return "mixed";
  return audio_items > 0 ? "audio" : "mask";
}

int32_t ResolveThreads(int32_t requested) {
  if (requested > 0) return requested;
  if (const char *env = std::getenv("MTCASCADE_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

namespace {

LossReport ForwardItem(const ModelBundle &bundle, const Example &ex,
                       uint64_t item_seed, const ForwardOptions &opts) {
  switch (bundle.wiring().kind) {
    case WiringKind::kSingleTalker:
      return ForwardSingleTalker(bundle, ex.features, ex.transcripts[0], opts);
    case WiringKind::kMtBaseline:
      return ForwardMtBaseline(bundle, ex.features, ex.transcripts, opts);
    case WiringKind::kMtCascade: {
      Rng rng(item_seed);
      return ForwardMtCascade(bundle, ex.features, ex.transcripts, ex.kind,
                              &rng, opts);
    }
  }
  throw ConfigError("unknown wiring");
}

}  // namespace

std::vector<StepMetrics> Train(ModelBundle *bundle,
                               const std::vector<Example> &data,
                               const TrainConfig &cfg, std::ostream *metrics,
                               const StepCallback &callback) {
  cfg.Validate();
  const WiringDescriptor &w = bundle->wiring();
  std::vector<size_t> pool;
  for (size_t i = 0; i < data.size(); ++i) {
    if (w.kind == WiringKind::kSingleTalker && cfg.single_only_for_st &&
        data[i].kind == UtteranceKind::kOverlapped)
      continue;
    pool.push_back(i);
  }
  if (pool.empty()) throw DataError("no usable training examples");

  if (!w.pretrained_audio) {
    RowVector mean, stddev;
    FeatureStats(data, &mean, &stddev);
    bundle->SetFeatureStats(mean, stddev);
  }

  const int32_t threads = ResolveThreads(cfg.threads);
  Rng order_rng(DeriveSeed(cfg.seed, 0x5eed));
  std::vector<size_t> order = pool;
  size_t cursor = order.size();
  ParamStore &store = bundle->params();
  std::vector<StepMetrics> log;
  log.reserve(cfg.steps);
  const Real inv_b = Real(1) / static_cast<Real>(cfg.batch_size);

  for (int64_t step = 1; step <= cfg.steps; ++step) {
    std::vector<size_t> batch(cfg.batch_size);
    for (int32_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        for (size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[order_rng.UniformInt(0, static_cast<int64_t>(i) - 1)]);
        cursor = 0;
      }
      batch[b] = order[cursor++];
    }

    std::vector<GradientBuffer> grads;
    grads.reserve(cfg.batch_size);
    for (int32_t b = 0; b < cfg.batch_size; ++b) grads.emplace_back(store);
    std::vector<LossReport> reports(cfg.batch_size);
    auto run = [&](int32_t b) {
      ForwardOptions opts;
      opts.grads = &grads[b];
      opts.grad_scale = inv_b;
      uint64_t seed = DeriveSeed(cfg.seed, static_cast<uint64_t>(step) *
                                               1000003ull + b);
      reports[b] = ForwardItem(*bundle, data[batch[b]], seed, opts);
    };
    if (threads <= 1) {
      for (int32_t b = 0; b < cfg.batch_size; ++b) run(b);
    } else {
      std::vector<std::thread> pool_threads;
      for (int32_t t = 0; t < threads; ++t)
        pool_threads.emplace_back([&, t] {
          for (int32_t b = t; b < cfg.batch_size; b += threads) run(b);
        });
      for (auto &th : pool_threads) th.join();
    }

    StepMetrics m;
    m.step = step;
    for (int32_t b = 0; b < cfg.batch_size; ++b) {
      grads[b].AddTo(&store);
      m.loss += reports[b].total * inv_b;
      if (reports[b].branch_taken == Branch::kAudio)
        ++m.audio_items;
      else
        ++m.mask_items;
      if (reports[b].resampled) ++m.resampled;
    }
    if (!std::isfinite(m.loss))
      throw DataError("non-finite training loss at step " + std::to_string(step));
    m.grad_norm = ClipGradNorm(&store, cfg.grad_clip);
    m.lr = LearningRateAt(step, cfg.schedule);
    AdamStep(&store, m.lr, cfg.adam, step);

    if (metrics) {
      nlohmann::json j = {{"step", m.step},         {"L_t", m.loss},
                          {"branch", m.branch()},   {"lr", m.lr},
                          {"grad_norm", m.grad_norm},
                          {"audio_items", m.audio_items},
                          {"mask_items", m.mask_items},
                          {"resampled", m.resampled}};
      *metrics << j.dump() << '\n';
    }
    if (callback) callback(m);
    log.push_back(m);
  }
  return log;
}

double MeanLoss(const ModelBundle &bundle, const std::vector<Example> &data) {
  if (data.empty()) throw DataError("no examples");
  double sum = 0;
  for (const Example &ex : data) {
    if (bundle.wiring().kind == WiringKind::kSingleTalker)
      sum += ForwardSingleTalker(bundle, ex.features, ex.transcripts[0]).total;
    else
      sum += ForwardMtBaseline(bundle, ex.features, ex.transcripts).total;
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace mtcascade
