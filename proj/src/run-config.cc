// src/run-config.cc

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

#include "mtcascade/run-config.h"

#include <fstream>
#include <functional>
#include <map>

namespace mtcascade {

namespace {

using nlohmann::json;
using Setter = std::function<void(const json &)>;

template <typename T>
Setter Bind(T *field) {
  return [field](const json &v) { *field = v.get<T>(); };
}

void ApplySection(const json &j, const std::string &section,
                  const std::map<std::string, Setter> &setters) {
  if (!j.is_object())
    throw ConfigError("config section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto s = setters.find(it.key());
    if (s == setters.end())
      throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
    try {
      s->second(it.value());
    } catch (const json::exception &e) {
      throw ConfigError("bad value for '" + section + "." + it.key() +
                        "': " + e.what());
    }
  }
}

std::map<std::string, Setter> EncoderSetters(EncoderConfig *e) {
  return {{"num_layers", Bind(&e->num_layers)},
          {"dim", Bind(&e->block.dim)},
          {"num_heads", Bind(&e->block.num_heads)},
          {"ff_mult", Bind(&e->block.ff_mult)},
          {"conv_kernel", Bind(&e->block.conv_kernel)},
          {"max_frames", Bind(&e->max_frames)},
          {"positional", Bind(&e->positional)}};
}

}  // namespace

void RunConfig::SyncDerived() {
  wiring.audio_encoder.input_dim = frontend.mel_bins * frontend.stack_factor;
  wiring.decoder.vocab_size = corpus.tones.vocab_size;
  corpus.tones.sample_rate = frontend.sample_rate;
  if (wiring.kind == WiringKind::kSingleTalker) wiring.num_channels = 1;
}

void RunConfig::Validate() const {
  if (profile != "toy" && profile != "full")
    throw ConfigError("profile must be 'toy' or 'full'");
  frontend.Validate();
  corpus.Validate();
  if (n_single < 0 || n_overlap < 0)
    throw ConfigError("utterance counts must be non-negative");
  wiring.Validate();
  train.Validate();
  probe.Validate();
  if (!(threshold_s >= 0)) throw ConfigError("threshold_s must be >= 0");
}

json RunConfig::ToJson() const {
  const ScheduleConfig &s = train.schedule;
  return {{"profile", profile},
          {"seed", seed},
          {"paths",
           {{"data_dir", data_dir},
            {"checkpoint_dir", checkpoint_dir},
            {"report_dir", report_dir}}},
          {"frontend",
           {{"sample_rate", frontend.sample_rate},
            {"mel_bins", frontend.mel_bins},
            {"window_ms", frontend.window_ms},
            {"hop_ms", frontend.hop_ms},
            {"fft_size", frontend.fft_size},
            {"low_hz", frontend.low_hz},
            {"high_hz", frontend.high_hz},
            {"floor_epsilon", frontend.floor_epsilon},
            {"stack_factor", frontend.stack_factor}}},
          {"corpus",
           {{"n_single", n_single},
            {"n_overlap", n_overlap},
            {"vocab_size", corpus.tones.vocab_size},
            {"token_duration", corpus.tones.token_duration},
            {"min_tokens", corpus.min_tokens},
            {"max_tokens", corpus.max_tokens},
            {"overlap_min_s", corpus.overlap_min_s},
            {"overlap_max_s", corpus.overlap_max_s},
            {"toy_max_overlap_s", corpus.toy_max_overlap_s}}},
          {"model", wiring.ToJson()},
          {"train",
           {{"steps", train.steps},
            {"batch_size", train.batch_size},
            {"warmup_steps", s.warmup_steps},
            {"peak_lr", s.peak_lr},
            {"total_steps", s.total_steps},
            {"floor_lr", s.floor_lr},
            {"grad_clip", train.grad_clip}}},
          {"probe",
           {{"insertion_layer", probe.insertion_layer},
            {"theta", probe.theta},
            {"max_steps", probe.max_steps},
            {"learning_rate", probe.learning_rate}}},
          {"threshold_s", threshold_s}};
}

RunConfig MakeProfile(const std::string &name) {
  RunConfig cfg;
  cfg.profile = name;
  if (name == "toy") {
    // Dims match the layer defaults; a faster schedule fits desk budgets.
    cfg.wiring.mask_encoder.positional = false;
    // Keeps most single-speaker items on the mask path at desk-scale step
    // counts.
    cfg.wiring.lambda = 0.25;
    cfg.train.steps = 4000;
    cfg.train.schedule.warmup_steps = 400;
    cfg.train.schedule.total_steps = 4000;
    cfg.train.schedule.peak_lr = 3e-3;
    cfg.train.schedule.floor_lr = 1.5e-4;
  } else if (name == "full") {
    cfg.frontend.sample_rate = 16000;
    cfg.corpus.toy_max_overlap_s = cfg.corpus.overlap_max_s;
    cfg.wiring.audio_encoder.num_layers = 17;
    cfg.wiring.audio_encoder.block = {512, 8, 4, 7};
    cfg.wiring.audio_encoder.max_frames = 2048;
    cfg.wiring.mask_encoder.num_layers = 8;
    cfg.wiring.mask_encoder.block = {512, 8, 4, 7};
    cfg.wiring.mask_encoder.max_frames = 2048;
    cfg.wiring.mask_encoder.positional = false;
    cfg.wiring.decoder.embed_dim = 512;
    cfg.wiring.decoder.hidden = 2048;
    cfg.wiring.decoder.num_layers = 2;
    cfg.wiring.decoder.bidirectional = true;
    cfg.wiring.decoder.joint_dim = 640;
    cfg.train.steps = 300000;
    cfg.train.schedule = ScheduleConfig{};
  } else {
    throw ConfigError("unknown profile '" + name + "'");
  }
  cfg.SyncDerived();
  return cfg;
}

void ApplyConfigJson(const json &j, RunConfig *cfg) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string kind, profile;
  std::map<std::string, Setter> top = {
      {"profile", Bind(&profile)},
      {"seed", Bind(&cfg->seed)},
      {"threshold_s", Bind(&cfg->threshold_s)},
      {"paths",
       [cfg](const json &v) {
         ApplySection(v, "paths",
                      {{"data_dir", Bind(&cfg->data_dir)},
                       {"checkpoint_dir", Bind(&cfg->checkpoint_dir)},
                       {"report_dir", Bind(&cfg->report_dir)}});
       }},
      {"frontend",
       [cfg](const json &v) {
         FrontendConfig &f = cfg->frontend;
         ApplySection(v, "frontend",
                      {{"sample_rate", Bind(&f.sample_rate)},
                       {"mel_bins", Bind(&f.mel_bins)},
                       {"window_ms", Bind(&f.window_ms)},
                       {"hop_ms", Bind(&f.hop_ms)},
                       {"fft_size", Bind(&f.fft_size)},
                       {"low_hz", Bind(&f.low_hz)},
                       {"high_hz", Bind(&f.high_hz)},
                       {"floor_epsilon", Bind(&f.floor_epsilon)},
                       {"stack_factor", Bind(&f.stack_factor)}});
       }},
      {"corpus",
       [cfg](const json &v) {
         CorpusConfig &c = cfg->corpus;
         ApplySection(v, "corpus",
                      {{"n_single", Bind(&cfg->n_single)},
                       {"n_overlap", Bind(&cfg->n_overlap)},
                       {"vocab_size", Bind(&c.tones.vocab_size)},
                       {"token_duration", Bind(&c.tones.token_duration)},
                       {"min_tokens", Bind(&c.min_tokens)},
                       {"max_tokens", Bind(&c.max_tokens)},
                       {"overlap_min_s", Bind(&c.overlap_min_s)},
                       {"overlap_max_s", Bind(&c.overlap_max_s)},
                       {"toy_max_overlap_s", Bind(&c.toy_max_overlap_s)},
                       {"gain_b", Bind(&c.gain_b)}});
       }},
      {"model",
       [cfg, &kind](const json &v) {
         WiringDescriptor &w = cfg->wiring;
         ApplySection(
             v, "model",
             {{"kind", Bind(&kind)},
              {"num_channels", Bind(&w.num_channels)},
              {"lambda", Bind(&w.lambda)},
              {"audio_encoder",
               [&w](const json &e) {
                 ApplySection(e, "model.audio_encoder",
                              EncoderSetters(&w.audio_encoder));
               }},
              {"mask_encoder",
               [&w](const json &e) {
                 ApplySection(e, "model.mask_encoder",
                              EncoderSetters(&w.mask_encoder));
               }},
              {"decoder", [&w](const json &d) {
                 ApplySection(d, "model.decoder",
                              {{"embed_dim", Bind(&w.decoder.embed_dim)},
                               {"hidden", Bind(&w.decoder.hidden)},
                               {"num_layers", Bind(&w.decoder.num_layers)},
                               {"bidirectional", Bind(&w.decoder.bidirectional)},
                               {"joint_dim", Bind(&w.decoder.joint_dim)}});
               }}});
       }},
      {"train",
       [cfg](const json &v) {
         TrainConfig &t = cfg->train;
         ApplySection(v, "train",
                      {{"steps", Bind(&t.steps)},
                       {"batch_size", Bind(&t.batch_size)},
                       {"warmup_steps", Bind(&t.schedule.warmup_steps)},
                       {"peak_lr", Bind(&t.schedule.peak_lr)},
                       {"total_steps", Bind(&t.schedule.total_steps)},
                       {"floor_lr", Bind(&t.schedule.floor_lr)},
                       {"grad_clip", Bind(&t.grad_clip)},
                       {"threads", Bind(&t.threads)}});
       }},
      {"probe", [cfg](const json &v) {
         ProbeConfig &p = cfg->probe;
         ApplySection(v, "probe",
                      {{"insertion_layer", Bind(&p.insertion_layer)},
                       {"theta", Bind(&p.theta)},
                       {"max_steps", Bind(&p.max_steps)},
                       {"learning_rate", Bind(&p.learning_rate)}});
       }}};
  ApplySection(j, "config", top);
  if (!profile.empty() && profile != cfg->profile)
    throw ConfigError("config profile '" + profile +
                      "' differs from the active profile '" + cfg->profile + "'");
  if (!kind.empty()) cfg->wiring.kind = ParseWiring(kind);
  cfg->SyncDerived();
}

RunConfig LoadRunConfig(const std::string &path, const std::string &profile) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  std::string name = profile;
  if (name.empty()) name = j.value("profile", std::string("toy"));
  RunConfig cfg = MakeProfile(name);
  j.erase("profile");
  ApplyConfigJson(j, &cfg);
  return cfg;
}

}  // namespace mtcascade
