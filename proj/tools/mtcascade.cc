// tools/mtcascade.cc

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

// Command-line driver: simulate, pretrain, train, probe-train, decode,
// evaluate. Logs are JSON lines on stderr; artifacts go to disk.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtcascade/eval-harness.h"
#include "mtcascade/run-config.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mtcascade {
namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kGeometry = 4 };

void Log(json event) { std::cerr << event.dump() << std::endl; }

// Options common to every subcommand.
struct CommonFlags {
  std::string config_path;
  std::string profile;
  std::optional<uint64_t> seed;
  std::optional<int32_t> threads;

  void Register(CLI::App *app) {
    app->add_option("--config", config_path, "JSON run config; flags override it");
    app->add_option("--profile", profile, "Defaults profile: toy or full")
        ->check(CLI::IsMember({"toy", "full"}));
    app->add_option("--seed", seed, "Seed for every random draw of this stage");
    app->add_option("--threads", threads,
                    "Worker threads (default: MTCASCADE_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
  }

  RunConfig Resolve() const {
    RunConfig cfg = config_path.empty()
                        ? MakeProfile(profile.empty() ? "toy" : profile)
                        : LoadRunConfig(config_path, profile);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.train.threads = *threads;
    return cfg;
  }
};

void EnsureParent(const std::string &path) {
  fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

std::ofstream OpenOut(const std::string &path) {
  EnsureParent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  return os;
}

std::vector<Example> LoadManifestExamples(const std::string &path,
                                          const RunConfig &cfg,
                                          int32_t num_channels) {
  DatasetManifest manifest = ReadManifest(path);
  Log({{"event", "load_manifest"},
       {"path", path},
       {"entries", manifest.entries.size()}});
  return LoadExamples(manifest, cfg.frontend, std::max(num_channels, 2));
}

void RunTraining(ModelBundle *bundle, const std::vector<Example> &data,
                 const RunConfig &cfg, const std::string &out,
                 const std::string &metrics_path) {
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  std::ofstream metrics = OpenOut(metrics_path);
  Log({{"event", "train_start"},
       {"wiring", WiringName(bundle->wiring().kind)},
       {"steps", tc.steps},
       {"examples", data.size()},
       {"threads", ResolveThreads(tc.threads)},
       {"parameters", bundle->params().NumValues()}});
  Train(bundle, data, tc, &metrics, [&](const StepMetrics &m) {
    if (m.step % 100 == 0 || m.step == tc.steps)
      Log({{"event", "step"}, {"step", m.step}, {"L_t", m.loss}, {"lr", m.lr}});
  });
  EnsureParent(out);
  bundle->Save(out);
  Log({{"event", "saved"}, {"checkpoint", out}, {"metrics", metrics_path}});
}

std::string DefaultMetrics(const std::string &out) { return out + ".metrics.jsonl"; }

int Simulate(const CommonFlags &common, const std::optional<int32_t> &n_single,
             const std::optional<int32_t> &n_overlap,
             const std::optional<std::string> &out_dir, const std::string &split) {
  RunConfig cfg = common.Resolve();
  if (n_single) cfg.n_single = *n_single;
  if (n_overlap) cfg.n_overlap = *n_overlap;
  if (out_dir) cfg.data_dir = *out_dir;
  cfg.Validate();
  DatasetManifest m = BuildDataset(cfg.corpus, cfg.n_single, cfg.n_overlap,
                                   cfg.seed, cfg.data_dir, split);
  Log({{"event", "simulate"},
       {"manifest", (fs::path(cfg.data_dir) / (split + ".jsonl")).string()},
       {"entries", m.entries.size()},
       {"overlap_scale", m.overlap_scale}});
  return kOk;
}

}  // namespace
}  // namespace mtcascade

int main(int argc, char **argv) {
  using namespace mtcascade;
  CLI::App app{"Multi-talker transducer toolkit"};
  app.require_subcommand(1);

  CommonFlags common;

  // simulate
  auto *sim = app.add_subcommand("simulate", "Generate a synthetic overlapped corpus");
  common.Register(sim);
  std::optional<int32_t> n_single, n_overlap;
  std::optional<std::string> sim_out;
  std::string split = "train";
  sim->add_option("--n-single", n_single, "Single-speaker utterances")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--n-overlap", n_overlap, "Overlapped two-speaker utterances")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--out-dir", sim_out, "Output directory (default: paths.data_dir)");
  sim->add_option("--split", split, "Split name; the manifest is <out-dir>/<split>.jsonl");

  // pretrain / train
  std::string manifest, out, metrics_path, init_audio_from, wiring_name;
  std::optional<int64_t> steps;
  std::optional<double> lambda;
  bool freeze_audio = false;
  auto *pre = app.add_subcommand("pretrain", "Train the single-talker model");
  common.Register(pre);
  pre->add_option("--manifest", manifest, "Training manifest")->required();
  pre->add_option("--out", out, "Output checkpoint")->required();
  pre->add_option("--metrics", metrics_path, "JSON-lines metrics (default: <out>.metrics.jsonl)");
  pre->add_option("--steps", steps, "Optimizer steps")->check(CLI::NonNegativeNumber);

  auto *train = app.add_subcommand("train", "Train a multi-talker model");
  common.Register(train);
  train->add_option("--manifest", manifest, "Training manifest")->required();
  train->add_option("--out", out, "Output checkpoint")->required();
  train->add_option("--metrics", metrics_path, "JSON-lines metrics (default: <out>.metrics.jsonl)");
  train->add_option("--steps", steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
  train->add_option("--wiring", wiring_name, "single-talker, mt-baseline or mt-cascade")
      ->check(CLI::IsMember({"single-talker", "mt-baseline", "mt-cascade"}));
  train->add_option("--lambda", lambda, "Audio-branch probability for mt-cascade")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--init-audio-from", init_audio_from,
                    "Checkpoint whose audio_encoder.* tensors initialize this model");
  train->add_flag("--freeze-audio", freeze_audio, "Keep the audio encoder fixed");

  // probe-train
  std::string model_path, probe_path, activity_csv;
  std::optional<int32_t> layer;
  std::optional<double> theta;
  std::optional<int64_t> probe_steps;
  auto *probe_cmd = app.add_subcommand("probe-train", "Train the speaker-activity probe");
  common.Register(probe_cmd);
  probe_cmd->add_option("--model", model_path, "Frozen multi-talker checkpoint")
      ->required();
  probe_cmd->add_option("--manifest", manifest, "Training manifest")->required();
  probe_cmd->add_option("--out", out, "Output probe checkpoint")->required();
  probe_cmd->add_option("--metrics", metrics_path, "JSON-lines metrics (default: <out>.metrics.jsonl)");
  probe_cmd->add_option("--layer", layer, "Mask-encoder block index; negative counts from the end");
  probe_cmd->add_option("--theta", theta, "Activity threshold")->check(CLI::Range(0.0, 1.0));
  probe_cmd->add_option("--steps", probe_steps, "Maximum probe steps")
      ->check(CLI::NonNegativeNumber);
  probe_cmd->add_option("--activity-csv", activity_csv,
                        "Write utt_id,m,t,prob for the training manifest");

  // decode
  std::string mode_name = "mt", wav_path, hyp_out;
  auto *dec = app.add_subcommand("decode", "Greedy-decode a manifest or a WAV file");
  common.Register(dec);
  dec->add_option("--model", model_path, "Checkpoint")->required();
  auto *dec_manifest = dec->add_option("--manifest", manifest, "Manifest to decode");
  dec->add_option("--wav", wav_path, "Single WAV file to decode")
      ->excludes(dec_manifest);
  dec->add_option("--mode", mode_name, "st, mt or conditioned")
      ->check(CLI::IsMember({"st", "mt", "conditioned"}));
  dec->add_option("--probe", probe_path, "Probe checkpoint (conditioned mode)");
  dec->add_option("--out", hyp_out, "JSON-lines hypotheses (default: stdout)");

  // evaluate
  std::string report_path, scatter_path, gnuplot_path, model_name;
  auto *eval = app.add_subcommand("evaluate", "Score a model on a manifest");
  common.Register(eval);
  eval->add_option("--model", model_path, "Checkpoint")->required();
  eval->add_option("--manifest", manifest, "Evaluation manifest")->required();
  eval->add_option("--mode", mode_name, "st, mt or conditioned")
      ->check(CLI::IsMember({"st", "mt", "conditioned"}));
  eval->add_option("--probe", probe_path, "Probe checkpoint");
  eval->add_option("--report", report_path, "Report JSON (default: <report_dir>/<name>-<mode>.json)");
  eval->add_option("--scatter", scatter_path, "Overlap scatter CSV (needs --probe)");
  eval->add_option("--gnuplot", gnuplot_path, "Also write a gnuplot script for the scatter");
  eval->add_option("--name", model_name, "Model label in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App *failed = &app;
    for (const CLI::App *sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return kConfig;
  }

  try {
    if (sim->parsed()) return Simulate(common, n_single, n_overlap, sim_out, split);

    if (pre->parsed() || train->parsed()) {
      RunConfig cfg = common.Resolve();
      if (steps) {
        // Keep the profile's warmup fraction.
        ScheduleConfig &sc = cfg.train.schedule;
        double warmup_frac = static_cast<double>(sc.warmup_steps) / sc.total_steps;
        cfg.train.steps = *steps;
        sc.total_steps = std::max<int64_t>(*steps, 1);
        sc.warmup_steps = static_cast<int64_t>(warmup_frac * sc.total_steps);
      }
      if (pre->parsed()) {
        cfg.wiring.kind = WiringKind::kSingleTalker;
      } else {
        if (!wiring_name.empty()) cfg.wiring.kind = ParseWiring(wiring_name);
        if (cfg.wiring.kind != WiringKind::kSingleTalker &&
            cfg.wiring.num_channels < 2)
          cfg.wiring.num_channels = 2;
        if (lambda) cfg.wiring.lambda = *lambda;
        cfg.wiring.freeze_audio = freeze_audio;
      }
      cfg.SyncDerived();
      cfg.Validate();
      auto data = LoadManifestExamples(manifest, cfg, cfg.wiring.num_channels);
      ModelBundle bundle(cfg.wiring, DeriveSeed(cfg.seed, 1));
      if (!init_audio_from.empty()) {
        size_t n = bundle.LoadAudioEncoder(ReadCheckpoint(init_audio_from));
        size_t mask = 0;
        for (size_t i = 0; i < bundle.params().size(); ++i)
          mask += bundle.params().at(i).name.rfind("mask_encoder.", 0) == 0;
        Log({{"event", "init_audio"},
             {"from", init_audio_from},
             {"audio_tensors_loaded", n},
             {"mask_tensors_fresh", mask}});
      }
      RunTraining(&bundle, data, cfg, out,
                  metrics_path.empty() ? DefaultMetrics(out) : metrics_path);
      return kOk;
    }

    if (probe_cmd->parsed()) {
      RunConfig cfg = common.Resolve();
      if (layer) cfg.probe.insertion_layer = *layer;
      if (theta) cfg.probe.theta = *theta;
      if (probe_steps) cfg.probe.max_steps = *probe_steps;
      cfg.probe.seed = DeriveSeed(cfg.seed, 2);
      cfg.probe.Validate();
      ModelBundle bundle = ModelBundle::Load(model_path);
      auto data = LoadManifestExamples(manifest, cfg, bundle.wiring().num_channels);
      ProbeTrainStats stats;
      ProbeModel probe = TrainProbe(bundle, data, cfg.probe, &stats);
      EnsureParent(out);
      SaveProbe(probe, out);
      json summary = {{"event", "probe_trained"},
                      {"steps", stats.steps},
                      {"loss", stats.final_loss},
                      {"train_accuracy", stats.train_accuracy},
                      {"insertion_layer", probe.insertion_layer},
                      {"probe", out}};
      OpenOut(metrics_path.empty() ? DefaultMetrics(out) : metrics_path)
          << summary.dump() << '\n';
      Log(summary);
      if (!activity_csv.empty()) {
        std::ofstream csv = OpenOut(activity_csv);
        WriteActivityCsvHeader(csv);
        double rate = cfg.frontend.FrameRate();
        for (const Example &ex : data)
          for (int32_t m = 1; m <= 2; ++m)
            WriteActivityCsv(csv, ex.id, m,
                             InferActivity(bundle, probe, ex.features,
                                           ChannelId(m, 2), rate));
      }
      return kOk;
    }

    if (dec->parsed()) {
      RunConfig cfg = common.Resolve();
      ModelBundle bundle = ModelBundle::Load(model_path);
      EvalMode mode = ParseEvalMode(mode_name);
      std::optional<ProbeModel> probe;
      if (!probe_path.empty()) probe = LoadProbe(probe_path);
      if (mode == EvalMode::kConditioned && !probe)
        throw ConfigError("conditioned decoding needs --probe");
      if (manifest.empty() && wav_path.empty())
        throw ConfigError("decode needs --manifest or --wav");
      std::vector<std::pair<std::string, Matrix>> inputs;
      if (!wav_path.empty()) {
        inputs.emplace_back(fs::path(wav_path).stem().string(),
                            ComputeFeatures(ReadWav(wav_path), cfg.frontend).frames);
      } else {
        for (Example &ex : LoadManifestExamples(manifest, cfg, 2))
          inputs.emplace_back(ex.id, std::move(ex.features));
      }
      std::ofstream file;
      if (!hyp_out.empty()) file = OpenOut(hyp_out);
      std::ostream &os = hyp_out.empty() ? std::cout : file;
      for (const auto &[id, feats] : inputs) {
        json row = {{"id", id}, {"mode", mode_name}};
        if (mode == EvalMode::kSt) {
          row["hyps"] = {DecodeSt(feats, bundle)};
        } else if (mode == EvalMode::kMt) {
          row["hyps"] = DecodeMt(feats, bundle);
        } else {
          ConditionedResult c = ConditionedDecode(feats, bundle, *probe,
                                                  cfg.frontend.FrameRate(),
                                                  cfg.threshold_s);
          row["hyps"] = c.outputs;
          row["dispatch"] = DecisionName(c.mode);
          row["estimated_overlap_s"] = c.estimate.overlap_s;
          row["probe_seconds"] = c.probe_seconds;
          row["decode_seconds"] = c.decode_seconds;
        }
        os << row.dump() << '\n';
      }
      return kOk;
    }

    if (eval->parsed()) {
      RunConfig cfg = common.Resolve();
      ModelBundle bundle = ModelBundle::Load(model_path);
      std::optional<ProbeModel> probe;
      if (!probe_path.empty()) probe = LoadProbe(probe_path);
      auto data = LoadManifestExamples(manifest, cfg, 2);
      EvalOptions opts;
      opts.model_name = model_name.empty() ? fs::path(model_path).stem().string()
                                           : model_name;
      opts.frame_rate = cfg.frontend.FrameRate();
      opts.threshold_s = cfg.threshold_s;
      WerReport rep = Evaluate(bundle, probe ? &*probe : nullptr, data,
                               ParseEvalMode(mode_name), opts);
      if (report_path.empty())
        report_path = (fs::path(cfg.report_dir) /
                       (opts.model_name + "-" + mode_name + ".json"))
                          .string();
      OpenOut(report_path) << rep.ToJson().dump(2) << '\n';
      Log({{"event", "evaluate"}, {"report", report_path}, {"summary", TableJson({rep})}});
      if (!scatter_path.empty()) {
        if (!probe) throw ConfigError("--scatter needs --probe");
        std::ofstream csv = OpenOut(scatter_path);
        WriteScatterCsv(rep, csv);
        if (!gnuplot_path.empty()) {
          std::ofstream gp = OpenOut(gnuplot_path);
          WriteGnuplotScript(scatter_path,
                             fs::path(scatter_path).replace_extension(".png").string(),
                             gp);
        }
      }
      return kOk;
    }
  } catch (const ConfigError &e) {
    Log({{"event", "error"}, {"kind", "config"}, {"message", e.what()}});
    return kConfig;
  } catch (const IoError &e) {
    Log({{"event", "error"}, {"kind", "io"}, {"message", e.what()}});
    return kIo;
  } catch (const DataError &e) {
    Log({{"event", "error"}, {"kind", "data"}, {"message", e.what()}});
    return kIo;
  } catch (const GeometryError &e) {
    Log({{"event", "error"}, {"kind", "geometry"}, {"message", e.what()}});
    return kGeometry;
  } catch (const std::exception &e) {
    Log({{"event", "error"}, {"kind", "internal"}, {"message", e.what()}});
    return kFailure;
  }
  return kFailure;
}
