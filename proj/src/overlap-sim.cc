// src/overlap-sim.cc

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

#include "mtcascade/overlap-sim.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mtcascade {

namespace fs = std::filesystem;

Span Intersect(const Span &a, const Span &b) {
  Span s{std::max(a.start, b.start), std::min(a.end, b.end)};
  if (s.end < s.start) s.end = s.start;
  return s;
}

OverlapMixture MixOverlap(const SourceUtterance &a, const SourceUtterance &b,
                          double target_overlap_s, double gain_b) {
  if (a.wave.sample_rate != b.wave.sample_rate)
    throw DataError("mix_overlap: sample rates differ (" +
                    std::to_string(a.wave.sample_rate) + " vs " +
                    std::to_string(b.wave.sample_rate) + ")");
  const int32_t sr = a.wave.sample_rate;
  const int64_t len_a = static_cast<int64_t>(a.wave.samples.size());
  const int64_t len_b = static_cast<int64_t>(b.wave.samples.size());
  const int64_t overlap = static_cast<int64_t>(std::llround(target_overlap_s * sr));
  if (target_overlap_s < 0.0 || overlap > std::min(len_a, len_b))
    throw DataError("mix_overlap: target overlap " +
                    std::to_string(target_overlap_s) +
                    " s exceeds the shorter utterance");
  const int64_t offset = len_a - overlap;
  const int64_t total = std::max(len_a, offset + len_b);
  OverlapMixture m;
  m.mixed.sample_rate = sr;
  m.mixed.samples.assign(total, 0.0f);
  for (int64_t i = 0; i < len_a; ++i) m.mixed.samples[i] = a.wave.samples[i];
  const float g = static_cast<float>(gain_b);
  for (int64_t i = 0; i < len_b; ++i)
    m.mixed.samples[offset + i] = m.mixed.samples[offset + i] + g * b.wave.samples[i];
  m.transcript_1 = a.tokens;
  m.transcript_2 = b.tokens;
  m.span_1 = {0.0, static_cast<double>(len_a) / sr};
  m.span_2 = {static_cast<double>(offset) / sr,
              static_cast<double>(offset + len_b) / sr};
  m.overlap = Intersect(m.span_1, m.span_2);
  return m;
}

OverlapMixture SingleSpeakerMixture(const SourceUtterance &a) {
  OverlapMixture m;
  m.mixed = a.wave;
  m.transcript_1 = a.tokens;
  m.span_1 = {0.0, a.wave.Duration()};
  return m;
}

FrameActivityLabels DeriveFrameLabels(const OverlapMixture &mix,
                                      double frame_rate, int32_t num_frames,
                                      int32_t num_channels) {
  if (frame_rate <= 0.0) throw ConfigError("frame_rate must be positive");
  FrameActivityLabels out;
  out.frame_rate = frame_rate;
  out.labels = Matrix::Zero(num_frames, num_channels);
  const Span spans[2] = {mix.span_1, mix.span_2};
  for (int32_t t = 0; t < num_frames; ++t) {
    const double center = (t + 0.5) / frame_rate;
    for (int32_t m = 0; m < std::min(num_channels, 2); ++m)
      if (spans[m].Contains(center)) out.labels(t, m) = 1;
  }
  return out;
}

FrameActivityLabels DeriveFrameLabels(const OverlapMixture &mix,
                                      const FrontendConfig &frontend,
                                      int32_t num_channels) {
  const double frame_rate = 1000.0 / (frontend.hop_ms * frontend.stack_factor);
  return DeriveFrameLabels(mix, frame_rate,
                           NumStackedFrames(mix.mixed.samples.size(), frontend),
                           num_channels);
}

const char *KindName(UtteranceKind kind) {
  return kind == UtteranceKind::kSingle ? "single" : "overlapped";
}

UtteranceKind ParseKind(const std::string &s) {
  if (s == "single") return UtteranceKind::kSingle;
  if (s == "overlapped") return UtteranceKind::kOverlapped;
  throw DataError("unknown utterance kind '" + s + "'");
}

std::string DatasetManifest::AudioPath(const ManifestEntry &e) const {
  return (fs::path(base_dir) / e.audio).string();
}

double CorpusConfig::OverlapScale() const {
  return (toy_max_overlap_s - overlap_min_s) / (overlap_max_s - overlap_min_s);
}

double CorpusConfig::MapOverlap(double full_range_draw) const {
  return overlap_min_s + (full_range_draw - overlap_min_s) * OverlapScale();
}

void CorpusConfig::Validate() const {
  if (min_tokens < 1 || max_tokens < min_tokens)
    throw ConfigError("corpus requires 1 <= min_tokens <= max_tokens");
  if (overlap_min_s <= 0.0 || overlap_max_s <= overlap_min_s)
    throw ConfigError("corpus requires 0 < overlap_min_s < overlap_max_s");
  if (toy_max_overlap_s < overlap_min_s ||
      toy_max_overlap_s > max_tokens * tones.token_duration + 1e-9)
    throw ConfigError("toy_max_overlap_s must lie in [overlap_min_s, longest utterance]");
  if (tones.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
}

namespace {

SourceUtterance RandomSource(const CorpusConfig &cfg, int32_t min_tokens,
                             Rng *rng) {
  SourceUtterance s;
  const int32_t n = static_cast<int32_t>(
      rng->UniformInt(std::max(min_tokens, cfg.min_tokens), cfg.max_tokens));
  for (int32_t i = 0; i < n; ++i)
    s.tokens.push_back(static_cast<int32_t>(rng->UniformInt(1, cfg.tones.vocab_size - 1)));
  s.wave = SynthToneUtterance(s.tokens, cfg.tones, rng->NextU64());
  return s;
}

}  // namespace

std::vector<OverlapMixture> GenerateMixtures(const CorpusConfig &cfg,
                                             int32_t n_single,
                                             int32_t n_overlap, uint64_t seed,
                                             std::vector<ManifestEntry> *entries) {
  if (n_single < 0 || n_overlap < 0)
    throw ConfigError("n_single and n_overlap must be >= 0");
  cfg.Validate();
  // Kind order: a seeded shuffle of the requested histogram.
  std::vector<UtteranceKind> kinds(n_single, UtteranceKind::kSingle);
  kinds.insert(kinds.end(), n_overlap, UtteranceKind::kOverlapped);
  Rng order_rng(DeriveSeed(seed, 0xFFFFFFFFULL));
  for (size_t i = kinds.size(); i > 1; --i)
    std::swap(kinds[i - 1], kinds[order_rng.UniformInt(0, static_cast<int64_t>(i) - 1)]);

  std::vector<OverlapMixture> out;
  for (size_t i = 0; i < kinds.size(); ++i) {
    const uint64_t entry_seed = DeriveSeed(seed, i);
    Rng rng(entry_seed);
    OverlapMixture mix;
    if (kinds[i] == UtteranceKind::kSingle) {
      mix = SingleSpeakerMixture(RandomSource(cfg, cfg.min_tokens, &rng));
    } else {
      const double target = cfg.MapOverlap(rng.Uniform(cfg.overlap_min_s, cfg.overlap_max_s));
      const int32_t need = static_cast<int32_t>(
          std::ceil(target / cfg.tones.token_duration - 1e-9));
      SourceUtterance a = RandomSource(cfg, need, &rng);
      SourceUtterance b = RandomSource(cfg, need, &rng);
      mix = MixOverlap(a, b, target, cfg.gain_b);
    }
    if (entries) {
      ManifestEntry e;
      e.kind = kinds[i];
      e.seed = entry_seed;
      e.transcripts.push_back(mix.transcript_1);
      e.spans.push_back(mix.span_1);
      if (kinds[i] == UtteranceKind::kOverlapped) {
        e.transcripts.push_back(mix.transcript_2);
        e.spans.push_back(mix.span_2);
      }
      e.overlap = mix.overlap;
      entries->push_back(std::move(e));
    }
    out.push_back(std::move(mix));
  }
  return out;
}

std::string ContentHash(const std::string &bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetManifest BuildDataset(const CorpusConfig &cfg, int32_t n_single,
                             int32_t n_overlap, uint64_t seed,
                             const std::string &out_dir,
                             const std::string &split) {
  std::vector<ManifestEntry> entries;
  std::vector<OverlapMixture> mixes =
      GenerateMixtures(cfg, n_single, n_overlap, seed, &entries);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "audio", ec);
  if (ec) throw IoError("cannot create " + out_dir + "/audio: " + ec.message());
  DatasetManifest manifest;
  manifest.split = split;
  manifest.seed = seed;
  manifest.overlap_scale = cfg.OverlapScale();
  manifest.base_dir = out_dir;
  for (size_t i = 0; i < entries.size(); ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%05zu", split.c_str(), i);
    entries[i].id = id;
    const std::string bytes = EncodeWav(mixes[i].mixed);
    entries[i].audio = "audio/" + ContentHash(bytes) + ".wav";
    const fs::path wav = fs::path(out_dir) / entries[i].audio;
    if (!fs::exists(wav)) {
      std::ofstream f(wav, std::ios::binary);
      if (!f) throw IoError("cannot write " + wav.string());
      f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw IoError("write failed for " + wav.string());
    }
  }
  manifest.entries = std::move(entries);
  WriteManifest(manifest, (fs::path(out_dir) / (split + ".jsonl")).string());
  return manifest;
}

void WriteManifest(const DatasetManifest &manifest, const std::string &path) {
  std::ostringstream os;
  for (const auto &e : manifest.entries) {
    nlohmann::json j;
    j["id"] = e.id;
    j["split"] = manifest.split;
    j["audio"] = e.audio;
    j["kind"] = KindName(e.kind);
    j["transcripts"] = e.transcripts;
    nlohmann::json spans = nlohmann::json::array();
    for (const auto &s : e.spans) spans.push_back({s.start, s.end});
    j["spans"] = spans;
    j["overlap"] = {e.overlap.start, e.overlap.end};
    j["seed"] = e.seed;
    j["dataset_seed"] = manifest.seed;
    j["overlap_scale"] = manifest.overlap_scale;
    os << j.dump() << "\n";
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << os.str();
  if (!out) throw IoError("write failed for " + path);
}

DatasetManifest ReadManifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  if (m.base_dir.empty()) m.base_dir = ".";
  m.split = fs::path(path).stem().string();
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id");
      e.audio = j.at("audio");
      e.kind = ParseKind(j.at("kind"));
      e.transcripts = j.at("transcripts").get<std::vector<TokenSequence>>();
      for (const auto &s : j.at("spans")) e.spans.push_back({s.at(0), s.at(1)});
      e.overlap = {j.at("overlap").at(0), j.at("overlap").at(1)};
      e.seed = j.value("seed", uint64_t{0});
      m.split = j.value("split", m.split);
      m.seed = j.value("dataset_seed", uint64_t{0});
      m.overlap_scale = j.value("overlap_scale", 1.0);
      const bool single = e.kind == UtteranceKind::kSingle;
      if (single != (e.transcripts.size() == 1) || e.spans.size() != e.transcripts.size())
        throw DataError("entry kind inconsistent with transcripts/spans");
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception &ex) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError &ex) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return m;
}

OverlapMixture LoadMixture(const DatasetManifest &manifest,
                           const ManifestEntry &entry) {
  OverlapMixture m;
  m.mixed = ReadWav(manifest.AudioPath(entry));
  m.transcript_1 = entry.transcripts.at(0);
  m.span_1 = entry.spans.at(0);
  if (entry.transcripts.size() > 1) {
    m.transcript_2 = entry.transcripts[1];
    m.span_2 = entry.spans[1];
  }
  m.overlap = entry.overlap;
  return m;
}

}  // namespace mtcascade
