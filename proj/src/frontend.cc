// src/frontend.cc

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

#include "mtcascade/frontend.h"

#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>

#include <unsupported/Eigen/FFT>

#include "json.hpp"

namespace mtcascade {

void Waveform::Validate() const {
  if (sample_rate <= 0) throw DataError("waveform sample_rate must be > 0");
  for (float s : samples)
    if (!std::isfinite(s)) throw DataError("waveform contains non-finite samples");
}

int32_t FrontendConfig::HopSamples() const {
  return static_cast<int32_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

int32_t FrontendConfig::WindowSamples() const {
  return static_cast<int32_t>(std::lround(sample_rate * window_ms / 1000.0));
}

void FrontendConfig::Validate() const {
  auto fail = [](const std::string &why) {
    throw ConfigError("invalid frontend config: " + why);
  };
  if (sample_rate <= 0) fail("sample_rate must be positive");
  if (mel_bins < 1) fail("mel_bins must be >= 1");
  if (stack_factor < 1) fail("stack_factor must be >= 1");
  if (hop_ms <= 0.0 || window_ms <= 0.0) fail("hop and window must be positive");
  const double hop = sample_rate * hop_ms / 1000.0;
  if (std::fabs(hop - std::round(hop)) > 1e-9)
    fail("hop of " + std::to_string(hop_ms) + " ms is not a whole number of samples");
  if (WindowSamples() > fft_size) fail("window longer than fft_size");
  if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
    fail("fft_size must be a power of two");
  if (low_hz < 0.0 || low_hz >= HighHz()) fail("mel low edge must be below high edge");
  if (HighHz() > sample_rate / 2.0 + 1e-9)
    fail("highest mel edge " + std::to_string(HighHz()) +
         " Hz exceeds Nyquist for sample_rate " + std::to_string(sample_rate));
  if (floor_epsilon <= 0.0) fail("floor_epsilon must be positive");
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> MelEdges(const FrontendConfig &cfg) {
  const double lo = HzToMel(cfg.low_hz), hi = HzToMel(cfg.HighHz());
  std::vector<double> edges(cfg.mel_bins + 2);
  for (int32_t i = 0; i < cfg.mel_bins + 2; ++i)
    edges[i] = lo + (hi - lo) * i / (cfg.mel_bins + 1);
  return edges;
}

}  // namespace

std::vector<double> MelCenterFrequencies(const FrontendConfig &cfg) {
  cfg.Validate();
  std::vector<double> edges = MelEdges(cfg), out;
  for (int32_t k = 0; k < cfg.mel_bins; ++k) out.push_back(MelToHz(edges[k + 1]));
  return out;
}

Matrix MelFilterbank(const FrontendConfig &cfg) {
  cfg.Validate();
  const std::vector<double> edges = MelEdges(cfg);
  const int32_t num_bins = cfg.fft_size / 2 + 1;
  Matrix fb = Matrix::Zero(cfg.mel_bins, num_bins);
  for (int32_t i = 0; i < num_bins; ++i) {
    const double mel = HzToMel(static_cast<double>(i) * cfg.sample_rate / cfg.fft_size);
    for (int32_t k = 0; k < cfg.mel_bins; ++k) {
      const double l = edges[k], c = edges[k + 1], r = edges[k + 2];
      double w = 0.0;
      if (mel > l && mel <= c) w = (mel - l) / (c - l);
      else if (mel > c && mel < r) w = (r - mel) / (r - c);
      fb(k, i) = static_cast<Real>(w);
    }
  }
  return fb;
}

FeatureSequence LogMel(const Waveform &wave, const FrontendConfig &cfg) {
  cfg.Validate();
  if (wave.samples.empty()) throw DataError("empty input");
  wave.Validate();
  if (wave.sample_rate != cfg.sample_rate)
    throw ConfigError("invalid frontend config: waveform rate " +
                      std::to_string(wave.sample_rate) + " != configured " +
                      std::to_string(cfg.sample_rate));
  const int32_t hop = cfg.HopSamples(), win = cfg.WindowSamples();
  const int64_t n = static_cast<int64_t>(wave.samples.size());
  const int64_t num_frames = (n + hop - 1) / hop;
  const Matrix fb = MelFilterbank(cfg);
  std::vector<double> window(win);
  for (int32_t i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  Eigen::FFT<double> fft;
  std::vector<double> buf(cfg.fft_size);
  std::vector<std::complex<double>> spec;
  const int32_t num_bins = cfg.fft_size / 2 + 1;
  Eigen::Matrix<double, Eigen::Dynamic, 1> power(num_bins);

  FeatureSequence out;
  out.frames.resize(num_frames, cfg.mel_bins);
  out.frame_rate = 1000.0 / cfg.hop_ms;
  out.mel_bins = cfg.mel_bins;
  out.stack_factor = 1;
  for (int64_t t = 0; t < num_frames; ++t) {
    // Window centred on (t + 0.5) * hop.
    const double center = (t + 0.5) * hop;
    const int64_t start = static_cast<int64_t>(std::floor(center - win / 2.0));
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int32_t i = 0; i < win; ++i) {
      const int64_t s = start + i;
      if (s >= 0 && s < n) buf[i] = window[i] * wave.samples[s];
    }
    fft.fwd(spec, buf);
    for (int32_t i = 0; i < num_bins; ++i) power(i) = std::norm(spec[i]);
    for (int32_t k = 0; k < cfg.mel_bins; ++k) {
      double e = 0.0;
      for (int32_t i = 0; i < num_bins; ++i) e += fb(k, i) * power(i);
      out.frames(t, k) = static_cast<Real>(std::log(e + cfg.floor_epsilon));
    }
  }
  return out;
}

FeatureSequence StackFrames(const FeatureSequence &feat, int32_t stack_factor) {
  if (stack_factor < 1) throw ConfigError("stack_factor must be >= 1");
  const Eigen::Index t_in = feat.frames.rows(), d = feat.frames.cols();
  const Eigen::Index t_out = (t_in + stack_factor - 1) / stack_factor;
  FeatureSequence out;
  out.frames.resize(t_out, d * stack_factor);
  out.frame_rate = feat.frame_rate / stack_factor;
  out.mel_bins = feat.mel_bins;
  out.stack_factor = feat.stack_factor * stack_factor;
  for (Eigen::Index t = 0; t < t_out; ++t)
    for (int32_t k = 0; k < stack_factor; ++k) {
      const Eigen::Index src = std::min<Eigen::Index>(t * stack_factor + k, t_in - 1);
      out.frames.block(t, k * d, 1, d) = feat.frames.row(src);
    }
  return out;
}

FeatureSequence ComputeFeatures(const Waveform &wave, const FrontendConfig &cfg) {
  return StackFrames(LogMel(wave, cfg), cfg.stack_factor);
}

int32_t NumStackedFrames(size_t num_samples, const FrontendConfig &cfg) {
  const int64_t hop = cfg.HopSamples();
  const int64_t t = (static_cast<int64_t>(num_samples) + hop - 1) / hop;
  return static_cast<int32_t>((t + cfg.stack_factor - 1) / cfg.stack_factor);
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV and feature I/O assume a little-endian host");

template <typename T>
void Put(std::string *s, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  s->append(b, sizeof(T));
}

template <typename T>
T Get(const std::string &s, size_t pos, const std::string &path) {
  if (pos + sizeof(T) > s.size()) throw IoError(path + ": truncated WAV");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof(T));
  return v;
}

std::string Slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void Spit(const std::string &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::string EncodeWav(const Waveform &wave) {
  const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  Put<uint32_t>(&s, 36 + data_bytes);
  s += "WAVEfmt ";
  Put<uint32_t>(&s, 16);
  Put<uint16_t>(&s, 1);  // PCM
  Put<uint16_t>(&s, 1);  // mono
  Put<uint32_t>(&s, static_cast<uint32_t>(wave.sample_rate));
  Put<uint32_t>(&s, static_cast<uint32_t>(wave.sample_rate * 2));
  Put<uint16_t>(&s, 2);
  Put<uint16_t>(&s, 16);
  s += "data";
  Put<uint32_t>(&s, data_bytes);
  for (float x : wave.samples) {
    const double c = std::clamp(static_cast<double>(x), -1.0, 1.0);
    Put<int16_t>(&s, static_cast<int16_t>(std::lround(c * 32767.0)));
  }
  return s;
}

void WriteWav(const Waveform &wave, const std::string &path) {
  Spit(path, EncodeWav(wave));
}

Waveform ReadWav(const std::string &path) {
  const std::string s = Slurp(path);
  if (s.size() < 12 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
    throw IoError(path + ": not a RIFF/WAVE file");
  Waveform w;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= s.size()) {
    const std::string id = s.substr(pos, 4);
    const uint32_t len = Get<uint32_t>(s, pos + 4, path);
    const size_t body = pos + 8;
    if (body + len > s.size()) throw IoError(path + ": truncated WAV");
    if (id == "fmt ") {
      if (Get<uint16_t>(s, body, path) != 1 || Get<uint16_t>(s, body + 2, path) != 1 ||
          Get<uint16_t>(s, body + 14, path) != 16)
        throw IoError(path + ": only 16-bit PCM mono WAV is supported");
      w.sample_rate = static_cast<int32_t>(Get<uint32_t>(s, body + 4, path));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError(path + ": data chunk before fmt chunk");
      w.samples.resize(len / 2);
      for (size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<float>(Get<int16_t>(s, body + 2 * i, path) / 32767.0);
      return w;
    }
    pos = body + len + (len & 1);
  }
  throw IoError(path + ": no data chunk");
}

void WriteFeatureDump(const FeatureSequence &feat, const std::string &path) {
  std::string bytes;
  bytes.reserve(feat.frames.size() * 4);
  for (Eigen::Index i = 0; i < feat.frames.size(); ++i)
    Put<float>(&bytes, static_cast<float>(feat.frames.data()[i]));
  Spit(path, bytes);
  nlohmann::json side = {{"T", feat.frames.rows()},
                         {"D", feat.frames.cols()},
                         {"frame_rate", feat.frame_rate}};
  Spit(path + ".json", side.dump() + "\n");
}

FeatureSequence ReadFeatureDump(const std::string &path) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(Slurp(path + ".json"));
  } catch (const nlohmann::json::exception &e) {
    throw IoError(path + ".json: " + e.what());
  }
  const int64_t t = side.at("T"), d = side.at("D");
  const std::string bytes = Slurp(path);
  if (bytes.size() != static_cast<size_t>(t * d * 4))
    throw IoError(path + ": size does not match sidecar T x D");
  FeatureSequence f;
  f.frames.resize(t, d);
  f.frame_rate = side.at("frame_rate");
  for (int64_t i = 0; i < t * d; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + 4 * i, 4);
    f.frames.data()[i] = v;
  }
  return f;
}

double TokenFrequency(int32_t token, const ToneCorpusConfig &cfg) {
  if (token <= kBlankId || token >= cfg.vocab_size)
    throw DataError("unknown token id " + std::to_string(token));
  const int32_t n = cfg.vocab_size - 1;
  const double lo = HzToMel(cfg.low_hz), hi = HzToMel(cfg.high_hz);
  const double frac = n == 1 ? 0.5 : static_cast<double>(token - 1) / (n - 1);
  return MelToHz(lo + (hi - lo) * frac);
}

Waveform SynthToneUtterance(const TokenSequence &tokens,
                            const ToneCorpusConfig &cfg, uint64_t seed) {
  for (int32_t tok : tokens) TokenFrequency(tok, cfg);  // validates ids
  Rng rng(seed);
  const double level_db = rng.Uniform(cfg.level_db_min, cfg.level_db_max);
  const double gain = cfg.amplitude * std::pow(10.0, level_db / 20.0);
  const int64_t per_token =
      static_cast<int64_t>(std::lround(cfg.token_duration * cfg.sample_rate));
  const int64_t ramp = static_cast<int64_t>(std::lround(cfg.ramp_s * cfg.sample_rate));
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.resize(tokens.size() * per_token);
  for (size_t k = 0; k < tokens.size(); ++k) {
    const double f = TokenFrequency(tokens[k], cfg);
    const double phase = rng.Uniform(0.0, 2.0 * M_PI);
    for (int64_t i = 0; i < per_token; ++i) {
      double env = 1.0;
      if (ramp > 0) {
        const int64_t edge = std::min(i, per_token - 1 - i);
        if (edge < ramp) env = 0.5 - 0.5 * std::cos(M_PI * edge / ramp);
      }
      const double t = static_cast<double>(i) / cfg.sample_rate;
      w.samples[k * per_token + i] =
          static_cast<float>(gain * env * std::sin(2.0 * M_PI * f * t + phase));
    }
  }
  for (float &s : w.samples)
    s += static_cast<float>(cfg.noise_amplitude * rng.Uniform(-1.0, 1.0));
  return w;
}

}  // namespace mtcascade
