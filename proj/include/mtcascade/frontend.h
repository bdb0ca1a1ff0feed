// include/mtcascade/frontend.h

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

#ifndef MTCASCADE_FRONTEND_H_
#define MTCASCADE_FRONTEND_H_

#include <string>
#include <vector>

#include "mtcascade/common.h"

namespace mtcascade {

struct Waveform {
  std::vector<float> samples;
  int32_t sample_rate = 8000;

  double Duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
  // Throws DataError on sample_rate <= 0 or non-finite samples.
  void Validate() const;
};

struct FrontendConfig {
  int32_t sample_rate = 8000;
  int32_t mel_bins = 80;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int32_t fft_size = 512;
  double low_hz = 125.0;
  // 0 means Nyquist.
  double high_hz = 0.0;
  double floor_epsilon = 1e-10;
  int32_t stack_factor = 3;

  int32_t HopSamples() const;
  int32_t WindowSamples() const;
  double HighHz() const { return high_hz > 0.0 ? high_hz : sample_rate / 2.0; }
  // Stacked output frames per second.
  double FrameRate() const { return 1000.0 / (hop_ms * stack_factor); }
  // Throws ConfigError("invalid frontend config: ...").
  void Validate() const;
};

struct FeatureSequence {
  // T x (mel_bins * stack_factor)
  Matrix frames;
  double frame_rate = 100.0;
  int32_t mel_bins = 0;
  int32_t stack_factor = 1;

  int32_t num_frames() const { return static_cast<int32_t>(frames.rows()); }
  int32_t dim() const { return static_cast<int32_t>(frames.cols()); }
};

// HTK mel scale.
double HzToMel(double hz);
double MelToHz(double mel);

// Center frequency (Hz) of every mel filter.
std::vector<double> MelCenterFrequencies(const FrontendConfig &cfg);

// [mel_bins x (fft_size / 2 + 1)] triangular filterbank, weights linear in
// mel between adjacent edges.
Matrix MelFilterbank(const FrontendConfig &cfg);

// Hann-windowed power spectrum -> mel energies -> log(energy + floor).
// Frame t is centred on sample (t + 0.5) * hop, zero-padded at the edges,
// giving ceil(N / hop) frames.
FeatureSequence LogMel(const Waveform &wave, const FrontendConfig &cfg);

// Concatenates stack_factor consecutive frames; the tail is padded by
// repeating the last input frame.
FeatureSequence StackFrames(const FeatureSequence &feat, int32_t stack_factor);

// LogMel followed by StackFrames(cfg.stack_factor).
FeatureSequence ComputeFeatures(const Waveform &wave, const FrontendConfig &cfg);

// Number of stacked frames ComputeFeatures produces for n samples.
int32_t NumStackedFrames(size_t num_samples, const FrontendConfig &cfg);

// 16-bit PCM mono WAV. Samples are clipped to [-1, 1] on write.
void WriteWav(const Waveform &wave, const std::string &path);
Waveform ReadWav(const std::string &path);
// Serialized WAV bytes (used for content addressing).
std::string EncodeWav(const Waveform &wave);

// Raw little-endian float32 T x D row-major at `path`, plus a one-line JSON
// sidecar {"T":..,"D":..,"frame_rate":..} at path + ".json".
void WriteFeatureDump(const FeatureSequence &feat, const std::string &path);
FeatureSequence ReadFeatureDump(const std::string &path);

struct ToneCorpusConfig {
  // Including blank; tokens are 1 .. vocab_size - 1.
  int32_t vocab_size = 17;
  double token_duration = 0.24;
  int32_t sample_rate = 8000;
  double low_hz = 250.0;
  double high_hz = 3400.0;
  // Raised-cosine ramp at both ends of every token.
  double ramp_s = 0.02;
  double amplitude = 0.4;
  // Per-utterance level drawn uniformly from this dB range below amplitude.
  double level_db_min = -8.0;
  double level_db_max = 0.0;
  double noise_amplitude = 0.002;
};

// Frequency (Hz) of a token's tone: mel-spaced between low_hz and high_hz.
double TokenFrequency(int32_t token, const ToneCorpusConfig &cfg);

// Deterministic waveform for a token sequence: each token is a ramped sine
// at its frequency for token_duration seconds, with seeded phase and an
// utterance-level gain, plus low-level seeded noise.
Waveform SynthToneUtterance(const TokenSequence &tokens,
                            const ToneCorpusConfig &cfg, uint64_t seed);

}  // namespace mtcascade

#endif  // MTCASCADE_FRONTEND_H_
