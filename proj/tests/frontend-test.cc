// tests/frontend-test.cc

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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "json.hpp"
#include "mtcascade/frontend.h"
#include "oracles.h"
#include "test-util.h"

namespace mtcascade {
namespace {

Waveform Sine(double hz, double seconds, int rate = 8000, double amp = 1.0) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<size_t>(seconds * rate));
  for (size_t n = 0; n < w.samples.size(); ++n)
    w.samples[n] = static_cast<float>(amp * std::sin(2 * M_PI * hz * n / rate));
  return w;
}

TEST(LogMel, SineAtCenterPeaksInItsBin) {
  FrontendConfig cfg;
  std::vector<double> centers = MelCenterFrequencies(cfg);
  ASSERT_EQ(centers.size(), 80u);
  for (int k : {10, 25, 40, 55, 70, 78}) {
    FeatureSequence f = LogMel(Sine(centers[k], 0.5), cfg);
    for (Eigen::Index t = 3; t < f.frames.rows() - 3; ++t) {
      Eigen::Index arg;
      f.frames.row(t).maxCoeff(&arg);
      EXPECT_EQ(arg, k) << "frame " << t;
    }
  }
}

TEST(LogMel, EnergiesMatchDirectDft) {
  FrontendConfig cfg;
  Rng rng(3);
  Waveform w;
  w.sample_rate = 8000;
  for (int i = 0; i < 2400; ++i) w.samples.push_back(static_cast<float>(rng.Normal() * 0.3));
  FeatureSequence f = LogMel(w, cfg);
  Matrix fb = MelFilterbank(cfg);
  const int hop = 80, win = 200;
  for (int t : {5, 12, 20}) {
    std::vector<double> frame(win);
    int start = static_cast<int>(std::floor((t + 0.5) * hop - win / 2.0));
    for (int i = 0; i < win; ++i)
      frame[i] = (0.5 - 0.5 * std::cos(2 * M_PI * i / win)) * w.samples[start + i];
    for (int k = 0; k < 80; k += 7) {
      double e = 0;
      for (int i = 0; i < cfg.fft_size / 2 + 1; ++i)
        if (fb(k, i) != 0)
          e += fb(k, i) * oracle::DftPower(frame, i * 8000.0 / cfg.fft_size, 8000);
      EXPECT_NEAR(f.frames(t, k), std::log(e + cfg.floor_epsilon), 1e-4);
    }
  }
}

TEST(LogMel, SilenceIsFloor) {
  FrontendConfig cfg;
  Waveform w;
  w.sample_rate = 8000;
  w.samples.assign(1234, 0.0f);
  FeatureSequence f = LogMel(w, cfg);
  const Real floor = static_cast<Real>(std::log(1e-10));
  EXPECT_EQ(f.frames.maxCoeff(), floor);
  EXPECT_EQ(f.frames.minCoeff(), floor);
}

TEST(LogMel, OneSecondGivesHundredFrames) {
  FeatureSequence f = LogMel(Sine(440, 1.0), FrontendConfig{});
  EXPECT_EQ(f.frames.rows(), 100);
  EXPECT_EQ(f.frames.cols(), 80);
  EXPECT_DOUBLE_EQ(f.frame_rate, 100.0);
}

TEST(LogMel, ShiftByOneHopShiftsOneFrame) {
  FrontendConfig cfg;
  Rng rng(4);
  Waveform a;
  a.sample_rate = 8000;
  for (int i = 0; i < 3000; ++i) a.samples.push_back(static_cast<float>(rng.Normal() * 0.2));
  Waveform b = a;
  b.samples.insert(b.samples.begin(), cfg.HopSamples(), 0.0f);
  FeatureSequence fa = LogMel(a, cfg), fb = LogMel(b, cfg);
  for (Eigen::Index t = 3; t < fa.frames.rows() - 3; ++t)
    EXPECT_LE((fb.frames.row(t + 1) - fa.frames.row(t)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(LogMel, MixingIsNotFeatureAdditive) {
  FrontendConfig cfg;
  Waveform a = Sine(500, 0.5), b = Sine(1500, 0.5);
  Waveform mix = a;
  for (size_t i = 0; i < mix.samples.size(); ++i) mix.samples[i] += b.samples[i];
  Matrix lhs = ComputeFeatures(mix, cfg).frames;
  Matrix rhs = ComputeFeatures(a, cfg).frames + ComputeFeatures(b, cfg).frames;
  EXPECT_GT((lhs - rhs).cwiseAbs().maxCoeff(), 1.0);
}

TEST(LogMel, Errors) {
  FrontendConfig cfg;
  Waveform empty;
  empty.sample_rate = 8000;
  try {
    LogMel(empty, cfg);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("empty input"), std::string::npos);
  }
  FrontendConfig bad;
  bad.high_hz = 5000;  // above 4 kHz Nyquist
  try {
    LogMel(Sine(100, 0.1), bad);
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("invalid frontend config"), std::string::npos);
  }
  Waveform nan = Sine(100, 0.1);
  nan.samples[5] = std::nanf("");
  EXPECT_THROW(LogMel(nan, cfg), Error);
}

FeatureSequence Ramp(int T, int D) {
  FeatureSequence f;
  f.frames.resize(T, D);
  for (int t = 0; t < T; ++t) f.frames.row(t).setConstant(static_cast<Real>(t));
  f.frame_rate = 100;
  f.mel_bins = D;
  return f;
}

TEST(StackFrames, GeometryAndPadding) {
  FeatureSequence s = StackFrames(Ramp(90, 80), 3);
  EXPECT_EQ(s.frames.cols(), 240);
  EXPECT_NEAR(s.frame_rate, 100.0 / 3, 1e-12);

  FeatureSequence id = StackFrames(Ramp(5, 2), 1);
  EXPECT_EQ(id.frames, Ramp(5, 2).frames);

  FeatureSequence p = StackFrames(Ramp(7, 2), 3);
  ASSERT_EQ(p.frames.rows(), 3);
  for (int c = 0; c < 6; ++c) EXPECT_EQ(p.frames(2, c), 6);
  EXPECT_THROW(StackFrames(Ramp(3, 2), 0), ConfigError);
}

TEST(StackFrames, FrameCountFormulaOverRandomSizes) {
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    FrontendConfig cfg;
    cfg.stack_factor = static_cast<int32_t>(rng.UniformInt(1, 4));
    cfg.hop_ms = rng.Bernoulli(0.5) ? 10.0 : 5.0;
    size_t n = static_cast<size_t>(rng.UniformInt(1, 4000));
    Waveform w = Sine(300, 1.0);
    w.samples.resize(n);
    int64_t hop = cfg.HopSamples();
    int64_t t_in = (static_cast<int64_t>(n) + hop - 1) / hop;
    int64_t expect = (t_in + cfg.stack_factor - 1) / cfg.stack_factor;
    EXPECT_EQ(ComputeFeatures(w, cfg).frames.rows(), expect);
    EXPECT_EQ(NumStackedFrames(n, cfg), expect);
  }
}

TEST(ToneSynth, LengthsAndDeterminism) {
  ToneCorpusConfig cfg;
  EXPECT_TRUE(SynthToneUtterance({}, cfg, 1).samples.empty());
  cfg.token_duration = 0.25;
  Waveform w = SynthToneUtterance({3}, cfg, 9);
  EXPECT_EQ(w.samples.size(), 2000u);
  EXPECT_EQ(w.samples, SynthToneUtterance({3}, cfg, 9).samples);
  EXPECT_NE(w.samples, SynthToneUtterance({4}, cfg, 9).samples);
  EXPECT_THROW(SynthToneUtterance({static_cast<int32_t>(cfg.vocab_size)}, cfg, 1), Error);
  EXPECT_THROW(SynthToneUtterance({0}, cfg, 1), Error);
}

TEST(ToneSynth, TokenFrequenciesAreDistinctAndInBand) {
  ToneCorpusConfig cfg;
  double prev = 0;
  for (int32_t k = 1; k < cfg.vocab_size; ++k) {
    double f = TokenFrequency(k, cfg);
    EXPECT_GT(f, prev);
    EXPECT_GE(f, cfg.low_hz);
    EXPECT_LE(f, cfg.high_hz);
    prev = f;
  }
}

TEST(WavIo, RoundTripWithinQuantization) {
  std::string dir = testing_util::TempDir("wav");
  Waveform w = Sine(700, 0.3, 8000, 0.5);
  WriteWav(w, dir + "/a.wav");
  Waveform r = ReadWav(dir + "/a.wav");
  EXPECT_EQ(r.sample_rate, 8000);
  ASSERT_EQ(r.samples.size(), w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i)
    EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32767);
  EXPECT_THROW(ReadWav(dir + "/missing.wav"), IoError);
  std::ofstream(dir + "/junk.wav") << "not a wav file at all, clearly";
  EXPECT_THROW(ReadWav(dir + "/junk.wav"), Error);
}

TEST(FeatureDump, RawFloatsWithSidecar) {
  std::string dir = testing_util::TempDir("feat");
  FeatureSequence f = ComputeFeatures(Sine(900, 0.4), FrontendConfig{});
  WriteFeatureDump(f, dir + "/f.bin");
  EXPECT_EQ(std::filesystem::file_size(dir + "/f.bin"),
            static_cast<uintmax_t>(f.frames.size() * 4));
  std::ifstream side(dir + "/f.bin.json");
  nlohmann::json j = nlohmann::json::parse(side);
  EXPECT_EQ(j["T"], f.frames.rows());
  EXPECT_EQ(j["D"], 240);
  FeatureSequence r = ReadFeatureDump(dir + "/f.bin");
  EXPECT_EQ(r.frames.cast<float>(), f.frames.cast<float>());
}

}  // namespace
}  // namespace mtcascade
