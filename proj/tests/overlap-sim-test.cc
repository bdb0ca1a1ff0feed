// tests/overlap-sim-test.cc

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

#include <filesystem>
#include <fstream>
#include <iterator>

#include "gtest/gtest.h"
#include "mtcascade/overlap-sim.h"
#include "test-util.h"

namespace mtcascade {
namespace {

SourceUtterance Noise(double seconds, uint64_t seed, TokenSequence tokens = {1}) {
  Rng rng(seed);
  SourceUtterance s;
  s.wave.sample_rate = 8000;
  s.wave.samples.resize(static_cast<size_t>(seconds * 8000));
  for (float &x : s.wave.samples) x = static_cast<float>(0.1 * rng.Normal());
  s.tokens = std::move(tokens);
  return s;
}

std::string Slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

TEST(MixOverlap, FullOverlapIsElementwiseSum) {
  SourceUtterance a = Noise(1.0, 1), b = Noise(1.0, 2, {2});
  OverlapMixture m = MixOverlap(a, b, 1.0);
  EXPECT_DOUBLE_EQ(m.span_2.start, 0.0);
  ASSERT_EQ(m.mixed.samples.size(), 8000u);
  for (size_t i = 0; i < 8000; ++i)
    EXPECT_EQ(m.mixed.samples[i], a.wave.samples[i] + b.wave.samples[i]);
  EXPECT_DOUBLE_EQ(m.overlap.length(), 1.0);
}

TEST(MixOverlap, OffsetIsDurationMinusTarget) {
  SourceUtterance a = Noise(3.0, 1), b = Noise(2.0, 2, {2});
  OverlapMixture m = MixOverlap(a, b, 0.5);
  EXPECT_DOUBLE_EQ(m.span_2.start, 2.5);
  EXPECT_DOUBLE_EQ(m.mixed.Duration(), 4.5);
  EXPECT_DOUBLE_EQ(m.overlap.start, 2.5);
  EXPECT_DOUBLE_EQ(m.overlap.end, 3.0);
  const size_t off = 20000;
  for (size_t i = 0; i < m.mixed.samples.size(); ++i) {
    float expect = (i < a.wave.samples.size() ? a.wave.samples[i] : 0.0f);
    if (i >= off) expect = expect + b.wave.samples[i - off];
    if (i < off) EXPECT_EQ(m.mixed.samples[i], a.wave.samples[i]);
    else EXPECT_EQ(m.mixed.samples[i], expect);
  }
}

TEST(MixOverlap, Errors) {
  SourceUtterance a = Noise(1.0, 1), b = Noise(0.5, 2);
  EXPECT_THROW(MixOverlap(a, b, 0.6), DataError);
  SourceUtterance c = b;
  c.wave.sample_rate = 16000;
  EXPECT_THROW(MixOverlap(a, c, 0.1), DataError);
}

TEST(FrameLabels, SingleAndFullOverlap) {
  OverlapMixture single = SingleSpeakerMixture(Noise(1.5, 1));
  FrameActivityLabels l = DeriveFrameLabels(single, 100.0 / 3, 50);
  EXPECT_EQ(l.labels.col(1).sum(), 0);
  OverlapMixture full = MixOverlap(Noise(1.2, 1), Noise(1.2, 2), 1.2);
  FrameActivityLabels f = DeriveFrameLabels(full, 100.0 / 3, 40);
  EXPECT_EQ(f.labels.minCoeff(), 1);
}

TEST(FrameLabels, CoActiveCountFollowsCenterConvention) {
  OverlapMixture m;
  m.span_1 = {0.0, 3.0};
  m.span_2 = {2.5, 4.5};
  m.overlap = Intersect(m.span_1, m.span_2);
  const double rate = 100.0 / 3;
  FrameActivityLabels l = DeriveFrameLabels(m, rate, 150);
  int both = 0, expect = 0;
  for (int t = 0; t < 150; ++t) {
    both += l.labels(t, 0) > 0 && l.labels(t, 1) > 0;
    double c = (t + 0.5) / rate;
    expect += c >= 2.5 && c < 3.0;
  }
  EXPECT_EQ(both, expect);
  EXPECT_TRUE(both == 16 || both == 17) << both;
}

TEST(FrameLabels, ActiveTimeMatchesSpanLength) {
  CorpusConfig cfg;
  std::vector<ManifestEntry> entries;
  auto mixes = GenerateMixtures(cfg, 5, 15, 3, &entries);
  FrontendConfig fe;
  for (const auto &m : mixes) {
    FrameActivityLabels l = DeriveFrameLabels(m, fe);
    EXPECT_NEAR(l.labels.col(0).sum() / l.frame_rate, m.span_1.length(), 1.0 / l.frame_rate);
    EXPECT_NEAR(l.labels.col(1).sum() / l.frame_rate, m.span_2.length(), 1.0 / l.frame_rate);
  }
}

class DatasetTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing_util::TempDir("dataset"); }
  std::string dir_;
};

TEST_F(DatasetTest, EmptyManifestIsValid) {
  DatasetManifest m = BuildDataset(CorpusConfig{}, 0, 0, 1, dir_, "train");
  EXPECT_TRUE(m.entries.empty());
  EXPECT_TRUE(ReadManifest(dir_ + "/train.jsonl").entries.empty());
}

TEST_F(DatasetTest, HalfAndHalfDeterministicAndConsistent) {
  CorpusConfig cfg;
  DatasetManifest m = BuildDataset(cfg, 20, 20, 7, dir_ + "/a", "train");
  BuildDataset(cfg, 20, 20, 7, dir_ + "/b", "train");
  EXPECT_EQ(Slurp(dir_ + "/a/train.jsonl"), Slurp(dir_ + "/b/train.jsonl"));
  int overlapped = 0;
  for (const auto &e : m.entries) {
    overlapped += e.kind == UtteranceKind::kOverlapped;
    if (e.kind == UtteranceKind::kOverlapped) {
      ASSERT_EQ(e.spans.size(), 2u);
      Span s = Intersect(e.spans[0], e.spans[1]);
      EXPECT_DOUBLE_EQ(s.start, e.overlap.start);
      EXPECT_DOUBLE_EQ(s.end, e.overlap.end);
      EXPECT_GE(e.overlap.length(), cfg.overlap_min_s - 1e-9);
      EXPECT_LE(e.overlap.length(), cfg.toy_max_overlap_s + 1e-9);
    } else {
      EXPECT_EQ(e.transcripts.size(), 1u);
      double d = e.spans[0].length();
      EXPECT_GE(d, 0.95);
      EXPECT_LE(d, 3.0);
    }
    OverlapMixture mix = LoadMixture(m, e);
    EXPECT_NEAR(mix.mixed.Duration(),
                std::max(e.spans[0].end, e.spans.back().end), 1e-9);
  }
  EXPECT_EQ(overlapped, 20);
  DatasetManifest back = ReadManifest(dir_ + "/a/train.jsonl");
  ASSERT_EQ(back.entries.size(), m.entries.size());
  EXPECT_EQ(back.entries[3].transcripts, m.entries[3].transcripts);
  EXPECT_DOUBLE_EQ(back.overlap_scale, cfg.OverlapScale());
}

TEST_F(DatasetTest, OverlapMapKeepsLowerEdge) {
  CorpusConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.MapOverlap(0.5), 0.5);
  EXPECT_DOUBLE_EQ(cfg.MapOverlap(4.0), cfg.toy_max_overlap_s);
  EXPECT_NEAR(cfg.MapOverlap(2.25), 0.5 * (0.5 + cfg.toy_max_overlap_s), 1e-12);
}

TEST_F(DatasetTest, RejectsNegativeCountsAndBadManifests) {
  EXPECT_THROW(BuildDataset(CorpusConfig{}, -1, 0, 1, dir_, "x"), ConfigError);
  std::ofstream(dir_ + "/bad.jsonl")
      << R"({"id":"u","audio":"a.wav","kind":"overlapped","transcripts":[[1]],"spans":[[0,1]],"overlap":[0,0],"seed":1})"
      << "\n";
  EXPECT_THROW(ReadManifest(dir_ + "/bad.jsonl"), Error);
  EXPECT_THROW(ReadManifest(dir_ + "/none.jsonl"), IoError);
}

TEST_F(DatasetTest, IoErrorsCarryThePath) {
  std::string blocker = dir_ + "/file";
  std::ofstream(blocker) << "x";
  try {
    BuildDataset(CorpusConfig{}, 1, 0, 1, blocker + "/sub", "train");
    FAIL();
  } catch (const IoError &e) {
    EXPECT_NE(std::string(e.what()).find(blocker), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace mtcascade
