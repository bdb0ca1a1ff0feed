// tests/eval-harness-test.cc

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

#include <algorithm>
#include <sstream>

#include "gtest/gtest.h"
#include "mtcascade/eval-harness.h"
#include "oracles.h"
#include "test-util.h"

namespace mtcascade {
namespace {

using testing_util::RandomMatrix;

TEST(EditDistance, HandCases) {
  EXPECT_EQ(EditDistance(std::vector<int32_t>{}, std::vector<int32_t>{}).total(), 0);
  EditCounts c = EditDistance(std::vector<int32_t>{1, 2, 3}, std::vector<int32_t>{});
  EXPECT_EQ(c.deletions, 3);
  c = EditDistance(std::vector<int32_t>{}, std::vector<int32_t>{4, 5});
  EXPECT_EQ(c.insertions, 2);
  c = EditDistance(std::vector<int32_t>{1, 2, 3}, std::vector<int32_t>{1, 4, 3});
  EXPECT_EQ(c, (EditCounts{1, 0, 0}));
  // Two substitutions beat a deletion plus an insertion at equal cost.
  c = EditDistance(std::vector<int32_t>{1, 2}, std::vector<int32_t>{2, 3});
  EXPECT_EQ(c, (EditCounts{2, 0, 0}));
  c = EditDistance(std::vector<int32_t>{1, 2, 3, 4}, std::vector<int32_t>{2, 3, 4});
  EXPECT_EQ(c, (EditCounts{0, 1, 0}));
}

TEST(EditDistance, MatchesRecursiveOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> a(rng.UniformInt(0, 6)), b(rng.UniformInt(0, 6));
    for (int &x : a) x = rng.UniformInt(1, 3);
    for (int &x : b) x = rng.UniformInt(1, 3);
    std::vector<int32_t> a32(a.begin(), a.end()), b32(b.begin(), b.end());
    EXPECT_EQ(EditDistance(a32, b32).total(), oracle::RecursiveEditDistance(a, 0, b, 0));
  }
}

TEST(Assignment, PicksBestPermutation) {
  std::vector<TokenSequence> refs = {{1, 2, 3}, {4, 5}};
  std::vector<TokenSequence> hyps = {{4, 5}, {1, 2, 3}};
  AssignmentResult r = AssignAndScore(refs, hyps);
  EXPECT_EQ(r.total_edits, 0);
  EXPECT_EQ(r.permutation, (std::vector<int32_t>{1, 0}));
  EXPECT_EQ(r.reference_tokens, 5);

  // A missing hypothesis counts every reference token as deleted.
  r = AssignAndScore(refs, {{1, 2, 3}});
  EXPECT_EQ(r.total_edits, 2);
  EXPECT_EQ(r.counts.deletions, 2);
  // An extra hypothesis on a single-speaker item is all insertions.
  r = AssignAndScore({{1, 2}}, {{1, 2}, {7, 7, 7}});
  EXPECT_EQ(r.counts.insertions, 3);
  EXPECT_EQ(r.reference_tokens, 2);
}

TEST(Assignment, ExhaustiveOptimumOnRandomInputs) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenSequence> refs(2), hyps(2);
    for (auto *set : {&refs, &hyps})
      for (auto &s : *set) {
        s.resize(rng.UniformInt(0, 4));
        for (auto &x : s) x = rng.UniformInt(1, 4);
      }
    int straight = EditDistance(refs[0], hyps[0]).total() + EditDistance(refs[1], hyps[1]).total();
    int crossed = EditDistance(refs[1], hyps[0]).total() + EditDistance(refs[0], hyps[1]).total();
    EXPECT_EQ(AssignAndScore(refs, hyps).total_edits, std::min(straight, crossed));
  }
}

TEST(SetScore, EmptySetIsUndefined) {
  SetScore s;
  EXPECT_FALSE(s.Wer().has_value());
  WerReport rep;
  nlohmann::json j = rep.ToJson();
  EXPECT_EQ(j["SingleSpkr"]["WER"], "n/a");
  EXPECT_EQ(j["Ave."], "n/a");
  s.reference_tokens = 8;
  s.counts = {1, 1, 0};
  EXPECT_DOUBLE_EQ(*s.Wer(), 25.0);
}

TEST(Correlation, PearsonCases) {
  std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8}, z = {4, 3, 2, 1};
  EXPECT_NEAR(PearsonCorrelation(x, y), 1.0, 1e-12);
  EXPECT_NEAR(PearsonCorrelation(x, z), -1.0, 1e-12);
  EXPECT_THROW(PearsonCorrelation(x, std::vector<double>{1}), GeometryError);
}

WiringDescriptor SmallCascade() {
  WiringDescriptor w;
  w.kind = WiringKind::kMtCascade;
  w.num_channels = 2;
  w.audio_encoder.input_dim = 12;
  w.audio_encoder.num_layers = 1;
  w.audio_encoder.max_frames = 40;
  w.audio_encoder.block = {8, 2, 2, 3};
  w.mask_encoder = w.audio_encoder;
  w.mask_encoder.positional = false;
  w.decoder = {6, 4, 6, 1, false, 7};
  return w;
}

std::vector<Example> Examples(Rng *rng) {
  std::vector<Example> v;
  for (int i = 0; i < 4; ++i) {
    Example ex;
    ex.id = "utt" + std::to_string(3 - i);
    ex.kind = i < 2 ? UtteranceKind::kSingle : UtteranceKind::kOverlapped;
    ex.features = RandomMatrix(20, 12, rng);
    ex.transcripts = {{1, 2}, i < 2 ? TokenSequence{} : TokenSequence{3, 4}};
    ex.activity = Matrix::Ones(20, 2);
    ex.overlap_s = i < 2 ? 0.0 : 0.3 * i;
    v.push_back(ex);
  }
  return v;
}

TEST(Evaluate, ReportStructureAndModes) {
  Rng rng(3);
  ModelBundle b(SmallCascade(), 4);
  auto data = Examples(&rng);
  WerReport mt = Evaluate(b, nullptr, data, EvalMode::kMt);
  EXPECT_EQ(mt.single.utterances, 2);
  EXPECT_EQ(mt.overlap.utterances, 2);
  EXPECT_EQ(mt.single.reference_tokens, 4);
  EXPECT_EQ(mt.overlap.reference_tokens, 8);
  ASSERT_EQ(mt.utterances.size(), 4u);
  EXPECT_EQ(mt.utterances.front().id, "utt0");
  EXPECT_FALSE(mt.sad.has_value());
  EXPECT_THROW(Evaluate(b, nullptr, data, EvalMode::kConditioned), ConfigError);

  ProbeModel probe;
  probe.weights = Matrix::Zero(8, 1);
  probe.bias = 20;
  probe.insertion_layer = 0;
  WerReport cond = Evaluate(b, &probe, data, EvalMode::kConditioned);
  EXPECT_EQ(cond.dispatch[0][1] + cond.dispatch[1][1], 4);
  EXPECT_DOUBLE_EQ(*cond.DispatchAccuracy(), 0.5);
  ASSERT_TRUE(cond.sad.has_value());
  EXPECT_DOUBLE_EQ(cond.sad->Accuracy(), 1.0);
  nlohmann::json j = cond.ToJson();
  EXPECT_TRUE(j.contains("dispatch"));
  EXPECT_EQ(j["mode"], "conditioned");

  std::ostringstream csv;
  WriteScatterCsv(cond, csv);
  const std::string rows = csv.str();
  EXPECT_EQ(rows.rfind("utt_id,estimated_overlap_s,actual_overlap_s\n", 0), 0u);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 3);
  nlohmann::json table = TableJson({mt, cond});
  EXPECT_EQ(table["rows"].size(), 2u);
}

}  // namespace
}  // namespace mtcascade
