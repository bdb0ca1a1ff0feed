// tests/nn-core-test.cc

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
#include <fstream>

#include "gtest/gtest.h"
#include "mtcascade/checkpoint.h"
#include "mtcascade/layers.h"
#include "mtcascade/mt-model.h"
#include "mtcascade/optimizer.h"
#include "test-util.h"

namespace mtcascade {
namespace {

using testing_util::MaxGradError;
using testing_util::RandomMatrix;

TEST(Affine, IdentityAndHandCase) {
  Tape t;
  Matrix x(1, 2);
  x << 1, 2;
  Matrix b(1, 2);
  b << 3, 3;
  Var y = t.AddBias(t.MatMul(t.Constant(x), t.Constant(Matrix::Identity(2, 2))),
                    t.Constant(b));
  EXPECT_EQ(y.value()(0, 0), 4);
  EXPECT_EQ(y.value()(0, 1), 5);

  Var z = t.MatMul(t.Constant(x), t.Constant(Matrix::Identity(2, 2)));
  EXPECT_EQ(z.value(), x);
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  Tape t;
  try {
    t.MatMul(t.Constant(Matrix::Zero(2, 3)), t.Constant(Matrix::Zero(4, 5)));
    FAIL();
  } catch (const Error &e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Affine, GradientCheck) {
  Rng rng(1);
  ParamStore s;
  Linear lin(&s, "lin", 4, 3, &rng);
  s.Add("x", RandomMatrix(5, 4, &rng));
  double err = MaxGradError(&s, [&](const GraphContext &c) {
    return lin.Forward(c, c.P(s.Get("x").index));
  }, 1e-3);
  EXPECT_LE(err, 1e-4);
}

// One entry per elementwise or structural op, each checked in isolation.
struct OpCase {
  const char *name;
  std::function<Var(const GraphContext &, Var, Var)> fn;
};

class SimpleOpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(SimpleOpGradient, MatchesFiniteDifferences) {
  Rng rng(7);
  ParamStore s;
  size_t a = s.Add("a", RandomMatrix(4, 6, &rng)).index;
  size_t b = s.Add("b", RandomMatrix(4, 6, &rng)).index;
  const OpCase &op = GetParam();
  double err = MaxGradError(&s, [&](const GraphContext &c) {
    return op.fn(c, c.P(a), c.P(b));
  });
  EXPECT_LE(err, 1e-4) << op.name;
}

Var RowBias(const GraphContext &c, Var b) { return c.tape->SliceRows(b, 0, 1); }

INSTANTIATE_TEST_SUITE_P(
    Ops, SimpleOpGradient,
    ::testing::Values(
        OpCase{"matmul_nt", [](const GraphContext &c, Var a, Var b) {
                 return c.tape->MatMulNT(a, b);
               }},
        OpCase{"matmul", [](const GraphContext &c, Var a, Var b) {
                 return c.tape->MatMul(a, c.tape->Transpose(b));
               }},
        OpCase{"add", [](const GraphContext &c, Var a, Var b) { return c.tape->Add(a, b); }},
        OpCase{"add_bias", [](const GraphContext &c, Var a, Var b) {
                 return c.tape->AddBias(a, RowBias(c, b));
               }},
        OpCase{"scale", [](const GraphContext &c, Var a, Var) { return c.tape->Scale(a, -1.7); }},
        OpCase{"mul", [](const GraphContext &c, Var a, Var b) { return c.tape->Mul(a, b); }},
        OpCase{"sigmoid", [](const GraphContext &c, Var a, Var) { return c.tape->Sigmoid(a); }},
        OpCase{"tanh", [](const GraphContext &c, Var a, Var) { return c.tape->Tanh(a); }},
        OpCase{"swish", [](const GraphContext &c, Var a, Var) { return c.tape->Swish(a); }},
        OpCase{"softmax", [](const GraphContext &c, Var a, Var) { return c.tape->Softmax(a); }},
        OpCase{"log_softmax", [](const GraphContext &c, Var a, Var) {
                 return c.tape->LogSoftmax(a);
               }},
        OpCase{"layer_norm", [](const GraphContext &c, Var a, Var b) {
                 return c.tape->LayerNorm(a, RowBias(c, b), c.tape->SliceRows(b, 1, 1));
               }},
        OpCase{"transpose", [](const GraphContext &c, Var a, Var) { return c.tape->Transpose(a); }},
        OpCase{"slice_cols", [](const GraphContext &c, Var a, Var) {
                 return c.tape->SliceCols(a, 1, 3);
               }},
        OpCase{"concat_cols", [](const GraphContext &c, Var a, Var b) {
                 Var parts[2] = {a, c.tape->SliceCols(b, 2, 2)};
                 return c.tape->ConcatCols(parts);
               }},
        OpCase{"gather_rows", [](const GraphContext &c, Var a, Var) {
                 int32_t ids[5] = {3, 0, 0, 2, 3};
                 return c.tape->GatherRows(a, ids);
               }},
        OpCase{"depthwise_conv", [](const GraphContext &c, Var a, Var b) {
                 return c.tape->DepthwiseConv1d(a, c.tape->SliceRows(b, 0, 3),
                                                c.tape->SliceRows(b, 3, 1));
               }},
        OpCase{"pairwise_sum", [](const GraphContext &c, Var a, Var b) {
                 return c.tape->PairwiseSum(a, c.tape->SliceRows(b, 0, 3));
               }}),
    [](const ::testing::TestParamInfo<OpCase> &info) { return info.param.name; });

TEST(Relu, GradientAwayFromKink) {
  Rng rng(3);
  ParamStore s;
  Matrix v = RandomMatrix(3, 5, &rng);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v.data()[i]) < 0.1) v.data()[i] = 0.5;
  size_t a = s.Add("a", v).index;
  EXPECT_LE(MaxGradError(&s, [&](const GraphContext &c) {
    return c.tape->Relu(c.P(a));
  }), 1e-4);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(4);
  Tape t;
  Matrix p = t.Softmax(t.Constant(RandomMatrix(6, 9, &rng, 5.0))).value();
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
  Rng rng(5);
  Tape t;
  Matrix x = RandomMatrix(5, 16, &rng, 3.0);
  x.array() += 2.0;
  Matrix y = t.LayerNorm(t.Constant(x), t.Constant(Matrix::Ones(1, 16)),
                         t.Constant(Matrix::Zero(1, 16)))
                 .value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    double mean = y.row(r).mean();
    double var = (y.row(r).array() - mean).square().mean();
    EXPECT_LE(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Lstm, ZeroWeightsGiveZeroStates) {
  Rng rng(6);
  ParamStore s;
  LstmStack lstm(&s, "l", 3, 4, 2, true, &rng);
  for (size_t i = 0; i < s.size(); ++i) s.at(i).value.setZero();
  Tape t;
  GraphContext c{&t, &s, false};
  Matrix y = lstm.Forward(c, t.Constant(Matrix::Zero(5, 3))).value();
  EXPECT_EQ(y.rows(), 5);
  EXPECT_EQ(y.cols(), 8);
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0);
}

TEST(Lstm, EmptySequence) {
  Rng rng(6);
  ParamStore s;
  LstmStack lstm(&s, "l", 3, 4, 1, true, &rng);
  Tape t;
  GraphContext c{&t, &s, false};
  Matrix y = lstm.Forward(c, t.Constant(Matrix::Zero(0, 3))).value();
  EXPECT_EQ(y.rows(), 0);
  EXPECT_EQ(y.cols(), 8);
}

TEST(Lstm, GradientCheckBothDirections) {
  Rng rng(8);
  ParamStore s;
  LstmStack lstm(&s, "l", 3, 4, 2, true, &rng);
  size_t x = s.Add("x", RandomMatrix(3, 3, &rng)).index;
  EXPECT_LE(MaxGradError(&s, [&](const GraphContext &c) {
    return lstm.Forward(c, c.P(x));
  }), 1e-3);
}

ConformerConfig SmallBlock() { return ConformerConfig{8, 2, 2, 3}; }

TEST(Conformer, GradientCheck) {
  Rng rng(9);
  ParamStore s;
  ConformerBlock block(&s, "b", SmallBlock(), &rng);
  size_t x = s.Add("x", RandomMatrix(4, 8, &rng)).index;
  EXPECT_LE(MaxGradError(&s, [&](const GraphContext &c) {
    return block.Forward(c, c.P(x));
  }), 1e-3);
}

TEST(Conformer, ZeroWeightsReduceToLayerNorm) {
  Rng rng(10);
  ParamStore s;
  ConformerBlock block(&s, "b", SmallBlock(), &rng);
  for (size_t i = 0; i < s.size(); ++i) {
    Parameter &p = s.at(i);
    bool gamma = p.name.size() > 6 && p.name.substr(p.name.size() - 6) == ".gamma";
    p.value.setConstant(gamma ? 1 : 0);
  }
  Matrix x = RandomMatrix(5, 8, &rng);
  Tape t;
  GraphContext c{&t, &s, false};
  Matrix y = block.Forward(c, t.Constant(x)).value();
  Matrix ln = t.LayerNorm(t.Constant(x), t.Constant(Matrix::Ones(1, 8)),
                          t.Constant(Matrix::Zero(1, 8)))
                  .value();
  EXPECT_LE((y - ln).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Conformer, SingleFrameIgnoresQueryAndKey) {
  Rng rng(11);
  ParamStore s;
  ConformerBlock block(&s, "b", SmallBlock(), &rng);
  Matrix x = RandomMatrix(1, 8, &rng);
  auto run = [&]() {
    Tape t;
    GraphContext c{&t, &s, false};
    return Matrix(block.Forward(c, t.Constant(x)).value());
  };
  Matrix before = run();
  s.Get("b.att.query.weight").value = RandomMatrix(8, 8, &rng, 3.0);
  s.Get("b.att.key.weight").value = RandomMatrix(8, 8, &rng, 3.0);
  EXPECT_LE((run() - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conformer, HeadsMustDivideDim) {
  Rng rng(1);
  ParamStore s;
  EXPECT_THROW(ConformerBlock(&s, "b", ConformerConfig{10, 3, 2, 3}, &rng), ConfigError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore s;
  Parameter &p = s.Add("p", Matrix::Constant(2, 2, 0.5));
  AdamStep(&s, 0.1, AdamOptions{}, 1);
  EXPECT_EQ(p.value, Matrix::Constant(2, 2, 0.5));
  EXPECT_EQ(p.first_moment.cwiseAbs().maxCoeff(), 0);
  EXPECT_EQ(p.second_moment.cwiseAbs().maxCoeff(), 0);
}

TEST(Adam, FirstStepIsSignLike) {
  ParamStore s;
  Parameter &p = s.Add("p", Matrix::Constant(1, 1, 1.0));
  AdamOptions o;
  o.epsilon = 1e-8;
  const double g = -0.37, lr = 0.01;
  p.grad(0, 0) = g;
  AdamStep(&s, lr, o, 1);
  EXPECT_NEAR(p.value(0, 0), 1.0 - lr * g / (std::abs(g) + o.epsilon), 1e-12);
  EXPECT_EQ(p.grad(0, 0), 0);
}

TEST(Adam, ZeroBetasGiveRmsNormalizedSgd) {
  ParamStore s;
  Parameter &p = s.Add("p", Matrix::Constant(1, 2, 0.0));
  AdamOptions o{0.0, 0.0, 1e-8};
  const double lr = 0.1;
  for (int step = 1; step <= 2; ++step) {
    p.grad << 2.0, -0.5;
    AdamStep(&s, lr, o, step);
  }
  EXPECT_NEAR(p.value(0, 0), -2 * lr * 2.0 / (2.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p.value(0, 1), 2 * lr * 0.5 / (0.5 + 1e-8), 1e-12);
}

TEST(Adam, StepZeroRejected) {
  ParamStore s;
  s.Add("p", Matrix::Zero(1, 1));
  EXPECT_THROW(AdamStep(&s, 0.1, AdamOptions{}, 0), Error);
}

TEST(Schedule, WarmupPeakAndCosine) {
  ScheduleConfig cfg;
  EXPECT_DOUBLE_EQ(LearningRateAt(cfg.warmup_steps, cfg), 5e-4);
  EXPECT_DOUBLE_EQ(LearningRateAt(0, cfg), 0.0);
  cfg.floor_lr = 1e-5;
  int64_t mid = cfg.warmup_steps + (cfg.total_steps - cfg.warmup_steps) / 2;
  EXPECT_NEAR(LearningRateAt(mid, cfg), 0.5 * (cfg.peak_lr + cfg.floor_lr), 1e-15);
  EXPECT_DOUBLE_EQ(LearningRateAt(cfg.total_steps * 2, cfg), cfg.floor_lr);
  EXPECT_NEAR(LearningRateAt(cfg.warmup_steps / 2, cfg), 0.5 * cfg.peak_lr, 1e-15);
}

TEST(Schedule, InvalidConfigs) {
  ScheduleConfig a;
  a.floor_lr = 1.0;
  EXPECT_THROW(a.Validate(), ConfigError);
  ScheduleConfig b;
  b.warmup_steps = b.total_steps + 1;
  EXPECT_THROW(b.Validate(), ConfigError);
}

TEST(ParamStore, NamesAreUnique) {
  ParamStore s;
  s.Add("w", Matrix::Zero(1, 1));
  EXPECT_THROW(s.Add("w", Matrix::Zero(1, 1)), Error);
}

TEST(ParamStore, GradientBufferRejectsForeignParameters) {
  ParamStore a, b;
  a.Add("w", Matrix::Zero(1, 1));
  Parameter &foreign = b.Add("w", Matrix::Zero(1, 1));
  GradientBuffer buf(a);
  EXPECT_THROW(buf.For(foreign), Error);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing_util::TempDir("ckpt"); }
  std::string Path(const std::string &n) const { return dir_ + "/" + n; }

  static WiringDescriptor Cascade() {
    WiringDescriptor w;
    w.kind = WiringKind::kMtCascade;
    w.num_channels = 2;
    w.audio_encoder.input_dim = 12;
    w.audio_encoder.max_frames = 32;
    w.audio_encoder.block = {8, 2, 2, 3};
    w.mask_encoder = w.audio_encoder;
    w.mask_encoder.positional = false;
    w.decoder = {5, 4, 6, 1, false, 7};
    return w;
  }

  std::string dir_;
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  ModelBundle b(Cascade(), 3);
  b.Save(Path("m.ckpt"));
  ModelBundle c = ModelBundle::Load(Path("m.ckpt"));
  ASSERT_EQ(b.params().size(), c.params().size());
  for (size_t i = 0; i < b.params().size(); ++i) {
    const auto &x = b.params().at(i).value, &y = c.params().at(i).value;
    EXPECT_EQ(b.params().at(i).name, c.params().at(i).name);
    ASSERT_EQ(x.size(), y.size());
    for (Eigen::Index k = 0; k < x.size(); ++k)
      EXPECT_EQ(static_cast<float>(x.data()[k]), static_cast<float>(y.data()[k]));
  }
  EXPECT_EQ(c.wiring().ToJson(), b.wiring().ToJson());
}

TEST_F(CheckpointTest, AudioPrefixLoadLeavesMaskUntouched) {
  WiringDescriptor st = Cascade();
  st.kind = WiringKind::kSingleTalker;
  st.num_channels = 1;
  ModelBundle source(st, 1);
  source.Save(Path("st.ckpt"));
  ModelBundle target(Cascade(), 2);
  ModelBundle before(target);
  size_t n = target.LoadAudioEncoder(ReadCheckpoint(Path("st.ckpt")));
  EXPECT_GT(n, 0u);
  for (size_t i = 0; i < target.params().size(); ++i) {
    const Parameter &p = target.params().at(i);
    if (p.name.rfind("audio_encoder.", 0) == 0) {
      Matrix expect = source.params().Get(p.name).value.cast<float>().cast<Real>();
      EXPECT_EQ(p.value, expect) << p.name;
    } else {
      EXPECT_EQ(p.value, before.params().at(i).value) << p.name;
    }
  }
}

TEST_F(CheckpointTest, CorruptMagic) {
  ModelBundle(Cascade(), 3).Save(Path("m.ckpt"));
  std::fstream f(Path("m.ckpt"), std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(0);
  f.put('X');
  f.close();
  try {
    ReadCheckpoint(Path("m.ckpt"));
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
}

TEST_F(CheckpointTest, VersionMismatchAndTruncation) {
  ModelBundle(Cascade(), 3).Save(Path("m.ckpt"));
  std::string bytes;
  {
    std::ifstream in(Path("m.ckpt"), std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::string v2 = bytes;
  v2[4] = 2;
  std::ofstream(Path("v2.ckpt"), std::ios::binary) << v2;
  EXPECT_THROW(ReadCheckpoint(Path("v2.ckpt")), Error);
  std::ofstream(Path("short.ckpt"), std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  try {
    ReadCheckpoint(Path("short.ckpt"));
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  EXPECT_THROW(ReadCheckpoint(Path("missing.ckpt")), IoError);
}

TEST_F(CheckpointTest, StrictLoadRejectsUnknownNames) {
  ParamStore src;
  src.Add("a", Matrix::Ones(1, 2));
  src.Add("extra", Matrix::Ones(1, 1));
  SaveCheckpoint(src, nlohmann::json::object(), Path("p.ckpt"));
  Checkpoint ck = ReadCheckpoint(Path("p.ckpt"));
  ParamStore dst;
  dst.Add("a", Matrix::Zero(1, 2));
  EXPECT_THROW(LoadTensors(ck, &dst, "", true), Error);
  EXPECT_EQ(LoadTensors(ck, &dst, "", false), 1u);
  ParamStore wrong;
  wrong.Add("a", Matrix::Zero(2, 1));
  EXPECT_THROW(LoadTensors(ck, &wrong, "", false), GeometryError);
}

TEST_F(CheckpointTest, RefusesNonFinite) {
  ParamStore s;
  s.Add("a", Matrix::Constant(1, 1, std::nan("")));
  EXPECT_THROW(SaveCheckpoint(s, nlohmann::json::object(), Path("nan.ckpt")), Error);
}

}  // namespace
}  // namespace mtcascade
