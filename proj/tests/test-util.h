// tests/test-util.h

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

#ifndef MTCASCADE_TESTS_TEST_UTIL_H_
#define MTCASCADE_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "gtest/gtest.h"
#include "mtcascade/layers.h"

namespace mtcascade {
namespace testing_util {

inline Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, Rng *rng,
                           double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<Real>(scale * rng->Normal());
  return m;
}

// Builds the graph under test from the parameters in `store`.
using GraphFn = std::function<Var(const GraphContext &)>;

// Worst elementwise |analytic - numeric| / max(|analytic|, |numeric|, floor)
// over every trainable value, with objective sum(out .* R) for a fixed
// random R and central differences of step eps.
inline double MaxGradError(ParamStore *store, const GraphFn &fn,
                           double eps = 1e-5, double floor = 1e-2,
                           uint64_t seed = 99) {
  Rng rng(seed);
  Matrix weights;
  auto objective = [&](bool grads, GradientBuffer *buf) {
    Tape tape(grads);
    GraphContext ctx{&tape, store, true};
    Var out = fn(ctx);
    if (weights.size() == 0) weights = RandomMatrix(out.rows(), out.cols(), &rng);
    double f = (out.value().array() * weights.array()).sum();
    if (grads) {
      tape.Backward(out, weights);
      tape.AccumulateParamGrads(buf);
    }
    return f;
  };
  GradientBuffer buf(*store);
  objective(true, &buf);
  double worst = 0.0;
  for (size_t i = 0; i < store->size(); ++i) {
    Parameter &p = store->at(i);
    if (!p.trainable) continue;
    Matrix analytic = buf.Has(i) ? buf.at(i) : Matrix::Zero(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      Real saved = p.value.data()[k];
      p.value.data()[k] = saved + eps;
      double up = objective(false, nullptr);
      p.value.data()[k] = saved - eps;
      double down = objective(false, nullptr);
      p.value.data()[k] = saved;
      double numeric = (up - down) / (2 * eps);
      double a = analytic.data()[k];
      double err = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Fresh directory under the test temp root.
inline std::string TempDir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("mtcascade-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testing_util
}  // namespace mtcascade

#endif  // MTCASCADE_TESTS_TEST_UTIL_H_
