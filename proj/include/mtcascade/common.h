// include/mtcascade/common.h

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

#ifndef MTCASCADE_COMMON_H_
#define MTCASCADE_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtcascade {

// The numerics library is built twice: float for training and inference,
// double for gradient and lattice oracles in tests.
#ifdef MTCASCADE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

using Matrix =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

// Token ids exclude blank (id 0). Valid ids are 1 .. vocab_size - 1.
using TokenSequence = std::vector<int32_t>;

inline constexpr int32_t kBlankId = 0;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, profile values, or shapes in configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File missing, unreadable, truncated or failing to write.
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/probe/model geometry does not match the request.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Data-level contract violated (bad lattice, bad token, length mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

std::string ShapeString(const Matrix &m);

// Deterministic RNG. Distribution helpers are implemented on top of the raw
// mt19937_64 stream so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1).
  double Uniform() { return (engine_() >> 11) * (1.0 / 9007199254740992.0); }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [lo, hi].
  int64_t UniformInt(int64_t lo, int64_t hi);
  double Normal();
  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; derives independent sub-seeds from (seed, index).
uint64_t DeriveSeed(uint64_t seed, uint64_t index);

}  // namespace mtcascade

#endif  // MTCASCADE_COMMON_H_
