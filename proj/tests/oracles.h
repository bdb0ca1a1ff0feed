// tests/oracles.h

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

#ifndef MTCASCADE_TESTS_ORACLES_H_
#define MTCASCADE_TESTS_ORACLES_H_

// Reference implementations used only to check the library: exhaustive
// path enumeration for the transducer loss, a direct DFT, and a recursive
// edit distance.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "mtcascade/transducer.h"

namespace mtcascade {
namespace oracle {

// Sums the probability of every monotone alignment explicitly. lp(t, u, k)
// is the log-probability at grid node (t, u).
inline double EnumeratedNll(
    int T, int U, const std::function<double(int, int, int)> &lp,
    const std::vector<int> &labels, int blank, int *num_paths = nullptr) {
  double total = 0.0;
  int count = 0;
  std::function<void(int, int, double)> walk = [&](int t, int u, double logp) {
    if (t == T) {
      if (u == U) {
        total += std::exp(logp);
        ++count;
      }
      return;
    }
    if (u < U) walk(t, u + 1, logp + lp(t, u, labels[u]));
    walk(t + 1, u, logp + lp(t, u, blank));
  };
  walk(0, 0, 0.0);
  if (num_paths) *num_paths = count;
  return -std::log(total);
}

inline double EnumeratedNll(const JointLattice &lat, const std::vector<int> &labels,
                            int *num_paths = nullptr) {
  return EnumeratedNll(
      lat.num_frames, lat.num_labels,
      [&](int t, int u, int k) { return static_cast<double>(lat.Slice(t, u)[k]); },
      labels, lat.blank_id, num_paths);
}

// Random normalized lattice of shape T x (U+1) x V.
inline JointLattice RandomLattice(int T, int U, int V, Rng *rng, double scale = 2.0) {
  JointLattice lat;
  lat.num_frames = T;
  lat.num_labels = U;
  lat.log_probs.resize(static_cast<Eigen::Index>(T) * (U + 1), V);
  for (Eigen::Index r = 0; r < lat.log_probs.rows(); ++r) {
    double mx = -1e300;
    std::vector<double> z(V);
    for (int k = 0; k < V; ++k) mx = std::max(mx, z[k] = scale * rng->Normal());
    double s = 0;
    for (int k = 0; k < V; ++k) s += std::exp(z[k] - mx);
    for (int k = 0; k < V; ++k)
      lat.log_probs(r, k) = static_cast<Real>(z[k] - mx - std::log(s));
  }
  return lat;
}

// |X(f)|^2 of a windowed frame at an arbitrary frequency by direct summation.
inline double DftPower(const std::vector<double> &x, double freq_hz, double rate) {
  std::complex<double> acc = 0.0;
  for (size_t n = 0; n < x.size(); ++n)
    acc += x[n] * std::polar(1.0, -2.0 * M_PI * freq_hz * n / rate);
  return std::norm(acc);
}

// Exponential-time Levenshtein distance.
inline int RecursiveEditDistance(const std::vector<int> &a, size_t i,
                                 const std::vector<int> &b, size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  int sub = RecursiveEditDistance(a, i + 1, b, j + 1) + (a[i] != b[j]);
  int del = RecursiveEditDistance(a, i + 1, b, j) + 1;
  int ins = RecursiveEditDistance(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

}  // namespace oracle
}  // namespace mtcascade

#endif  // MTCASCADE_TESTS_ORACLES_H_
