// test_util.h

// Copyright 2026  The lseend Authors

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

#ifndef LSEEND_TESTS_TEST_UTIL_H_
#define LSEEND_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <random>

#include "lseend/common.h"
#include "lseend/retention.h"

namespace lseend {
namespace testing {

inline MatrixD RandomMatrix(int rows, int cols, std::mt19937_64* rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixD m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(*rng);
  return m;
}

inline RowVectorD RandomRow(int cols, std::mt19937_64* rng, double scale = 1.0) {
  return RandomMatrix(1, cols, rng, scale).row(0);
}

// max |a - b| / max(1e-12, max |b|)
template <typename A, typename B>
double MaxRelError(const A& a, const B& b, double floor = 1e-12) {
  const double denom = std::max(floor, static_cast<double>(b.cwiseAbs().maxCoeff()));
  return static_cast<double>((a - b).cwiseAbs().maxCoeff()) / denom;
}

template <typename T>
RetentionWeights<T> RandomRetentionWeights(int d, int heads, std::mt19937_64* rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  RetentionWeights<T> w;
  w.w_q = RandomMatrix(d, d, rng, s).cast<T>();
  w.w_k = RandomMatrix(d, d, rng, s).cast<T>();
  w.w_v = RandomMatrix(d, d, rng, s).cast<T>();
  w.w_out = RandomMatrix(d, d, rng, s).cast<T>();
  w.gate_w = RandomMatrix(d, d, rng, s).cast<T>();
  w.gn_scale = (RowVectorD::Ones(d) + 0.1 * RandomRow(d, rng)).cast<T>();
  w.gn_shift = (0.1 * RandomRow(d, rng)).cast<T>();
  w.n_heads = heads;
  return w;
}

}  // namespace testing
}  // namespace lseend

#endif  // LSEEND_TESTS_TEST_UTIL_H_
