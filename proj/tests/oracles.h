// oracles.h

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

// Brute-force reference computations shared by the unit tests and the
// acceptance runner.

#ifndef LSEEND_TESTS_ORACLES_H_
#define LSEEND_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "lseend/labels.h"
#include "test_util.h"

namespace lseend {
namespace testing {

inline AugmentedLabels RandomLabels(int frames, int n, int s, std::mt19937_64* rng) {
  std::bernoulli_distribution on(0.4);
  RawLabels raw;
  raw.y = MatrixD::Zero(frames, n);
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < n; ++c) raw.y(t, c) = on(*rng);
  return AppearanceOrderPermute(raw, s);
}

inline MatrixD RandomProbs(int frames, int g, std::mt19937_64* rng, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixD p(frames, g);
  for (int i = 0; i < p.size(); ++i) p.data()[i] = u(*rng);
  return p;
}

// Central differences of f over every entry of x.
inline MatrixD NumericGrad(const std::function<double(const MatrixD&)>& f, MatrixD x, double h = 1e-6) {
  MatrixD g(x.rows(), x.cols());
  for (int i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f(x);
    x.data()[i] = keep - h;
    const double down = f(x);
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double RelNorm(const MatrixD& a, const MatrixD& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

// Independent oracles.
inline double BceOracle(const MatrixD& p, const MatrixD& y, int scored) {
  double sum = 0;
  for (int t = 0; t < p.rows(); ++t)
    for (int s = 0; s < scored; ++s) {
      const double q = std::clamp(p(t, s), 1e-7, 1 - 1e-7);
      sum -= y(t, s) * std::log(q) + (1 - y(t, s)) * std::log(1 - q);
    }
  return sum / (p.rows() * scored);
}

inline double PitOracle(const MatrixD& p, const AugmentedLabels& y) {
  const int n = y.n_actual;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  double best = 1e300;
  do {
    MatrixD z = y.y;
    for (int i = 0; i < n; ++i) z.col(perm[i]) = y.y.col(i + 1);
    best = std::min(best, BceOracle(p, z, n + 2));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double PairOracle(const MatrixD& e, const MatrixD& y) {
  const int n = static_cast<int>(e.rows());
  double sum = 0;
  int pairs = 0;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      double ee = 0, ej = 0, ek = 0, yy = 0, yj = 0, yk = 0;
      for (int d = 0; d < e.cols(); ++d) {
        ee += e(j, d) * e(k, d);
        ej += e(j, d) * e(j, d);
        ek += e(k, d) * e(k, d);
      }
      for (int d = 0; d < y.cols(); ++d) {
        yy += y(j, d) * y(k, d);
        yj += y(j, d) * y(j, d);
        yk += y(k, d) * y(k, d);
      }
      const double diff = ee / std::sqrt(ej * ek) - yy / std::sqrt(yj * yk);
      sum += diff * diff;
      ++pairs;
    }
  return sum / pairs;
}

}  // namespace testing
}  // namespace lseend

#endif  // LSEEND_TESTS_ORACLES_H_
