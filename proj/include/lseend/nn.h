// lseend/nn.h

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

#ifndef LSEEND_NN_H_
#define LSEEND_NN_H_

#include <cmath>
#include <string>

#include "lseend/common.h"

namespace lseend {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct LayerNormWeights {
  RowVector<T> g, b;

  Matrix<T> Apply(const Matrix<T>& x) const {
    Matrix<T> y(x.rows(), x.cols());
    for (int t = 0; t < x.rows(); ++t) {
      const T mean = x.row(t).mean();
      const T var = (x.row(t).array() - mean).square().mean();
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      y.row(t) = ((x.row(t).array() - mean) * inv * g.array() + b.array()).matrix();
    }
    return y;
  }
};

template <typename T>
struct Linear {
  Matrix<T> w;     // [in x out]
  RowVector<T> b;  // [out]

  int in_dim() const { return static_cast<int>(w.rows()); }
  int out_dim() const { return static_cast<int>(w.cols()); }

  Matrix<T> Apply(const Matrix<T>& x) const {
    Matrix<T> y = x * w;
    y.rowwise() += b;
    return y;
  }
};

/// Scales every row to unit L2 norm. Zero rows stay zero.
template <typename T>
Matrix<T> L2NormalizeRows(const Matrix<T>& x) {
  Matrix<T> y = x;
  for (int t = 0; t < y.rows(); ++t) {
    const T n = y.row(t).norm();
    if (n > T(0)) y.row(t) /= n;
  }
  return y;
}

/// Copies a tensor out of a TensorMap, cast to T, checking its shape.
template <typename T>
Matrix<T> TakeMatrix(const TensorMap& m, const std::string& name, int rows, int cols) {
  auto it = m.find(name);
  if (it == m.end()) throw InvalidArgument("missing tensor " + name);
  if (it->second.rows() != rows || it->second.cols() != cols)
    throw InvalidArgument("tensor " + name + " has shape [" +
                          std::to_string(it->second.rows()) + " x " +
                          std::to_string(it->second.cols()) + "], expected [" +
                          std::to_string(rows) + " x " + std::to_string(cols) + "]");
  return it->second.template cast<T>();
}

template <typename T>
RowVector<T> TakeRow(const TensorMap& m, const std::string& name, int cols) {
  return TakeMatrix<T>(m, name, 1, cols).row(0);
}

template <typename T>
LayerNormWeights<T> TakeLayerNorm(const TensorMap& m, const std::string& prefix, int dim) {
  return {TakeRow<T>(m, prefix + ".g", dim), TakeRow<T>(m, prefix + ".b", dim)};
}

template <typename T>
Linear<T> TakeLinear(const TensorMap& m, const std::string& prefix, int in, int out) {
  return {TakeMatrix<T>(m, prefix + ".w", in, out), TakeRow<T>(m, prefix + ".b", out)};
}

}  // namespace lseend

#endif  // LSEEND_NN_H_
