// lseend/common.h

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

#ifndef LSEEND_COMMON_H_
#define LSEEND_COMMON_H_

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <string>

namespace lseend {

// Row-major so that a [T x D] matrix stores one frame per contiguous row.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;
using RowVectorD = RowVector<double>;
using ColVectorD = ColVector<double>;

// Named parameter tensors, the interchange format between the trainer, the
// checkpoint file and the inference engine.
using TensorMap = std::map<std::string, MatrixD>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool AllFinite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void RequireFinite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite())
    throw NumericError(std::string("non-finite values in ") + what);
}

inline void Require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

template <typename T>
inline T Sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
inline T Swish(T x) {
  return x * Sigmoid(x);
}

// Swish applied coefficient-wise.
template <typename Derived>
auto SwishOf(const Eigen::MatrixBase<Derived>& m) {
  using T = typename Derived::Scalar;
  return m.unaryExpr([](T v) { return Swish(v); });
}

}  // namespace lseend

#endif  // LSEEND_COMMON_H_
