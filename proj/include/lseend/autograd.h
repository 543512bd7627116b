// lseend/autograd.h

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

// Tape-based reverse-mode differentiation over double matrices.
//
// Every op appends a node to the graph. Backward() walks the tape in reverse
// and calls each node's closure, which accumulates into its inputs' grads.
// Nodes that depend on no trainable leaf carry no closure.

#ifndef LSEEND_AUTOGRAD_H_
#define LSEEND_AUTOGRAD_H_

#include <functional>
#include <vector>

#include "lseend/common.h"

namespace lseend {
namespace ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph;
using BackwardFn = std::function<void(Graph& g, int self)>;

class Graph {
 public:
  /// A value that receives no gradient.
  Var Constant(MatrixD value);
  /// A trainable leaf; its gradient is readable after Backward().
  Var Leaf(MatrixD value);

  /// Generic node construction used by the ops below.
  Var Make(MatrixD value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var Make(MatrixD value, const std::vector<Var>& inputs, BackwardFn fn);

  const MatrixD& value(Var v) const { return nodes_[v.id].value; }
  const MatrixD& value(int id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool has_grad(Var v) const { return nodes_[v.id].has_grad; }

  /// Gradient of the last Backward() target w.r.t. `v`; zeros if unreached.
  MatrixD grad(Var v) const;
  const MatrixD& grad_ref(int id) const { return nodes_[id].grad; }
  /// Accumulator for `id`, allocated as zeros on first use.
  MatrixD& acc(int id);

  /// `loss` must be 1 x 1.
  void Backward(Var loss);
  int size() const { return static_cast<int>(nodes_.size()); }
  double scalar(Var v) const;

 private:
  struct Node {
    MatrixD value;
    MatrixD grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Linear algebra.
Var MatMul(Graph& g, Var a, Var b);          // a * b
Var MatMulBt(Graph& g, Var a, Var b);        // a * b^T
Var MatMulAt(Graph& g, Var a, Var b);        // a^T * b
Var Add(Graph& g, Var a, Var b);
Var Sub(Graph& g, Var a, Var b);
Var Mul(Graph& g, Var a, Var b);             // element-wise
Var AddRow(Graph& g, Var a, Var row);        // a + broadcast row [1 x C]
Var Scale(Graph& g, Var a, double c);
Var MulConst(Graph& g, Var a, const MatrixD& c);        // element-wise by constant
Var ScaleRowsConst(Graph& g, Var a, const ColVectorD& c);
Var RowSum(Graph& g, Var a);                 // [R x 1]
Var Max1Abs(Graph& g, Var a);                // max(1, |a|) element-wise
Var DivRows(Graph& g, Var a, Var d);         // a_r / d_r, d is [R x 1]
Var MulRows(Graph& g, Var a, Var d);         // a_r * d_r
Var Detach(Graph& g, Var a);

// Point-wise non-linearities.
Var Sigmoid(Graph& g, Var a);
Var Swish(Graph& g, Var a);
Var Glu(Graph& g, Var a);                    // left half * sigmoid(right half)

// Layout.
Var ColSlice(Graph& g, Var a, int start, int n);
Var RowSlice(Graph& g, Var a, int start, int n);
Var ConcatCols(Graph& g, const std::vector<Var>& parts);
Var ConcatRows(Graph& g, const std::vector<Var>& parts);
Var GatherRows(Graph& g, Var a, const std::vector<int>& index);
Var RepeatRows(Graph& g, Var a, int times);  // row r -> rows r*times .. r*times+times-1
Var TileRows(Graph& g, Var a, int times);    // [G x C] -> [times*G x C]

// Normalization.
Var GroupNormRows(Graph& g, Var x, int groups, Var gain, Var shift, double eps);
Var LayerNorm(Graph& g, Var x, Var gain, Var shift, double eps);
Var L2NormalizeRows(Graph& g, Var x);

// Sequence ops.
/// y_t = b + sum_j w_j . x_{t-(K-1)+j}, zeros before the start.
Var CausalDepthwiseConv(Graph& g, Var x, Var w, Var b);
/// Row t = [x_{t-pad} ... x_{t-pad+K-1}], zero rows outside [0, T).
Var Im2Col(Graph& g, Var x, int kernel, int pad);
/// Softmax multi-head attention within consecutive groups of `group` rows.
Var GroupedSoftmaxAttention(Graph& g, Var q, Var k, Var v, int group, int n_heads);
/// logits(t, s) = a_{t*G+s} . e_t, returns [T x G].
Var SlotDot(Graph& g, Var a, Var e, int group);

}  // namespace ad
}  // namespace lseend

#endif  // LSEEND_AUTOGRAD_H_
