// autograd.cc

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

#include "lseend/autograd.h"

#include <algorithm>
#include <cmath>
#include <memory>

namespace lseend {
namespace ad {

using Eigen::Index;

Var Graph::Constant(MatrixD value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{size() - 1};
}

Var Graph::Leaf(MatrixD value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{size() - 1};
}

Var Graph::Make(MatrixD value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (Var v : inputs) {
    Require(v.valid() && v.id < size(), "autograd: input from another graph");
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{size() - 1};
}

Var Graph::Make(MatrixD value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return Make(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

MatrixD Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return MatrixD::Zero(n.value.rows(), n.value.cols());
}

MatrixD& Graph::acc(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = MatrixD::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

double Graph::scalar(Var v) const {
  Require(value(v).size() == 1, "autograd: value is not a scalar");
  return value(v)(0, 0);
}

void Graph::Backward(Var loss) {
  Require(value(loss).size() == 1, "autograd: Backward needs a scalar");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!requires_grad(loss)) return;
  acc(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
}

namespace {

void SameShape(const MatrixD& a, const MatrixD& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string("autograd: shape mismatch in ") + op);
}

}  // namespace

Var MatMul(Graph& g, Var a, Var b) {
  Require(g.value(a).cols() == g.value(b).rows(), "autograd: MatMul inner dimension");
  MatrixD y = g.value(a) * g.value(b);
  return g.Make(std::move(y), {a, b}, [a, b](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id).noalias() += gy * g.value(b).transpose();
    if (g.requires_grad(b)) g.acc(b.id).noalias() += g.value(a).transpose() * gy;
  });
}

Var MatMulBt(Graph& g, Var a, Var b) {
  Require(g.value(a).cols() == g.value(b).cols(), "autograd: MatMulBt inner dimension");
  MatrixD y = g.value(a) * g.value(b).transpose();
  return g.Make(std::move(y), {a, b}, [a, b](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id).noalias() += gy * g.value(b);
    if (g.requires_grad(b)) g.acc(b.id).noalias() += gy.transpose() * g.value(a);
  });
}

Var MatMulAt(Graph& g, Var a, Var b) {
  Require(g.value(a).rows() == g.value(b).rows(), "autograd: MatMulAt inner dimension");
  MatrixD y = g.value(a).transpose() * g.value(b);
  return g.Make(std::move(y), {a, b}, [a, b](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id).noalias() += g.value(b) * gy.transpose();
    if (g.requires_grad(b)) g.acc(b.id).noalias() += g.value(a) * gy;
  });
}

Var Add(Graph& g, Var a, Var b) {
  SameShape(g.value(a), g.value(b), "Add");
  MatrixD y = g.value(a) + g.value(b);
  return g.Make(std::move(y), {a, b}, [a, b](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id) += gy;
    if (g.requires_grad(b)) g.acc(b.id) += gy;
  });
}

Var Sub(Graph& g, Var a, Var b) {
  SameShape(g.value(a), g.value(b), "Sub");
  MatrixD y = g.value(a) - g.value(b);
  return g.Make(std::move(y), {a, b}, [a, b](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id) += gy;
    if (g.requires_grad(b)) g.acc(b.id) -= gy;
  });
}

Var Mul(Graph& g, Var a, Var b) {
  SameShape(g.value(a), g.value(b), "Mul");
  MatrixD y = g.value(a).cwiseProduct(g.value(b));
  return g.Make(std::move(y), {a, b}, [a, b](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id) += gy.cwiseProduct(g.value(b));
    if (g.requires_grad(b)) g.acc(b.id) += gy.cwiseProduct(g.value(a));
  });
}

Var AddRow(Graph& g, Var a, Var row) {
  Require(g.value(row).rows() == 1 && g.value(row).cols() == g.value(a).cols(),
          "autograd: AddRow needs a matching row vector");
  MatrixD y = g.value(a);
  y.rowwise() += g.value(row).row(0);
  return g.Make(std::move(y), {a, row}, [a, row](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a)) g.acc(a.id) += gy;
    if (g.requires_grad(row)) g.acc(row.id) += gy.colwise().sum();
  });
}

Var Scale(Graph& g, Var a, double c) {
  MatrixD y = g.value(a) * c;
  return g.Make(std::move(y), {a}, [a, c](Graph& g, int self) {
    g.acc(a.id) += g.grad_ref(self) * c;
  });
}

Var MulConst(Graph& g, Var a, const MatrixD& c) {
  SameShape(g.value(a), c, "MulConst");
  MatrixD y = g.value(a).cwiseProduct(c);
  return g.Make(std::move(y), {a}, [a, c](Graph& g, int self) {
    g.acc(a.id) += g.grad_ref(self).cwiseProduct(c);
  });
}

Var ScaleRowsConst(Graph& g, Var a, const ColVectorD& c) {
  Require(c.size() == g.value(a).rows(), "autograd: ScaleRowsConst length");
  MatrixD y = g.value(a).array().colwise() * c.array();
  return g.Make(std::move(y), {a}, [a, c](Graph& g, int self) {
    g.acc(a.id).array() += g.grad_ref(self).array().colwise() * c.array();
  });
}

Var RowSum(Graph& g, Var a) {
  MatrixD y = g.value(a).rowwise().sum();
  return g.Make(std::move(y), {a}, [a](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    g.acc(a.id).colwise() += gy.col(0);
  });
}

Var Max1Abs(Graph& g, Var a) {
  MatrixD y = g.value(a).cwiseAbs().cwiseMax(1.0);
  return g.Make(std::move(y), {a}, [a](Graph& g, int self) {
    const MatrixD& x = g.value(a);
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& ga = g.acc(a.id);
    for (Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      if (std::abs(v) > 1.0) ga.data()[i] += gy.data()[i] * (v > 0 ? 1.0 : -1.0);
    }
  });
}

Var DivRows(Graph& g, Var a, Var d) {
  Require(g.value(d).cols() == 1 && g.value(d).rows() == g.value(a).rows(),
          "autograd: DivRows needs a column of row divisors");
  MatrixD y = g.value(a).array().colwise() / g.value(d).col(0).array();
  return g.Make(std::move(y), {a, d}, [a, d](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    const auto dv = g.value(d).col(0).array();
    if (g.requires_grad(a)) g.acc(a.id).array() += gy.array().colwise() / dv;
    if (g.requires_grad(d)) {
      const ColVectorD num = gy.cwiseProduct(g.value(a)).rowwise().sum();
      g.acc(d.id).col(0).array() -= num.array() / dv.square();
    }
  });
}

Var MulRows(Graph& g, Var a, Var d) {
  Require(g.value(d).cols() == 1 && g.value(d).rows() == g.value(a).rows(),
          "autograd: MulRows needs a column of row factors");
  MatrixD y = g.value(a).array().colwise() * g.value(d).col(0).array();
  return g.Make(std::move(y), {a, d}, [a, d](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(a))
      g.acc(a.id).array() += gy.array().colwise() * g.value(d).col(0).array();
    if (g.requires_grad(d)) g.acc(d.id).col(0) += gy.cwiseProduct(g.value(a)).rowwise().sum();
  });
}

Var Detach(Graph& g, Var a) { return g.Constant(g.value(a)); }

Var Sigmoid(Graph& g, Var a) {
  MatrixD y = g.value(a).unaryExpr([](double v) { return lseend::Sigmoid(v); });
  return g.Make(std::move(y), {a}, [a](Graph& g, int self) {
    const MatrixD& s = g.value(self);
    g.acc(a.id).array() += g.grad_ref(self).array() * s.array() * (1.0 - s.array());
  });
}

Var Swish(Graph& g, Var a) {
  MatrixD y = g.value(a).unaryExpr([](double v) { return lseend::Swish(v); });
  return g.Make(std::move(y), {a}, [a](Graph& g, int self) {
    const MatrixD& x = g.value(a);
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& ga = g.acc(a.id);
    for (Index i = 0; i < x.size(); ++i) {
      const double s = lseend::Sigmoid(x.data()[i]);
      ga.data()[i] += gy.data()[i] * (s + x.data()[i] * s * (1.0 - s));
    }
  });
}

Var Glu(Graph& g, Var a) {
  const MatrixD& x = g.value(a);
  Require(x.cols() % 2 == 0, "autograd: Glu needs an even width");
  const Index h = x.cols() / 2;
  MatrixD gate = x.rightCols(h).unaryExpr([](double v) { return lseend::Sigmoid(v); });
  MatrixD y = x.leftCols(h).cwiseProduct(gate);
  return g.Make(std::move(y), {a}, [a, h, gate](Graph& g, int self) {
    const MatrixD& x = g.value(a);
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& ga = g.acc(a.id);
    ga.leftCols(h) += gy.cwiseProduct(gate);
    ga.rightCols(h).array() +=
        gy.array() * x.leftCols(h).array() * gate.array() * (1.0 - gate.array());
  });
}

Var ColSlice(Graph& g, Var a, int start, int n) {
  Require(start >= 0 && n >= 0 && start + n <= g.value(a).cols(), "autograd: ColSlice range");
  MatrixD y = g.value(a).middleCols(start, n);
  return g.Make(std::move(y), {a}, [a, start, n](Graph& g, int self) {
    g.acc(a.id).middleCols(start, n) += g.grad_ref(self);
  });
}

Var RowSlice(Graph& g, Var a, int start, int n) {
  Require(start >= 0 && n >= 0 && start + n <= g.value(a).rows(), "autograd: RowSlice range");
  MatrixD y = g.value(a).middleRows(start, n);
  return g.Make(std::move(y), {a}, [a, start, n](Graph& g, int self) {
    g.acc(a.id).middleRows(start, n) += g.grad_ref(self);
  });
}

Var ConcatCols(Graph& g, const std::vector<Var>& parts) {
  Require(!parts.empty(), "autograd: ConcatCols of nothing");
  const Index rows = g.value(parts[0]).rows();
  Index cols = 0;
  for (Var p : parts) {
    Require(g.value(p).rows() == rows, "autograd: ConcatCols row mismatch");
    cols += g.value(p).cols();
  }
  MatrixD y(rows, cols);
  Index c = 0;
  for (Var p : parts) {
    y.middleCols(c, g.value(p).cols()) = g.value(p);
    c += g.value(p).cols();
  }
  return g.Make(std::move(y), parts, [parts](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    Index c = 0;
    for (Var p : parts) {
      const Index w = g.value(p).cols();
      if (g.requires_grad(p)) g.acc(p.id) += gy.middleCols(c, w);
      c += w;
    }
  });
}

Var ConcatRows(Graph& g, const std::vector<Var>& parts) {
  Require(!parts.empty(), "autograd: ConcatRows of nothing");
  const Index cols = g.value(parts[0]).cols();
  Index rows = 0;
  for (Var p : parts) {
    Require(g.value(p).cols() == cols, "autograd: ConcatRows column mismatch");
    rows += g.value(p).rows();
  }
  MatrixD y(rows, cols);
  Index r = 0;
  for (Var p : parts) {
    y.middleRows(r, g.value(p).rows()) = g.value(p);
    r += g.value(p).rows();
  }
  return g.Make(std::move(y), parts, [parts](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    Index r = 0;
    for (Var p : parts) {
      const Index h = g.value(p).rows();
      if (g.requires_grad(p)) g.acc(p.id) += gy.middleRows(r, h);
      r += h;
    }
  });
}

Var GatherRows(Graph& g, Var a, const std::vector<int>& index) {
  const MatrixD& x = g.value(a);
  MatrixD y(static_cast<Index>(index.size()), x.cols());
  for (size_t i = 0; i < index.size(); ++i) {
    Require(index[i] >= 0 && index[i] < x.rows(), "autograd: GatherRows index");
    y.row(static_cast<Index>(i)) = x.row(index[i]);
  }
  return g.Make(std::move(y), {a}, [a, index](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& ga = g.acc(a.id);
    for (size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += gy.row(static_cast<Index>(i));
  });
}

Var RepeatRows(Graph& g, Var a, int times) {
  const MatrixD& x = g.value(a);
  MatrixD y(x.rows() * times, x.cols());
  for (Index r = 0; r < x.rows(); ++r)
    y.middleRows(r * times, times).rowwise() = x.row(r);
  return g.Make(std::move(y), {a}, [a, times](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& ga = g.acc(a.id);
    for (Index r = 0; r < ga.rows(); ++r)
      ga.row(r) += gy.middleRows(r * times, times).colwise().sum();
  });
}

Var TileRows(Graph& g, Var a, int times) {
  const MatrixD& x = g.value(a);
  const Index n = x.rows();
  MatrixD y(n * times, x.cols());
  for (int t = 0; t < times; ++t) y.middleRows(t * n, n) = x;
  return g.Make(std::move(y), {a}, [a, times, n](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& ga = g.acc(a.id);
    for (int t = 0; t < times; ++t) ga += gy.middleRows(t * n, n);
  });
}

Var GroupNormRows(Graph& g, Var x, int groups, Var gain, Var shift, double eps) {
  const MatrixD& xv = g.value(x);
  Require(groups >= 1 && xv.cols() % groups == 0, "autograd: GroupNormRows group count");
  Require(g.value(gain).rows() == 1 && g.value(gain).cols() == xv.cols() &&
              g.value(shift).rows() == 1 && g.value(shift).cols() == xv.cols(),
          "autograd: GroupNormRows parameter width");
  const Index w = xv.cols() / groups;
  MatrixD xhat(xv.rows(), xv.cols());
  MatrixD inv(xv.rows(), groups);
  for (Index t = 0; t < xv.rows(); ++t) {
    for (int k = 0; k < groups; ++k) {
      auto seg = xv.row(t).segment(k * w, w);
      const double mean = seg.mean();
      const double var = (seg.array() - mean).square().mean();
      const double iv = 1.0 / std::sqrt(var + eps);
      inv(t, k) = iv;
      xhat.row(t).segment(k * w, w) = ((seg.array() - mean) * iv).matrix();
    }
  }
  MatrixD y = xhat.array().rowwise() * g.value(gain).row(0).array();
  y.rowwise() += g.value(shift).row(0);
  return g.Make(std::move(y), {x, gain, shift},
                [x, gain, shift, groups, w, xhat, inv](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    if (g.requires_grad(gain)) g.acc(gain.id) += gy.cwiseProduct(xhat).colwise().sum();
    if (g.requires_grad(shift)) g.acc(shift.id) += gy.colwise().sum();
    if (!g.requires_grad(x)) return;
    MatrixD dxhat = gy.array().rowwise() * g.value(gain).row(0).array();
    MatrixD& gx = g.acc(x.id);
    for (Index t = 0; t < gy.rows(); ++t) {
      for (int k = 0; k < groups; ++k) {
        auto dh = dxhat.row(t).segment(k * w, w);
        auto xh = xhat.row(t).segment(k * w, w);
        const double m1 = dh.mean();
        const double m2 = dh.dot(xh) / static_cast<double>(w);
        gx.row(t).segment(k * w, w).array() +=
            inv(t, k) * (dh.array() - m1 - xh.array() * m2);
      }
    }
  });
}

Var LayerNorm(Graph& g, Var x, Var gain, Var shift, double eps) {
  return GroupNormRows(g, x, 1, gain, shift, eps);
}

Var L2NormalizeRows(Graph& g, Var x) {
  const MatrixD& xv = g.value(x);
  MatrixD y = xv;
  ColVectorD norms(xv.rows());
  for (Index t = 0; t < xv.rows(); ++t) {
    norms(t) = xv.row(t).norm();
    if (norms(t) > 0) y.row(t) /= norms(t);
  }
  return g.Make(std::move(y), {x}, [x, norms](Graph& g, int self) {
    const MatrixD& y = g.value(self);
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& gx = g.acc(x.id);
    for (Index t = 0; t < y.rows(); ++t) {
      if (norms(t) <= 0) continue;
      const double dot = gy.row(t).dot(y.row(t));
      gx.row(t) += (gy.row(t) - dot * y.row(t)) / norms(t);
    }
  });
}

Var CausalDepthwiseConv(Graph& g, Var x, Var w, Var b) {
  const MatrixD& xv = g.value(x);
  const MatrixD& wv = g.value(w);
  Require(wv.cols() == xv.cols() && g.value(b).rows() == 1 && g.value(b).cols() == xv.cols(),
          "autograd: depthwise conv shape");
  const Index n = xv.rows();
  const Index k = wv.rows();
  MatrixD y(n, xv.cols());
  y.rowwise() = g.value(b).row(0);
  for (Index j = 0; j < k; ++j) {
    const Index lag = k - 1 - j;  // y_t reads x_{t - lag}
    if (lag >= n) continue;
    y.bottomRows(n - lag).array() +=
        xv.topRows(n - lag).array().rowwise() * wv.row(j).array();
  }
  return g.Make(std::move(y), {x, w, b}, [x, w, b, n, k](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    const MatrixD& xv = g.value(x);
    const MatrixD& wv = g.value(w);
    if (g.requires_grad(b)) g.acc(b.id) += gy.colwise().sum();
    for (Index j = 0; j < k; ++j) {
      const Index lag = k - 1 - j;
      if (lag >= n) continue;
      if (g.requires_grad(x))
        g.acc(x.id).topRows(n - lag).array() +=
            gy.bottomRows(n - lag).array().rowwise() * wv.row(j).array();
      if (g.requires_grad(w))
        g.acc(w.id).row(j) +=
            gy.bottomRows(n - lag).cwiseProduct(xv.topRows(n - lag)).colwise().sum();
    }
  });
}

Var Im2Col(Graph& g, Var x, int kernel, int pad) {
  const MatrixD& xv = g.value(x);
  const Index n = xv.rows();
  const Index d = xv.cols();
  MatrixD y = MatrixD::Zero(n, kernel * d);
  for (int j = 0; j < kernel; ++j) {
    const Index shift = j - pad;
    const Index lo = std::max<Index>(0, -shift);
    const Index hi = std::min<Index>(n, n - shift);
    if (hi > lo) y.block(lo, j * d, hi - lo, d) = xv.middleRows(lo + shift, hi - lo);
  }
  return g.Make(std::move(y), {x}, [x, kernel, pad, n, d](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    MatrixD& gx = g.acc(x.id);
    for (int j = 0; j < kernel; ++j) {
      const Index shift = j - pad;
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(n, n - shift);
      if (hi > lo) gx.middleRows(lo + shift, hi - lo) += gy.block(lo, j * d, hi - lo, d);
    }
  });
}

Var GroupedSoftmaxAttention(Graph& g, Var q, Var k, Var v, int group, int n_heads) {
  const MatrixD& qv = g.value(q);
  SameShape(qv, g.value(k), "GroupedSoftmaxAttention");
  SameShape(qv, g.value(v), "GroupedSoftmaxAttention");
  Require(group >= 1 && qv.rows() % group == 0 && qv.cols() % n_heads == 0,
          "autograd: attention layout");
  const Index n = qv.rows() / group;
  const Index dh = qv.cols() / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<MatrixD>(n * n_heads * group, group);
  MatrixD y(qv.rows(), qv.cols());
  for (Index t = 0; t < n; ++t) {
    const Index r0 = t * group;
    for (int h = 0; h < n_heads; ++h) {
      MatrixD s = qv.block(r0, h * dh, group, dh) *
                  g.value(k).block(r0, h * dh, group, dh).transpose() * scale;
      for (Index i = 0; i < group; ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp().matrix();
        s.row(i) /= s.row(i).sum();
      }
      y.block(r0, h * dh, group, dh).noalias() = s * g.value(v).block(r0, h * dh, group, dh);
      probs->middleRows((t * n_heads + h) * group, group) = s;
    }
  }
  return g.Make(std::move(y), {q, k, v},
                [q, k, v, group, n_heads, n, dh, scale, probs](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    const bool gq = g.requires_grad(q), gk = g.requires_grad(k), gv = g.requires_grad(v);
    for (Index t = 0; t < n; ++t) {
      const Index r0 = t * group;
      for (int h = 0; h < n_heads; ++h) {
        const auto p = probs->middleRows((t * n_heads + h) * group, group);
        const auto go = gy.block(r0, h * dh, group, dh);
        if (gv) g.acc(v.id).block(r0, h * dh, group, dh).noalias() += p.transpose() * go;
        if (!gq && !gk) continue;
        MatrixD dp = go * g.value(v).block(r0, h * dh, group, dh).transpose();
        const ColVectorD rs = dp.cwiseProduct(p).rowwise().sum();
        MatrixD ds = p.cwiseProduct(dp.colwise() - rs) * scale;
        if (gq)
          g.acc(q.id).block(r0, h * dh, group, dh).noalias() +=
              ds * g.value(k).block(r0, h * dh, group, dh);
        if (gk)
          g.acc(k.id).block(r0, h * dh, group, dh).noalias() +=
              ds.transpose() * g.value(q).block(r0, h * dh, group, dh);
      }
    }
  });
}

Var SlotDot(Graph& g, Var a, Var e, int group) {
  const MatrixD& av = g.value(a);
  const MatrixD& ev = g.value(e);
  Require(av.cols() == ev.cols() && av.rows() == ev.rows() * group, "autograd: SlotDot layout");
  const Index n = ev.rows();
  MatrixD y(n, group);
  for (Index t = 0; t < n; ++t)
    y.row(t) = (av.middleRows(t * group, group) * ev.row(t).transpose()).transpose();
  return g.Make(std::move(y), {a, e}, [a, e, group, n](Graph& g, int self) {
    const MatrixD& gy = g.grad_ref(self);
    for (Index t = 0; t < n; ++t) {
      if (g.requires_grad(a))
        g.acc(a.id).middleRows(t * group, group).noalias() +=
            gy.row(t).transpose() * g.value(e).row(t);
      if (g.requires_grad(e))
        g.acc(e.id).row(t).noalias() += gy.row(t) * g.value(a).middleRows(t * group, group);
    }
  });
}

}  // namespace ad
}  // namespace lseend
