// losses.cc

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

#include "lseend/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lseend/hungarian.h"

namespace lseend {

namespace {

void CheckShapes(const MatrixD& y_hat, const AugmentedLabels& y) {
  if (y_hat.rows() != y.y.rows() || y_hat.cols() != y.y.cols())
    throw InvalidArgument("loss: prediction shape does not match labels");
  Require(y.n_actual + 2 <= y.slots(), "loss: labels have no room for the termination slot");
  RequireFinite(y_hat, "predictions");
}

double Clip(double p) { return std::min(std::max(p, kProbClip), 1.0 - kProbClip); }

double ElementBce(double p, double label) {
  const double c = Clip(p);
  return -(label * std::log(c) + (1.0 - label) * std::log(1.0 - c));
}

double ElementGrad(double p, double label) {
  if (p < kProbClip || p > 1.0 - kProbClip) return 0.0;
  return -label / p + (1.0 - label) / (1.0 - p);
}

}  // namespace

double BceDiarizationLoss(const MatrixD& y_hat, const AugmentedLabels& y, MatrixD* grad) {
  CheckShapes(y_hat, y);
  const int n_frames = y.frames();
  const int slots = y.scored_slots();
  if (grad) grad->setZero(y_hat.rows(), y_hat.cols());
  if (n_frames == 0) return 0.0;
  const double norm = 1.0 / (static_cast<double>(n_frames) * slots);
  double sum = 0.0;
  for (int t = 0; t < n_frames; ++t) {
    for (int s = 0; s < slots; ++s) {
      sum += ElementBce(y_hat(t, s), y.y(t, s));
      if (grad) (*grad)(t, s) = ElementGrad(y_hat(t, s), y.y(t, s)) * norm;
    }
  }
  return sum * norm;
}

AugmentedLabels PermuteSpeakers(const AugmentedLabels& y, const std::vector<int>& perm) {
  Require(static_cast<int>(perm.size()) == y.n_actual, "PIT: permutation size mismatch");
  AugmentedLabels out = y;
  std::vector<int> order(y.n_actual, -1);
  for (int i = 0; i < y.n_actual; ++i) {
    Require(perm[i] >= 1 && perm[i] <= y.n_actual, "PIT: permutation out of range");
    out.y.col(perm[i]) = y.y.col(i + 1);
    if (!y.order.empty()) order[perm[i] - 1] = y.order[i];
  }
  if (!y.order.empty()) out.order = order;
  return out;
}

PitResult PitDiarizationLoss(const MatrixD& y_hat, const AugmentedLabels& y, MatrixD* grad) {
  CheckShapes(y_hat, y);
  const int n = y.n_actual;
  const int n_frames = y.frames();
  PitResult res;
  res.perm.resize(n);
  std::iota(res.perm.begin(), res.perm.end(), 1);
  if (n >= 2 && n_frames > 0) {
    // cost(i, j): summed BCE of label speaker i + 1 on output slot j + 1.
    MatrixD cost = MatrixD::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int t = 0; t < n_frames; ++t) cost(i, j) += ElementBce(y_hat(t, j + 1), y.y(t, i + 1));
    if (n <= 8) {
      std::vector<int> p(n);
      std::iota(p.begin(), p.end(), 0);
      double best = std::numeric_limits<double>::infinity();
      do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += cost(i, p[i]);
        if (c < best) {
          best = c;
          for (int i = 0; i < n; ++i) res.perm[i] = p[i] + 1;
        }
      } while (std::next_permutation(p.begin(), p.end()));
    } else {
      const std::vector<int> a = SolveAssignment(cost);
      for (int i = 0; i < n; ++i) res.perm[i] = a[i] + 1;
    }
  }
  res.loss = BceDiarizationLoss(y_hat, PermuteSpeakers(y, res.perm), grad);
  return res;
}

double EmbeddingSimilarityLoss(const MatrixD& e, const AugmentedLabels& y, MatrixD* grad,
                               bool* degenerate, const PairLossOptions& opts) {
  const int n = static_cast<int>(e.rows());
  Require(y.frames() == n, "embedding loss: frame count mismatch");
  RequireFinite(e, "embeddings");
  if (grad) grad->setZero(e.rows(), e.cols());
  if (degenerate) *degenerate = n < 2;
  if (n < 2) return 0.0;

  MatrixD u = e;
  ColVectorD norms(n);
  for (int t = 0; t < n; ++t) {
    norms(t) = e.row(t).norm();
    if (norms(t) > 0) u.row(t) /= norms(t);
  }
  MatrixD lab = y.y;
  for (int t = 0; t < n; ++t) {
    const double l = lab.row(t).norm();
    if (l > 0) lab.row(t) /= l;
  }

  MatrixD gu;  // dL/du
  double loss = 0.0;
  if (n <= opts.max_full_frames) {
    MatrixD diff = u * u.transpose() - lab * lab.transpose();
    diff.diagonal().setZero();
    const double pairs = 0.5 * n * (n - 1.0);
    loss = 0.5 * diff.squaredNorm() / pairs;
    if (grad) gu = (2.0 / pairs) * (diff * u);
  } else {
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    if (grad) gu = MatrixD::Zero(n, e.cols());
    const double m = static_cast<double>(opts.sampled_pairs);
    for (int64_t i = 0; i < opts.sampled_pairs; ++i) {
      const int j = pick(rng);
      int k = pick(rng);
      while (k == j) k = pick(rng);
      const double d = u.row(j).dot(u.row(k)) - lab.row(j).dot(lab.row(k));
      loss += d * d / m;
      if (grad) {
        gu.row(j) += (2.0 * d / m) * u.row(k);
        gu.row(k) += (2.0 * d / m) * u.row(j);
      }
    }
  }
  if (grad) {
    for (int t = 0; t < n; ++t) {
      if (norms(t) <= 0) continue;
      const double dot = gu.row(t).dot(u.row(t));
      grad->row(t) = (gu.row(t) - dot * u.row(t)) / norms(t);
    }
  }
  return loss;
}

LossReport TotalLoss(const MatrixD& y_hat, const MatrixD& e, const AugmentedLabels& y,
                     LossMode mode, MatrixD* grad_y_hat, MatrixD* grad_e,
                     const PairLossOptions& opts) {
  LossReport r;
  if (mode == LossMode::kPit) {
    PitResult p = PitDiarizationLoss(y_hat, y, grad_y_hat);
    r.l_d = p.loss;
    r.permutation = p.perm;
  } else {
    r.l_d = BceDiarizationLoss(y_hat, y, grad_y_hat);
  }
  r.l_e = EmbeddingSimilarityLoss(e, y, grad_e, &r.embedding_degenerate, opts);
  r.total = r.l_d + r.l_e;
  return r;
}

}  // namespace lseend
