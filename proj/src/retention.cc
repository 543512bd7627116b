// retention.cc

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

#include "lseend/retention.h"

#include "lseend/nn.h"

#include <algorithm>
#include <cmath>

namespace lseend {

std::vector<double> MultiscaleGammas(int n_heads) {
  Require(n_heads >= 1, "MultiscaleGammas: head count must be positive");
  std::vector<double> g(n_heads);
  for (int k = 0; k < n_heads; ++k) g[k] = 1.0 - std::ldexp(1.0, -5 - k);
  return g;
}

std::vector<double> UnitGammas(int n_heads) {
  Require(n_heads >= 1, "UnitGammas: head count must be positive");
  return std::vector<double>(n_heads, 1.0);
}

void RetentionConfig::Validate() const {
  Require(!gammas.empty(), "retention: at least one head is required");
  for (double g : gammas)
    Require(g > 0.0 && g <= 1.0, "retention: gamma must lie in (0, 1]");
  Require(group_norm_eps > 0.0, "retention: group norm epsilon must be positive");
}

template <typename T>
void RetentionWeights<T>::Validate() const {
  const int d = dim();
  Require(n_heads >= 1 && d % n_heads == 0, "retention: D must be divisible by n_heads");
  Require(!use_rotary, "retention: rotary position terms are not supported");
  auto square = [d](const Matrix<T>& m) { return m.rows() == d && m.cols() == d; };
  Require(square(w_q) && square(w_k) && square(w_v) && square(w_out) && square(gate_w),
          "retention: projection matrices must be [D x D]");
  Require(gn_scale.size() == d && gn_shift.size() == d,
          "retention: group norm parameters must have D entries");
}

template <typename T>
RetentionState<T>::RetentionState(const RetentionConfig& cfg, int head_dim)
    : gammas(cfg.gammas), scaling(cfg.scaling) {
  cfg.Validate();
  Require(head_dim >= 1, "retention: head_dim must be positive");
  const int h = cfg.n_heads();
  s.assign(h, Matrix<T>::Zero(head_dim, head_dim));
  key_sum.assign(h, RowVector<T>::Zero(head_dim));
  decay_sum.assign(h, T(0));
}

template <typename T>
void RetentionState<T>::Reset() {
  for (auto& m : s) m.setZero();
  for (auto& z : key_sum) z.setZero();
  std::fill(decay_sum.begin(), decay_sum.end(), T(0));
  step = 0;
}

template <typename T>
ChunkState<T>::ChunkState(const RetentionConfig& cfg, int head_dim, int chunk_len_in)
    : gammas(cfg.gammas), scaling(cfg.scaling), chunk_len(chunk_len_in) {
  cfg.Validate();
  Require(head_dim >= 1, "retention: head_dim must be positive");
  Require(chunk_len_in >= 1, "retention: chunk length must be positive");
  const int h = cfg.n_heads();
  r.assign(h, Matrix<T>::Zero(head_dim, head_dim));
  key_sum.assign(h, RowVector<T>::Zero(head_dim));
  decay_sum.assign(h, T(0));
}

template <typename T>
void ChunkState<T>::Reset() {
  for (auto& m : r) m.setZero();
  for (auto& z : key_sum) z.setZero();
  std::fill(decay_sum.begin(), decay_sum.end(), T(0));
  chunk_index = 0;
  closed = false;
}

namespace {

// gamma^k for k = 0..n-1, evaluated in double.
std::vector<double> Powers(double gamma, int n) {
  std::vector<double> p(std::max(n, 1));
  p[0] = 1.0;
  for (int k = 1; k < n; ++k) p[k] = p[k - 1] * gamma;
  return p;
}

template <typename T>
void CheckQkv(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, int n_heads) {
  Require(q.rows() == k.rows() && q.rows() == v.rows(), "retention: q/k/v row mismatch");
  Require(q.cols() == k.cols() && q.cols() == v.cols(), "retention: q/k/v width mismatch");
  Require(q.cols() % n_heads == 0, "retention: width not divisible by head count");
}

}  // namespace

template <typename T>
Matrix<T> RetentionCoreParallel(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                const RetentionConfig& cfg) {
  cfg.Validate();
  CheckQkv(q, k, v, cfg.n_heads());
  const int n = static_cast<int>(q.rows());
  Require(n >= 1, "retention: empty sequence");
  const int dh = static_cast<int>(q.cols()) / cfg.n_heads();
  const bool norm = cfg.scaling == RetentionScaling::kNormalized;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix<T> out(n, q.cols());
  for (int h = 0; h < cfg.n_heads(); ++h) {
    const auto pw = Powers(cfg.gammas[h], n);
    Matrix<T> scores = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose();
    double decay_sum = 0.0;
    for (int t = 0; t < n; ++t) {
      decay_sum = decay_sum * cfg.gammas[h] + 1.0;
      const double row_scale = norm ? inv_sqrt / decay_sum : 1.0;
      T rsum = 0;
      for (int tau = 0; tau <= t; ++tau) {
        scores(t, tau) *= static_cast<T>(pw[t - tau] * row_scale);
        rsum += scores(t, tau);
      }
      for (int tau = t + 1; tau < n; ++tau) scores(t, tau) = T(0);
      if (norm) {
        const T denom = std::max(T(1), std::abs(rsum));
        scores.row(t).head(t + 1) /= denom;
      }
    }
    out.middleCols(h * dh, dh).noalias() =
        scores.template triangularView<Eigen::Lower>() * v.middleCols(h * dh, dh);
  }
  return out;
}

template <typename T>
RowVector<T> RetentionCoreStep(const RowVector<T>& q, const RowVector<T>& k,
                               const RowVector<T>& v, RetentionState<T>* state) {
  Require(state != nullptr, "retention: recurrent step needs a state");
  const int n_heads = static_cast<int>(state->gammas.size());
  const int dh = state->head_dim();
  Require(q.size() == n_heads * dh && k.size() == q.size() && v.size() == q.size(),
          "retention: step input width does not match state");
  const bool norm = state->scaling == RetentionScaling::kNormalized;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  RowVector<T> out(q.size());
  for (int h = 0; h < n_heads; ++h) {
    const T g = static_cast<T>(state->gammas[h]);
    auto qh = q.segment(h * dh, dh);
    auto kh = k.segment(h * dh, dh);
    auto vh = v.segment(h * dh, dh);
    Matrix<T>& s = state->s[h];
    if (g != T(1)) {
      s *= g;
      state->key_sum[h] *= g;
    }
    s.noalias() += kh.transpose() * vh;
    state->key_sum[h] += kh;
    state->decay_sum[h] = g * state->decay_sum[h] + T(1);
    auto oh = out.segment(h * dh, dh);
    oh.noalias() = qh * s;
    if (norm) {
      const T row_scale = inv_sqrt / state->decay_sum[h];
      oh *= row_scale;
      const T rsum = qh.dot(state->key_sum[h]) * row_scale;
      oh /= std::max(T(1), std::abs(rsum));
    }
  }
  ++state->step;
  return out;
}

template <typename T>
Matrix<T> RetentionCoreChunk(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                             ChunkState<T>* state) {
  Require(state != nullptr, "retention: chunkwise form needs a state");
  const int n_heads = static_cast<int>(state->gammas.size());
  CheckQkv(q, k, v, n_heads);
  const int b = static_cast<int>(q.rows());
  Require(b >= 1, "retention: empty chunk");
  if (state->closed)
    throw InvalidArgument("retention: chunk after a short final chunk");
  if (b > state->chunk_len)
    throw InvalidArgument("retention: chunk longer than the state's chunk length");
  const int dh = static_cast<int>(q.cols()) / n_heads;
  Require(state->r.size() == static_cast<size_t>(n_heads) &&
              state->r[0].rows() == dh,
          "retention: chunk state does not match head layout");
  const bool norm = state->scaling == RetentionScaling::kNormalized;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix<T> out(b, q.cols());
  for (int h = 0; h < n_heads; ++h) {
    const double gamma = state->gammas[h];
    const auto pw = Powers(gamma, b + 1);
    auto qh = q.middleCols(h * dh, dh);
    auto kh = k.middleCols(h * dh, dh);
    auto vh = v.middleCols(h * dh, dh);

    Matrix<T> inner = qh * kh.transpose();
    Matrix<T> cross = qh * state->r[h];
    ColVector<T> cross_sum = qh * state->key_sum[h].transpose();
    const double prev_decay_sum = static_cast<double>(state->decay_sum[h]);
    double local_sum = 0.0;
    for (int m = 0; m < b; ++m) {
      local_sum = local_sum * gamma + 1.0;
      const double xi = pw[m + 1];
      const double decay_sum = local_sum + xi * prev_decay_sum;
      const double row_scale = norm ? inv_sqrt / decay_sum : 1.0;
      T rsum = 0;
      for (int j = 0; j <= m; ++j) {
        inner(m, j) *= static_cast<T>(pw[m - j] * row_scale);
        rsum += inner(m, j);
      }
      for (int j = m + 1; j < b; ++j) inner(m, j) = T(0);
      cross.row(m) *= static_cast<T>(xi * row_scale);
      rsum += cross_sum(m) * static_cast<T>(xi * row_scale);
      if (norm) {
        const T denom = std::max(T(1), std::abs(rsum));
        inner.row(m).head(m + 1) /= denom;
        cross.row(m) /= denom;
      }
    }
    out.middleCols(h * dh, dh).noalias() =
        inner.template triangularView<Eigen::Lower>() * vh;
    out.middleCols(h * dh, dh) += cross;

    // R_i = K^T (V . zeta) + gamma^B R_{i-1}
    ColVector<T> zeta(b);
    T zeta_sum = 0;
    for (int m = 0; m < b; ++m) {
      zeta(m) = static_cast<T>(pw[b - 1 - m]);
      zeta_sum += zeta(m);
    }
    const T decay_b = static_cast<T>(pw[b]);
    Matrix<T> weighted_v = vh.array().colwise() * zeta.array();
    state->r[h] *= decay_b;
    state->r[h].noalias() += kh.transpose() * weighted_v;
    state->key_sum[h] = decay_b * state->key_sum[h] + zeta.transpose() * kh;
    state->decay_sum[h] = decay_b * state->decay_sum[h] + zeta_sum;
  }
  ++state->chunk_index;
  if (b < state->chunk_len) state->closed = true;
  return out;
}

template <typename T>
Matrix<T> GroupNormHeads(const Matrix<T>& x, int n_heads, const RowVector<T>& scale,
                         const RowVector<T>& shift, double eps) {
  Require(n_heads >= 1 && x.cols() % n_heads == 0, "group norm: bad head count");
  Require(scale.size() == x.cols() && shift.size() == x.cols(),
          "group norm: parameter width mismatch");
  const int dh = static_cast<int>(x.cols()) / n_heads;
  Matrix<T> y(x.rows(), x.cols());
  for (int t = 0; t < x.rows(); ++t) {
    for (int h = 0; h < n_heads; ++h) {
      auto seg = x.row(t).segment(h * dh, dh);
      const T mean = seg.mean();
      const T var = (seg.array() - mean).square().mean();
      const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
      y.row(t).segment(h * dh, dh) = ((seg.array() - mean) * inv).matrix();
    }
  }
  y.array().rowwise() *= scale.array();
  y.array().rowwise() += shift.array();
  return y;
}

template <typename T>
Matrix<T> RetentionOutput(const Matrix<T>& x, const Matrix<T>& heads,
                          const RetentionWeights<T>& w, double eps) {
  Matrix<T> normed = GroupNormHeads(heads, w.n_heads, w.gn_scale, w.gn_shift, eps);
  Matrix<T> gate = x * w.gate_w;
  normed.array() *= SwishOf(gate).array();
  return normed * w.w_out;
}

namespace {

template <typename T>
void CheckLayerInput(const Matrix<T>& x, const RetentionWeights<T>& w) {
  w.Validate();
  Require(x.cols() == w.dim(), "retention: input width does not match weights");
  RequireFinite(x, "retention input");
}

}  // namespace

template <typename T>
Matrix<T> RetentionParallel(const Matrix<T>& x, const RetentionWeights<T>& w,
                            const RetentionConfig& cfg) {
  CheckLayerInput(x, w);
  Require(cfg.n_heads() == w.n_heads, "retention: gamma count does not match heads");
  Require(x.rows() >= 1, "retention: empty sequence");
  Matrix<T> q = x * w.w_q, k = x * w.w_k, v = x * w.w_v;
  Matrix<T> heads = RetentionCoreParallel(q, k, v, cfg);
  return RetentionOutput(x, heads, w, cfg.group_norm_eps);
}

template <typename T>
RowVector<T> RetentionRecurrentStep(const RowVector<T>& x, const RetentionWeights<T>& w,
                                    RetentionState<T>* state, double eps) {
  Require(state != nullptr, "retention: recurrent step needs a state");
  Require(x.size() == w.dim(), "retention: input width does not match weights");
  Require(static_cast<int>(state->gammas.size()) == w.n_heads,
          "retention: state head count does not match weights");
  if (!x.allFinite()) throw NumericError("non-finite values in retention input");
  RowVector<T> q = x * w.w_q, k = x * w.w_k, v = x * w.w_v;
  Matrix<T> heads = RetentionCoreStep(q, k, v, state);
  Matrix<T> xm = x;
  return RetentionOutput(xm, heads, w, eps);
}

template <typename T>
Matrix<T> RetentionChunkwise(const Matrix<T>& x_chunk, const RetentionWeights<T>& w,
                             ChunkState<T>* state, double eps) {
  CheckLayerInput(x_chunk, w);
  Require(state != nullptr, "retention: chunkwise form needs a state");
  Require(static_cast<int>(state->gammas.size()) == w.n_heads,
          "retention: state head count does not match weights");
  Matrix<T> q = x_chunk * w.w_q, k = x_chunk * w.w_k, v = x_chunk * w.w_v;
  Matrix<T> heads = RetentionCoreChunk(q, k, v, state);
  return RetentionOutput(x_chunk, heads, w, eps);
}

template <typename T>
Matrix<T> MsrLayerForward(const Matrix<T>& x, const RetentionWeights<T>& w,
                          const RetentionConfig& cfg, RetentionMode mode,
                          RetentionState<T>* rstate, ChunkState<T>* cstate) {
  switch (mode) {
    case RetentionMode::kParallel:
      return RetentionParallel(x, w, cfg);
    case RetentionMode::kRecurrent: {
      if (rstate == nullptr) throw InvalidArgument("retention: recurrent mode needs a state");
      Matrix<T> out(x.rows(), x.cols());
      for (int t = 0; t < x.rows(); ++t)
        out.row(t) = RetentionRecurrentStep<T>(x.row(t), w, rstate, cfg.group_norm_eps);
      return out;
    }
    case RetentionMode::kChunkwise: {
      if (cstate == nullptr) throw InvalidArgument("retention: chunkwise mode needs a state");
      Matrix<T> out(x.rows(), x.cols());
      for (int start = 0; start < x.rows(); start += cstate->chunk_len) {
        const int len = std::min<int>(cstate->chunk_len, static_cast<int>(x.rows()) - start);
        Matrix<T> chunk = x.middleRows(start, len);
        out.middleRows(start, len) = RetentionChunkwise(chunk, w, cstate, cfg.group_norm_eps);
      }
      return out;
    }
  }
  throw InvalidArgument("retention: unknown mode");
}

#define LSEEND_INSTANTIATE_RETENTION(T)                                                     \
  template struct RetentionWeights<T>;                                                      \
  template struct RetentionState<T>;                                                        \
  template struct ChunkState<T>;                                                            \
  template Matrix<T> RetentionCoreParallel(const Matrix<T>&, const Matrix<T>&,              \
                                           const Matrix<T>&, const RetentionConfig&);       \
  template RowVector<T> RetentionCoreStep(const RowVector<T>&, const RowVector<T>&,         \
                                          const RowVector<T>&, RetentionState<T>*);         \
  template Matrix<T> RetentionCoreChunk(const Matrix<T>&, const Matrix<T>&,                 \
                                        const Matrix<T>&, ChunkState<T>*);                  \
  template Matrix<T> GroupNormHeads(const Matrix<T>&, int, const RowVector<T>&,             \
                                    const RowVector<T>&, double);                           \
  template Matrix<T> RetentionOutput(const Matrix<T>&, const Matrix<T>&,                    \
                                     const RetentionWeights<T>&, double);                   \
  template Matrix<T> RetentionParallel(const Matrix<T>&, const RetentionWeights<T>&,        \
                                       const RetentionConfig&);                             \
  template RowVector<T> RetentionRecurrentStep(const RowVector<T>&,                         \
                                               const RetentionWeights<T>&,                  \
                                               RetentionState<T>*, double);                 \
  template Matrix<T> RetentionChunkwise(const Matrix<T>&, const RetentionWeights<T>&,       \
                                        ChunkState<T>*, double);                            \
  template Matrix<T> MsrLayerForward(const Matrix<T>&, const RetentionWeights<T>&,          \
                                     const RetentionConfig&, RetentionMode,                 \
                                     RetentionState<T>*, ChunkState<T>*);

LSEEND_INSTANTIATE_RETENTION(float)
LSEEND_INSTANTIATE_RETENTION(double)

#undef LSEEND_INSTANTIATE_RETENTION

template <typename T>
RetentionWeights<T> TakeRetention(const TensorMap& m, const std::string& p, int d,
                                  int n_heads) {
  RetentionWeights<T> r;
  r.w_q = TakeMatrix<T>(m, p + ".wq", d, d);
  r.w_k = TakeMatrix<T>(m, p + ".wk", d, d);
  r.w_v = TakeMatrix<T>(m, p + ".wv", d, d);
  r.w_out = TakeMatrix<T>(m, p + ".wo", d, d);
  r.gate_w = TakeMatrix<T>(m, p + ".wg", d, d);
  r.gn_scale = TakeRow<T>(m, p + ".gn_g", d);
  r.gn_shift = TakeRow<T>(m, p + ".gn_b", d);
  r.n_heads = n_heads;
  r.Validate();
  return r;
}

template RetentionWeights<float> TakeRetention(const TensorMap&, const std::string&, int, int);
template RetentionWeights<double> TakeRetention(const TensorMap&, const std::string&, int, int);

}  // namespace lseend
