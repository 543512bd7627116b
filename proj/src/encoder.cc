// encoder.cc

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

#include "lseend/encoder.h"

#include <cmath>

namespace lseend {

void EncoderConfig::Validate() const {
  Require(in_dim >= 1, "encoder: in_dim must be positive");
  Require(n_blocks >= 0, "encoder: n_blocks must be non-negative");
  Require(d_model >= 1 && n_heads >= 1 && d_model % n_heads == 0,
          "encoder: d_model must be divisible by n_heads");
  Require(ff_dim >= 1, "encoder: ff_dim must be positive");
  Require(conv_kernel >= 1, "encoder: conv_kernel must be positive");
  Require(conv_left_pad == conv_kernel - 1,
          "encoder: conv_left_pad must equal conv_kernel - 1 for a causal convolution");
  Require(lookahead_kernel >= 1 && lookahead_pad >= 0 && lookahead_pad < lookahead_kernel,
          "encoder: bad look-ahead kernel/padding");
  Require(lookahead_frames() >= 0, "encoder: look-ahead padding exceeds the kernel");
}

namespace {

std::string BlockPrefix(int i) { return "enc.blk" + std::to_string(i); }

}  // namespace

void EncoderParameterShapes(const EncoderConfig& cfg,
                            std::map<std::string, std::pair<int, int>>* shapes) {
  auto& s = *shapes;
  const int d = cfg.d_model;
  s["enc.in.w"] = {cfg.in_dim, d};
  s["enc.in.b"] = {1, d};
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string p = BlockPrefix(i);
    for (const char* ln : {".ret_ln", ".conv_ln", ".conv_mid_ln", ".ff_ln"}) {
      s[p + ln + ".g"] = {1, d};
      s[p + ln + ".b"] = {1, d};
    }
    for (const char* m : {".ret.wq", ".ret.wk", ".ret.wv", ".ret.wo", ".ret.wg"})
      s[p + m] = {d, d};
    s[p + ".ret.gn_g"] = {1, d};
    s[p + ".ret.gn_b"] = {1, d};
    s[p + ".conv_pw1.w"] = {d, 2 * d};
    s[p + ".conv_pw1.b"] = {1, 2 * d};
    s[p + ".conv_dw.w"] = {cfg.conv_kernel, d};
    s[p + ".conv_dw.b"] = {1, d};
    s[p + ".conv_pw2.w"] = {d, d};
    s[p + ".conv_pw2.b"] = {1, d};
    s[p + ".ff1.w"] = {d, cfg.ff_dim};
    s[p + ".ff1.b"] = {1, cfg.ff_dim};
    s[p + ".ff2.w"] = {cfg.ff_dim, d};
    s[p + ".ff2.b"] = {1, d};
  }
  s["enc.out_ln.g"] = {1, d};
  s["enc.out_ln.b"] = {1, d};
  s["enc.la.w"] = {cfg.lookahead_kernel * d, d};
  s["enc.la.b"] = {1, d};
}

template <typename T>
EncoderWeights<T> EncoderWeights<T>::FromTensors(const TensorMap& m, const EncoderConfig& cfg) {
  cfg.Validate();
  const int d = cfg.d_model;
  EncoderWeights<T> w;
  w.input = TakeLinear<T>(m, "enc.in", cfg.in_dim, d);
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string p = BlockPrefix(i);
    ConformerBlockWeights<T> b;
    b.ret_ln = TakeLayerNorm<T>(m, p + ".ret_ln", d);
    b.ret = TakeRetention<T>(m, p + ".ret", d, cfg.n_heads);
    b.conv_ln = TakeLayerNorm<T>(m, p + ".conv_ln", d);
    b.conv_pw1 = TakeLinear<T>(m, p + ".conv_pw1", d, 2 * d);
    b.conv_dw_w = TakeMatrix<T>(m, p + ".conv_dw.w", cfg.conv_kernel, d);
    b.conv_dw_b = TakeRow<T>(m, p + ".conv_dw.b", d);
    b.conv_mid_ln = TakeLayerNorm<T>(m, p + ".conv_mid_ln", d);
    b.conv_pw2 = TakeLinear<T>(m, p + ".conv_pw2", d, d);
    b.ff_ln = TakeLayerNorm<T>(m, p + ".ff_ln", d);
    b.ff1 = TakeLinear<T>(m, p + ".ff1", d, cfg.ff_dim);
    b.ff2 = TakeLinear<T>(m, p + ".ff2", cfg.ff_dim, d);
    w.blocks.push_back(std::move(b));
  }
  w.out_ln = TakeLayerNorm<T>(m, "enc.out_ln", d);
  w.la_w = TakeMatrix<T>(m, "enc.la.w", cfg.lookahead_kernel * d, d);
  w.la_b = TakeRow<T>(m, "enc.la.b", d);
  return w;
}

namespace {

template <typename T>
Matrix<T> Glu(const Matrix<T>& p, int d) {
  Matrix<T> out = p.leftCols(d);
  out.array() *= p.rightCols(d).unaryExpr([](T v) { return Sigmoid(v); }).array();
  return out;
}

template <typename T>
Matrix<T> FeedForward(const Matrix<T>& u, const Linear<T>& ff1, const Linear<T>& ff2) {
  Matrix<T> hidden = SwishOf(ff1.Apply(u));
  return ff2.Apply(hidden);
}

}  // namespace

template <typename T>
Matrix<T> ConvModuleForward(const Matrix<T>& u, const ConformerBlockWeights<T>& w,
                            const EncoderConfig& cfg) {
  const int d = cfg.d_model;
  const int k = cfg.conv_kernel;
  const int n = static_cast<int>(u.rows());
  Matrix<T> glu = Glu(w.conv_pw1.Apply(u), d);
  Matrix<T> conv(n, d);
  for (int t = 0; t < n; ++t) {
    RowVector<T> acc = w.conv_dw_b;
    for (int j = 0; j < k; ++j) {
      const int src = t - (k - 1) + j;
      if (src >= 0) acc.array() += glu.row(src).array() * w.conv_dw_w.row(j).array();
    }
    conv.row(t) = acc;
  }
  Matrix<T> mid = SwishOf(w.conv_mid_ln.Apply(conv));
  return w.conv_pw2.Apply(mid);
}

template <typename T>
Matrix<T> ConformerBlockForward(const Matrix<T>& x, const ConformerBlockWeights<T>& w,
                                const EncoderConfig& cfg, const RetentionConfig& rcfg) {
  Require(x.cols() == cfg.d_model, "conformer block: input width mismatch");
  Matrix<T> h = x;
  h += RetentionParallel(w.ret_ln.Apply(h), w.ret, rcfg);
  h += ConvModuleForward(w.conv_ln.Apply(h), w, cfg);
  h += FeedForward(w.ff_ln.Apply(h), w.ff1, w.ff2);
  return h;
}

template <typename T>
Matrix<T> LookaheadConv(const Matrix<T>& h, const Matrix<T>& w, const RowVector<T>& b,
                        int kernel, int pad) {
  const int n = static_cast<int>(h.rows());
  const int d = static_cast<int>(h.cols());
  Require(w.rows() == kernel * d && w.cols() == b.size(), "look-ahead: weight shape mismatch");
  Matrix<T> out(n, w.cols());
  out.rowwise() = b;
  for (int j = 0; j < kernel; ++j) {
    const int shift = j - pad;  // output t reads frame t + shift
    const int lo = std::max(0, -shift);
    const int hi = std::min(n, n - shift);
    if (hi <= lo) continue;
    out.middleRows(lo, hi - lo).noalias() +=
        h.middleRows(lo + shift, hi - lo) * w.middleRows(j * d, d);
  }
  return out;
}

template <typename T>
Matrix<T> Encode(const Matrix<T>& feats, const EncoderWeights<T>& w, const EncoderConfig& cfg,
                 const RetentionConfig& rcfg) {
  Require(feats.cols() == cfg.in_dim, "encoder: feature width mismatch");
  RequireFinite(feats, "encoder input");
  Matrix<T> h = w.input.Apply(feats);
  for (const auto& blk : w.blocks) h = ConformerBlockForward(h, blk, cfg, rcfg);
  h = w.out_ln.Apply(h);
  Matrix<T> la = LookaheadConv(h, w.la_w, w.la_b, cfg.lookahead_kernel, cfg.lookahead_pad);
  Matrix<T> e = L2NormalizeRows(la);
  RequireFinite(e, "encoder output");
  return e;
}

template <typename T>
ConformerBlockState<T>::ConformerBlockState(const EncoderConfig& cfg,
                                            const RetentionConfig& rcfg)
    : ret(rcfg, cfg.d_model / cfg.n_heads),
      conv_hist(Matrix<T>::Zero(std::max(cfg.conv_kernel - 1, 0), cfg.d_model)) {}

template <typename T>
void ConformerBlockState<T>::Reset() {
  ret.Reset();
  conv_hist.setZero();
  conv_pos = 0;
}

template <typename T>
RowVector<T> ConformerBlockStep(const RowVector<T>& x, const ConformerBlockWeights<T>& w,
                                const EncoderConfig& cfg, ConformerBlockState<T>* state,
                                double gn_eps) {
  const int d = cfg.d_model;
  const int k = cfg.conv_kernel;
  Matrix<T> h = x;

  Matrix<T> u = w.ret_ln.Apply(h);
  h += RetentionRecurrentStep<T>(u.row(0), w.ret, &state->ret, gn_eps);

  u = w.conv_ln.Apply(h);
  Matrix<T> glu = Glu(w.conv_pw1.Apply(u), d);
  RowVector<T> acc = w.conv_dw_b;
  // conv_hist holds the previous k-1 GLU outputs, oldest at conv_pos.
  for (int j = 0; j < k - 1; ++j) {
    const int slot = (state->conv_pos + j) % (k - 1);
    acc.array() += state->conv_hist.row(slot).array() * w.conv_dw_w.row(j).array();
  }
  acc.array() += glu.row(0).array() * w.conv_dw_w.row(k - 1).array();
  if (k > 1) {
    state->conv_hist.row(state->conv_pos) = glu.row(0);
    state->conv_pos = (state->conv_pos + 1) % (k - 1);
  }
  Matrix<T> conv = acc;
  Matrix<T> mid = SwishOf(w.conv_mid_ln.Apply(conv));
  h += w.conv_pw2.Apply(mid);

  u = w.ff_ln.Apply(h);
  h += FeedForward(u, w.ff1, w.ff2);
  return h.row(0);
}

template <typename T>
EncoderStream<T>::EncoderStream(const EncoderWeights<T>* weights, const EncoderConfig& cfg,
                                const RetentionConfig& rcfg)
    : w_(weights), cfg_(cfg), rcfg_(rcfg), cmn_(cfg.in_dim) {
  Require(weights != nullptr, "encoder stream: missing weights");
  cfg_.Validate();
  for (int i = 0; i < cfg_.n_blocks; ++i) blocks_.emplace_back(cfg_, rcfg_);
  la_window_ = Matrix<T>::Zero(cfg_.lookahead_kernel, cfg_.d_model);
}

template <typename T>
void EncoderStream<T>::Reset() {
  cmn_.Reset();
  for (auto& b : blocks_) b.Reset();
  la_window_.setZero();
  la_pos_ = 0;
  pushed_ = emitted_ = 0;
}

template <typename T>
RowVector<T> EncoderStream<T>::EmitCentered() {
  // After the latest write, the oldest frame sits at la_pos_.
  const int k = cfg_.lookahead_kernel;
  const int d = cfg_.d_model;
  RowVector<T> out = w_->la_b;
  for (int j = 0; j < k; ++j) {
    const int slot = (la_pos_ + j) % k;
    out.noalias() += la_window_.row(slot) * w_->la_w.middleRows(j * d, d);
  }
  const T n = out.norm();
  if (n > T(0)) out /= n;
  ++emitted_;
  return out;
}

template <typename T>
std::optional<RowVector<T>> EncoderStream<T>::Push(const RowVector<T>& raw_frame) {
  Require(raw_frame.size() == cfg_.in_dim, "encoder stream: frame width mismatch");
  if (!raw_frame.allFinite()) throw NumericError("non-finite values in encoder input");
  RowVector<T> x = CmnStep<T>(raw_frame, &cmn_);
  Matrix<T> h = w_->input.Apply(Matrix<T>(x));
  RowVector<T> row = h.row(0);
  for (size_t i = 0; i < blocks_.size(); ++i)
    row = ConformerBlockStep<T>(row, w_->blocks[i], cfg_, &blocks_[i], rcfg_.group_norm_eps);
  Matrix<T> normed = w_->out_ln.Apply(Matrix<T>(row));
  la_window_.row(la_pos_) = normed.row(0);
  la_pos_ = (la_pos_ + 1) % cfg_.lookahead_kernel;
  ++pushed_;
  if (pushed_ - 1 < cfg_.lookahead_frames()) return std::nullopt;
  return EmitCentered();
}

template <typename T>
std::vector<RowVector<T>> EncoderStream<T>::Flush() {
  std::vector<RowVector<T>> out;
  while (emitted_ < pushed_) {
    la_window_.row(la_pos_).setZero();
    la_pos_ = (la_pos_ + 1) % cfg_.lookahead_kernel;
    out.push_back(EmitCentered());
  }
  return out;
}

#define LSEEND_INSTANTIATE_ENCODER(T)                                                     \
  template struct EncoderWeights<T>;                                                      \
  template struct ConformerBlockState<T>;                                                 \
  template class EncoderStream<T>;                                                        \
  template Matrix<T> ConvModuleForward(const Matrix<T>&, const ConformerBlockWeights<T>&, \
                                       const EncoderConfig&);                             \
  template Matrix<T> ConformerBlockForward(const Matrix<T>&,                              \
                                           const ConformerBlockWeights<T>&,               \
                                           const EncoderConfig&, const RetentionConfig&); \
  template Matrix<T> LookaheadConv(const Matrix<T>&, const Matrix<T>&,                    \
                                   const RowVector<T>&, int, int);                        \
  template Matrix<T> Encode(const Matrix<T>&, const EncoderWeights<T>&,                   \
                            const EncoderConfig&, const RetentionConfig&);                \
  template RowVector<T> ConformerBlockStep(const RowVector<T>&,                           \
                                           const ConformerBlockWeights<T>&,               \
                                           const EncoderConfig&, ConformerBlockState<T>*, \
                                           double);

LSEEND_INSTANTIATE_ENCODER(float)
LSEEND_INSTANTIATE_ENCODER(double)

#undef LSEEND_INSTANTIATE_ENCODER

}  // namespace lseend
