// decoder.cc

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

#include "lseend/decoder.h"

#include <cmath>

namespace lseend {

void DecoderConfig::Validate() const {
  Require(n_blocks >= 0, "decoder: n_blocks must be non-negative");
  Require(d_model >= 2 && d_model % 2 == 0, "decoder: d_model must be even");
  Require(n_heads >= 1 && d_model % n_heads == 0,
          "decoder: d_model must be divisible by n_heads");
  Require(ff_dim >= 1, "decoder: ff_dim must be positive");
  Require(max_speakers >= 1, "decoder: max_speakers must be positive");
}

namespace {

std::string BlockPrefix(int i) { return "dec.blk" + std::to_string(i); }

}  // namespace

void DecoderParameterShapes(const DecoderConfig& cfg,
                            std::map<std::string, std::pair<int, int>>* shapes) {
  auto& s = *shapes;
  const int d = cfg.d_model;
  s["dec.in.w"] = {2 * d, d};
  s["dec.in.b"] = {1, d};
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string p = BlockPrefix(i);
    for (const char* m : {".ret.wq", ".ret.wk", ".ret.wv", ".ret.wo", ".ret.wg"})
      s[p + m] = {d, d};
    s[p + ".ret.gn_g"] = {1, d};
    s[p + ".ret.gn_b"] = {1, d};
    for (const char* lin : {".att_q", ".att_k", ".att_v", ".att_o"}) {
      s[p + lin + ".w"] = {d, d};
      s[p + lin + ".b"] = {1, d};
    }
    for (const char* ln : {".ret_ln", ".att_ln", ".ff_ln"}) {
      s[p + ln + ".g"] = {1, d};
      s[p + ln + ".b"] = {1, d};
    }
    s[p + ".ff1.w"] = {d, cfg.ff_dim};
    s[p + ".ff1.b"] = {1, cfg.ff_dim};
    s[p + ".ff2.w"] = {cfg.ff_dim, d};
    s[p + ".ff2.b"] = {1, d};
  }
}

MatrixD SpeakerIndexPe(int n_slots, int dim) {
  Require(dim >= 2 && dim % 2 == 0, "speaker-index PE: dimension must be even");
  Require(n_slots >= 1, "speaker-index PE: need at least one slot");
  MatrixD pe(n_slots, dim);
  for (int s = 0; s < n_slots; ++s) {
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = s / std::pow(10000.0, 2.0 * i / dim);
      pe(s, 2 * i) = std::sin(angle);
      pe(s, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

template <typename T>
DecoderWeights<T> DecoderWeights<T>::FromTensors(const TensorMap& m, const DecoderConfig& cfg) {
  cfg.Validate();
  const int d = cfg.d_model;
  DecoderWeights<T> w;
  w.input = TakeLinear<T>(m, "dec.in", 2 * d, d);
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string p = BlockPrefix(i);
    DecoderBlockWeights<T> b;
    b.ret = TakeRetention<T>(m, p + ".ret", d, cfg.n_heads);
    b.ret_ln = TakeLayerNorm<T>(m, p + ".ret_ln", d);
    b.att_q = TakeLinear<T>(m, p + ".att_q", d, d);
    b.att_k = TakeLinear<T>(m, p + ".att_k", d, d);
    b.att_v = TakeLinear<T>(m, p + ".att_v", d, d);
    b.att_o = TakeLinear<T>(m, p + ".att_o", d, d);
    b.att_ln = TakeLayerNorm<T>(m, p + ".att_ln", d);
    b.ff1 = TakeLinear<T>(m, p + ".ff1", d, cfg.ff_dim);
    b.ff2 = TakeLinear<T>(m, p + ".ff2", cfg.ff_dim, d);
    b.ff_ln = TakeLayerNorm<T>(m, p + ".ff_ln", d);
    w.blocks.push_back(std::move(b));
  }
  w.pe = SpeakerIndexPe(cfg.n_slots(), d).cast<T>();
  return w;
}

template <typename T>
Matrix<T> BuildDecoderInput(const Matrix<T>& e, const DecoderWeights<T>& w, int n_slots) {
  const int n = static_cast<int>(e.rows());
  const int d = static_cast<int>(e.cols());
  Require(w.pe.rows() == n_slots && w.pe.cols() == d, "decoder input: PE shape mismatch");
  Require(w.input.in_dim() == 2 * d, "decoder input: input map shape mismatch");
  // [e ; pe] * W = e * W_top + pe * W_bottom
  const Matrix<T> from_e = e * w.input.w.topRows(d);
  Matrix<T> from_pe = w.pe * w.input.w.bottomRows(d);
  from_pe.rowwise() += w.input.b;
  Matrix<T> out(static_cast<Eigen::Index>(n) * n_slots, d);
  for (int t = 0; t < n; ++t)
    for (int s = 0; s < n_slots; ++s)
      out.row(static_cast<Eigen::Index>(t) * n_slots + s) = from_e.row(t) + from_pe.row(s);
  return out;
}

template <typename T>
Matrix<T> TemporalRetention(const Matrix<T>& h, int n_slots, const RetentionWeights<T>& w,
                            const RetentionConfig& rcfg) {
  Require(n_slots >= 1 && h.rows() % n_slots == 0, "temporal retention: bad slot layout");
  const int n = static_cast<int>(h.rows()) / n_slots;
  Matrix<T> out(h.rows(), h.cols());
  Matrix<T> seq(n, h.cols());
  for (int s = 0; s < n_slots; ++s) {
    for (int t = 0; t < n; ++t) seq.row(t) = h.row(static_cast<Eigen::Index>(t) * n_slots + s);
    const Matrix<T> r = RetentionParallel(seq, w, rcfg);
    for (int t = 0; t < n; ++t) out.row(static_cast<Eigen::Index>(t) * n_slots + s) = r.row(t);
  }
  return out;
}

template <typename T>
Matrix<T> CrossAttractorAttention(const Matrix<T>& h, int n_slots, int n_heads,
                                  const DecoderBlockWeights<T>& w, Matrix<T>* weights_out) {
  Require(n_slots >= 1 && h.rows() % n_slots == 0, "cross-attractor attention: bad layout");
  Require(h.cols() % n_heads == 0, "cross-attractor attention: bad head count");
  const int n = static_cast<int>(h.rows()) / n_slots;
  const int dh = static_cast<int>(h.cols()) / n_heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  const Matrix<T> q = w.att_q.Apply(h), k = w.att_k.Apply(h), v = w.att_v.Apply(h);
  Matrix<T> ctx(h.rows(), h.cols());
  if (weights_out) weights_out->resize(static_cast<Eigen::Index>(n) * n_heads * n_slots, n_slots);
  for (int t = 0; t < n; ++t) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(t) * n_slots;
    for (int hd = 0; hd < n_heads; ++hd) {
      Matrix<T> scores = q.block(r0, hd * dh, n_slots, dh) *
                         k.block(r0, hd * dh, n_slots, dh).transpose() * scale;
      for (int i = 0; i < n_slots; ++i) {
        const T mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp().matrix();
        scores.row(i) /= scores.row(i).sum();
      }
      ctx.block(r0, hd * dh, n_slots, dh).noalias() = scores * v.block(r0, hd * dh, n_slots, dh);
      if (weights_out)
        weights_out->middleRows((static_cast<Eigen::Index>(t) * n_heads + hd) * n_slots,
                                n_slots) = scores;
    }
  }
  return w.att_o.Apply(ctx);
}

namespace {

template <typename T>
Matrix<T> FeedForward(const Matrix<T>& u, const Linear<T>& ff1, const Linear<T>& ff2) {
  Matrix<T> hidden = SwishOf(ff1.Apply(u));
  return ff2.Apply(hidden);
}

}  // namespace

template <typename T>
AttractorTensor<T> Decode(const Matrix<T>& e, const DecoderWeights<T>& w,
                          const DecoderConfig& cfg, const RetentionConfig& rcfg) {
  cfg.Validate();
  Require(e.cols() == cfg.d_model, "decoder: embedding width mismatch");
  const int g = cfg.n_slots();
  Matrix<T> h = BuildDecoderInput(e, w, g);
  for (const auto& blk : w.blocks) {
    h = blk.ret_ln.Apply(h + TemporalRetention(h, g, blk.ret, rcfg));
    h = blk.att_ln.Apply(h + CrossAttractorAttention(h, g, cfg.n_heads, blk));
    h = blk.ff_ln.Apply(h + FeedForward(h, blk.ff1, blk.ff2));
  }
  AttractorTensor<T> out;
  out.a = L2NormalizeRows(h);
  out.n_slots = g;
  return out;
}

template <typename T>
RowVector<T> ActivityProbs(const Matrix<T>& attractors, const RowVector<T>& e) {
  Require(attractors.cols() == e.size(), "activity: width mismatch");
  RowVector<T> logits = (attractors * e.transpose()).transpose();
  return logits.unaryExpr([](T v) { return Sigmoid(v); });
}

template <typename T>
Matrix<T> ActivityProbsSequence(const AttractorTensor<T>& a, const Matrix<T>& e) {
  const int n = a.frames();
  Require(e.rows() == n, "activity: frame count mismatch");
  Matrix<T> p(n, a.n_slots);
  for (int t = 0; t < n; ++t)
    p.row(t) = ActivityProbs<T>(a.a.middleRows(static_cast<Eigen::Index>(t) * a.n_slots,
                                               a.n_slots),
                                e.row(t));
  return p;
}

template <typename T>
DecoderStream<T>::DecoderStream(const DecoderWeights<T>* weights, const DecoderConfig& cfg,
                                const RetentionConfig& rcfg)
    : w_(weights), cfg_(cfg), rcfg_(rcfg) {
  Require(weights != nullptr, "decoder stream: missing weights");
  cfg_.Validate();
  const int dh = cfg_.d_model / cfg_.n_heads;
  states_.assign(cfg_.n_blocks,
                 std::vector<RetentionState<T>>(cfg_.n_slots(), RetentionState<T>(rcfg_, dh)));
}

template <typename T>
void DecoderStream<T>::Reset() {
  for (auto& blk : states_)
    for (auto& s : blk) s.Reset();
  steps_ = 0;
}

template <typename T>
Matrix<T> DecoderStream<T>::Step(const RowVector<T>& e) {
  const int g = cfg_.n_slots();
  Matrix<T> em = e;
  Matrix<T> h = BuildDecoderInput(em, *w_, g);
  Matrix<T> r(g, cfg_.d_model);
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const auto& blk = w_->blocks[b];
    for (int s = 0; s < g; ++s)
      r.row(s) = RetentionRecurrentStep<T>(h.row(s), blk.ret, &states_[b][s],
                                           rcfg_.group_norm_eps);
    h = blk.ret_ln.Apply(h + r);
    h = blk.att_ln.Apply(h + CrossAttractorAttention(h, g, cfg_.n_heads, blk));
    h = blk.ff_ln.Apply(h + FeedForward(h, blk.ff1, blk.ff2));
  }
  ++steps_;
  return L2NormalizeRows(h);
}

#define LSEEND_INSTANTIATE_DECODER(T)                                                      \
  template struct DecoderWeights<T>;                                                       \
  template class DecoderStream<T>;                                                         \
  template Matrix<T> BuildDecoderInput(const Matrix<T>&, const DecoderWeights<T>&, int);   \
  template Matrix<T> TemporalRetention(const Matrix<T>&, int, const RetentionWeights<T>&,  \
                                       const RetentionConfig&);                            \
  template Matrix<T> CrossAttractorAttention(const Matrix<T>&, int, int,                   \
                                             const DecoderBlockWeights<T>&, Matrix<T>*);   \
  template AttractorTensor<T> Decode(const Matrix<T>&, const DecoderWeights<T>&,           \
                                     const DecoderConfig&, const RetentionConfig&);        \
  template RowVector<T> ActivityProbs(const Matrix<T>&, const RowVector<T>&);              \
  template Matrix<T> ActivityProbsSequence(const AttractorTensor<T>&, const Matrix<T>&);

LSEEND_INSTANTIATE_DECODER(float)
LSEEND_INSTANTIATE_DECODER(double)

#undef LSEEND_INSTANTIATE_DECODER

}  // namespace lseend
