// train_graph.cc

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

#include "lseend/train_graph.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace lseend {

using ad::Var;

ParamVars AddParameters(ad::Graph& g, const TensorMap& params) {
  ParamVars p;
  for (const auto& [name, value] : params) p.emplace(name, g.Leaf(value));
  return p;
}

namespace {

Var P(const ParamVars& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw InvalidArgument("graph: missing parameter " + name);
  return it->second;
}

Var Affine(ad::Graph& g, Var x, const ParamVars& p, const std::string& prefix) {
  return ad::AddRow(g, ad::MatMul(g, x, P(p, prefix + ".w")), P(p, prefix + ".b"));
}

Var Ln(ad::Graph& g, Var x, const ParamVars& p, const std::string& prefix) {
  return ad::LayerNorm(g, x, P(p, prefix + ".g"), P(p, prefix + ".b"), kLayerNormEps);
}

Var Ffn(ad::Graph& g, Var x, const ParamVars& p, const std::string& prefix) {
  return Affine(g, ad::Swish(g, Affine(g, x, p, prefix + ".ff1")), p, prefix + ".ff2");
}

// Parallel retention of one head over one sequence. A single tape node: the
// T x T score matrix is rebuilt in the backward pass instead of being kept.
MatrixD DecayWeights(int n, double gamma, bool norm, double inv_sqrt) {
  MatrixD w = MatrixD::Zero(n, n);
  double decay_sum = 0.0;
  for (int t = 0; t < n; ++t) {
    decay_sum = decay_sum * gamma + 1.0;
    const double row_scale = norm ? inv_sqrt / decay_sum : 1.0;
    double pw = 1.0;
    for (int tau = t; tau >= 0; --tau) {
      w(t, tau) = pw * row_scale;
      pw *= gamma;
    }
  }
  return w;
}

Var HeadParallel(ad::Graph& g, Var q, Var k, Var v, double gamma, bool norm, double inv_sqrt) {
  const int n = static_cast<int>(g.value(q).rows());
  MatrixD s = (g.value(q) * g.value(k).transpose()).cwiseProduct(DecayWeights(n, gamma, norm, inv_sqrt));
  if (norm) {
    const ColVectorD d = s.rowwise().sum().cwiseAbs().cwiseMax(1.0);
    s = s.array().colwise() / d.array();
  }
  MatrixD out = s * g.value(v);
  return g.Make(std::move(out), {q, k, v}, [=](ad::Graph& g, int self) {
    const MatrixD& qv = g.value(q);
    const MatrixD& kv = g.value(k);
    const MatrixD& vv = g.value(v);
    const MatrixD& go = g.grad_ref(self);
    const MatrixD w = DecayWeights(n, gamma, norm, inv_sqrt);
    MatrixD raw = (qv * kv.transpose()).cwiseProduct(w);
    MatrixD dp = go * vv.transpose();
    if (norm) {
      const ColVectorD r = raw.rowwise().sum();
      const ColVectorD d = r.cwiseAbs().cwiseMax(1.0);
      // dL/dd_i = -sum_j dP_ij raw_ij / d_i^2, reaching r_i only where |r_i| > 1.
      const ColVectorD dd = -(dp.cwiseProduct(raw).rowwise().sum().array() / d.array().square()).matrix();
      raw = raw.array().colwise() / d.array();
      if (g.requires_grad(v)) g.acc(v.id).noalias() += raw.transpose() * go;
      dp = dp.array().colwise() / d.array();
      for (int i = 0; i < n; ++i)
        if (std::abs(r(i)) > 1.0) dp.row(i).array() += dd(i) * (r(i) > 0 ? 1.0 : -1.0);
    } else if (g.requires_grad(v)) {
      g.acc(v.id).noalias() += raw.transpose() * go;
    }
    dp = dp.cwiseProduct(w);
    if (g.requires_grad(q)) g.acc(q.id).noalias() += dp * kv;
    if (g.requires_grad(k)) g.acc(k.id).noalias() += dp.transpose() * qv;
  });
}

struct HeadChunkState {
  Var r, z;            // [dh x dh], [1 x dh]; invalid before the first chunk
  double decay_sum = 0.0;
};

Var HeadChunk(ad::Graph& g, Var q, Var k, Var v, double gamma, bool norm, double inv_sqrt,
              HeadChunkState* st) {
  const int b = static_cast<int>(g.value(q).rows());
  std::vector<double> pw(b + 1);
  pw[0] = 1.0;
  for (int i = 1; i <= b; ++i) pw[i] = pw[i - 1] * gamma;

  MatrixD w = MatrixD::Zero(b, b);
  ColVectorD cross_scale(b);
  double local = 0.0;
  for (int m = 0; m < b; ++m) {
    local = local * gamma + 1.0;
    const double xi = pw[m + 1];
    const double row_scale = norm ? inv_sqrt / (local + xi * st->decay_sum) : 1.0;
    for (int j = 0; j <= m; ++j) w(m, j) = pw[m - j] * row_scale;
    cross_scale(m) = xi * row_scale;
  }
  Var inner = ad::MulConst(g, ad::MatMulBt(g, q, k), w);
  Var out = ad::MatMul(g, inner, v);
  if (st->r.valid()) out = ad::Add(g, out, ad::ScaleRowsConst(g, ad::MatMul(g, q, st->r), cross_scale));
  if (norm) {
    Var rsum = ad::RowSum(g, inner);
    if (st->z.valid())
      rsum = ad::Add(g, rsum, ad::ScaleRowsConst(g, ad::MatMulBt(g, q, st->z), cross_scale));
    out = ad::DivRows(g, out, ad::Max1Abs(g, rsum));
  }

  ColVectorD zeta(b);
  double zeta_sum = 0.0;
  for (int m = 0; m < b; ++m) {
    zeta(m) = pw[b - 1 - m];
    zeta_sum += zeta(m);
  }
  Var kz = ad::ScaleRowsConst(g, k, zeta);
  Var r_new = ad::MatMulAt(g, kz, v);
  Var z_new = ad::MatMulAt(g, g.Constant(MatrixD(zeta)), k);
  if (st->r.valid()) {
    r_new = ad::Add(g, r_new, ad::Scale(g, st->r, pw[b]));
    z_new = ad::Add(g, z_new, ad::Scale(g, st->z, pw[b]));
  }
  st->r = r_new;
  st->z = z_new;
  st->decay_sum = pw[b] * st->decay_sum + zeta_sum;
  return out;
}

}  // namespace

Var RetentionGraph(ad::Graph& g, Var x, int n_seq, const ParamVars& p, const std::string& prefix,
                   const RetentionConfig& rcfg, const GraphOptions& opts) {
  rcfg.Validate();
  const int rows = static_cast<int>(g.value(x).rows());
  const int d = static_cast<int>(g.value(x).cols());
  const int heads = rcfg.n_heads();
  Require(n_seq >= 1 && rows % n_seq == 0, "graph: bad sequence stacking");
  Require(d % heads == 0, "graph: width not divisible by heads");
  const int n = rows / n_seq;
  const int dh = d / heads;
  const bool norm = rcfg.scaling == RetentionScaling::kNormalized;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = ad::MatMul(g, x, P(p, prefix + ".wq"));
  Var k = ad::MatMul(g, x, P(p, prefix + ".wk"));
  Var v = ad::MatMul(g, x, P(p, prefix + ".wv"));
  std::vector<Var> seq_out;
  for (int s = 0; s < n_seq; ++s) {
    std::vector<Var> head_out;
    for (int h = 0; h < heads; ++h) {
      auto slice = [&](Var m, int start, int len) {
        return ad::ColSlice(g, ad::RowSlice(g, m, s * n + start, len), h * dh, dh);
      };
      const double gamma = rcfg.gammas[h];
      if (!opts.chunkwise) {
        head_out.push_back(HeadParallel(g, slice(q, 0, n), slice(k, 0, n), slice(v, 0, n),
                                        gamma, norm, inv_sqrt));
        continue;
      }
      Require(opts.chunk_len >= 1, "graph: chunk length must be positive");
      HeadChunkState st;
      std::vector<Var> chunks;
      int index = 0;
      for (int start = 0; start < n; start += opts.chunk_len, ++index) {
        const int len = std::min(opts.chunk_len, n - start);
        if (index > 0 && opts.detach_window > 0 && index % opts.detach_window == 0) {
          st.r = ad::Detach(g, st.r);
          st.z = ad::Detach(g, st.z);
        }
        chunks.push_back(HeadChunk(g, slice(q, start, len), slice(k, start, len),
                                   slice(v, start, len), gamma, norm, inv_sqrt, &st));
      }
      head_out.push_back(chunks.size() == 1 ? chunks[0] : ad::ConcatRows(g, chunks));
    }
    seq_out.push_back(heads == 1 ? head_out[0] : ad::ConcatCols(g, head_out));
  }
  Var cat = n_seq == 1 ? seq_out[0] : ad::ConcatRows(g, seq_out);
  Var normed = ad::GroupNormRows(g, cat, heads, P(p, prefix + ".gn_g"), P(p, prefix + ".gn_b"),
                                 rcfg.group_norm_eps);
  Var gate = ad::Swish(g, ad::MatMul(g, x, P(p, prefix + ".wg")));
  return ad::MatMul(g, ad::Mul(g, normed, gate), P(p, prefix + ".wo"));
}

GraphForward BuildForward(ad::Graph& g, const ParamVars& p, const MatrixD& feats,
                          const ModelConfig& cfg, const GraphOptions& opts) {
  cfg.Validate();
  const auto& ec = cfg.encoder;
  const auto& dc = cfg.decoder;
  Require(feats.cols() == ec.in_dim, "graph: feature width mismatch");
  Require(feats.rows() >= 1, "graph: empty input");
  const int n = static_cast<int>(feats.rows());
  const int d = ec.d_model;
  const RetentionConfig erc = cfg.encoder_retention();
  const RetentionConfig drc = cfg.decoder_retention();

  Var h = Affine(g, g.Constant(feats), p, "enc.in");
  for (int i = 0; i < ec.n_blocks; ++i) {
    const std::string b = "enc.blk" + std::to_string(i);
    h = ad::Add(g, h, RetentionGraph(g, Ln(g, h, p, b + ".ret_ln"), 1, p, b + ".ret", erc, opts));
    Var glu = ad::Glu(g, Affine(g, Ln(g, h, p, b + ".conv_ln"), p, b + ".conv_pw1"));
    Var conv = ad::CausalDepthwiseConv(g, glu, P(p, b + ".conv_dw.w"), P(p, b + ".conv_dw.b"));
    Var mid = ad::Swish(g, Ln(g, conv, p, b + ".conv_mid_ln"));
    h = ad::Add(g, h, Affine(g, mid, p, b + ".conv_pw2"));
    h = ad::Add(g, h, Ffn(g, Ln(g, h, p, b + ".ff_ln"), p, b));
  }
  h = Ln(g, h, p, "enc.out_ln");
  Var la = ad::AddRow(g, ad::MatMul(g, ad::Im2Col(g, h, ec.lookahead_kernel, ec.lookahead_pad),
                                    P(p, "enc.la.w")),
                      P(p, "enc.la.b"));
  GraphForward out;
  out.embeddings = ad::L2NormalizeRows(g, la);

  const int slots = dc.n_slots();
  Var w_in = P(p, "dec.in.w");
  Var from_e = ad::MatMul(g, out.embeddings, ad::RowSlice(g, w_in, 0, d));
  Var pe = g.Constant(SpeakerIndexPe(slots, d));
  Var from_pe = ad::AddRow(g, ad::MatMul(g, pe, ad::RowSlice(g, w_in, d, d)), P(p, "dec.in.b"));
  Var a = ad::Add(g, ad::RepeatRows(g, from_e, slots), ad::TileRows(g, from_pe, n));

  // Slot-major order puts each slot's time series in one contiguous block.
  std::vector<int> to_slot_major(static_cast<size_t>(n) * slots), to_frame_major(to_slot_major.size());
  for (int s = 0; s < slots; ++s)
    for (int t = 0; t < n; ++t) {
      to_slot_major[static_cast<size_t>(s) * n + t] = t * slots + s;
      to_frame_major[static_cast<size_t>(t) * slots + s] = s * n + t;
    }
  for (int i = 0; i < dc.n_blocks; ++i) {
    const std::string b = "dec.blk" + std::to_string(i);
    Var sm = ad::GatherRows(g, a, to_slot_major);
    Var r = ad::GatherRows(g, RetentionGraph(g, sm, slots, p, b + ".ret", drc, opts), to_frame_major);
    a = Ln(g, ad::Add(g, a, r), p, b + ".ret_ln");
    Var att = ad::GroupedSoftmaxAttention(g, Affine(g, a, p, b + ".att_q"), Affine(g, a, p, b + ".att_k"),
                                          Affine(g, a, p, b + ".att_v"), slots, dc.n_heads);
    a = Ln(g, ad::Add(g, a, Affine(g, att, p, b + ".att_o")), p, b + ".att_ln");
    a = Ln(g, ad::Add(g, a, Ffn(g, a, p, b)), p, b + ".ff_ln");
  }
  out.attractors = ad::L2NormalizeRows(g, a);
  out.probs = ad::Sigmoid(g, ad::SlotDot(g, out.attractors, out.embeddings, slots));
  return out;
}

Var LossNode(ad::Graph& g, Var probs, Var embeddings, const AugmentedLabels& y, LossMode mode,
             LossReport* report, const PairLossOptions& opts) {
  auto gp = std::make_shared<MatrixD>();
  auto ge = std::make_shared<MatrixD>();
  LossReport r = TotalLoss(g.value(probs), g.value(embeddings), y, mode, gp.get(), ge.get(), opts);
  if (!std::isfinite(r.total)) throw NumericError("non-finite training loss");
  if (report) *report = r;
  MatrixD value(1, 1);
  value(0, 0) = r.total;
  return g.Make(std::move(value), {probs, embeddings},
                [probs, embeddings, gp, ge](ad::Graph& g, int self) {
    const double s = g.grad_ref(self)(0, 0);
    if (g.requires_grad(probs)) g.acc(probs.id) += s * *gp;
    if (g.requires_grad(embeddings)) g.acc(embeddings.id) += s * *ge;
  });
}

}  // namespace lseend
