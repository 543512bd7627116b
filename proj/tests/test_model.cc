// test_model.cc

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

#include <cmath>

#include "doctest.h"
#include "lseend/model.h"
#include "lseend/train_graph.h"
#include "model_fixtures.h"
#include "test_util.h"

namespace lseend {
namespace {

using testing::MaxRelError;
using testing::RandomMatrix;

using testing::NoisyTensors;
using testing::SmallConfig;

TEST_SUITE("model") {

TEST_CASE("presets and config json") {
  for (const ModelConfig& c : {ModelConfig::Paper(), ModelConfig::Desk(), ModelConfig::Micro()}) {
    c.Validate();
    const ModelConfig r = ModelConfigFromJson(ToJson(c));
    CHECK(ToJson(r) == ToJson(c));
  }
  CHECK(ModelConfig::Paper().encoder.lookahead_frames() == 9);
  CHECK(std::abs(LatencySeconds(ModelConfig::Paper()) - 1.07) < 1e-12);
  nlohmann::json bad = ToJson(ModelConfig::Desk());
  bad["decoder"]["d_model"] = 32;
  CHECK_THROWS_AS(ModelConfigFromJson(bad), InvalidArgument);
  bad = ToJson(ModelConfig::Desk());
  bad["encoder"].erase("n_heads");
  CHECK_THROWS_AS(ModelConfigFromJson(bad), InvalidArgument);
}

TEST_CASE("init is deterministic and complete") {
  const ModelConfig c = ModelConfig::Micro();
  const TensorMap a = InitModelTensors(c, 7), b = InitModelTensors(c, 7);
  REQUIRE(a.size() == b.size());
  for (const auto& kv : a) CHECK((kv.second - b.at(kv.first)).norm() == 0.0);
  ValidateTensors(c, a);
  TensorMap extra = a;
  extra["bogus"] = MatrixD::Zero(1, 1);
  CHECK_THROWS_AS(ValidateTensors(c, extra), InvalidArgument);
  TensorMap wrong = a;
  wrong["enc.in.w"] = MatrixD::Zero(3, 3);
  CHECK_THROWS_AS(Model<double>::FromTensors(c, wrong), InvalidArgument);
}

TEST_CASE("encoder identity stress") {
  ModelConfig c = SmallConfig();
  TensorMap m = NoisyTensors(c, 3);
  // Silence every sub-layer's output map; the residual path remains.
  for (auto& kv : m) {
    const std::string& n = kv.first;
    if (n.find(".ret.wo") != std::string::npos || n.find(".conv_pw2.") != std::string::npos ||
        n.find(".ff2.") != std::string::npos)
      kv.second.setZero();
  }
  const auto w = EncoderWeights<double>::FromTensors(m, c.encoder);
  std::mt19937_64 rng(4);
  const MatrixD x = RandomMatrix(12, c.encoder.d_model, &rng);
  for (const auto& blk : w.blocks)
    CHECK((ConformerBlockForward(x, blk, c.encoder, c.encoder_retention()) - x).norm() == 0.0);
}

TEST_CASE("look-ahead delta kernel is the identity") {
  std::mt19937_64 rng(5);
  const int d = 6;
  MatrixD w = MatrixD::Zero(19 * d, d);
  w.middleRows(9 * d, d).setIdentity();
  const MatrixD h = RandomMatrix(30, d, &rng);
  CHECK((LookaheadConv<double>(h, w, RowVectorD::Zero(d), 19, 9) - h).norm() == 0.0);
}

TEST_CASE("embeddings and attractors have unit norm") {
  const ModelConfig c = SmallConfig();
  const auto model = Model<double>::FromTensors(c, NoisyTensors(c, 6));
  std::mt19937_64 rng(7);
  const auto out = model.Forward(RandomMatrix(40, c.encoder.in_dim, &rng));
  for (int t = 0; t < 40; ++t) CHECK(std::abs(out.embeddings.row(t).norm() - 1.0) < 1e-6);
  for (int r = 0; r < out.attractors.a.rows(); ++r)
    CHECK(std::abs(out.attractors.a.row(r).norm() - 1.0) < 1e-6);
  CHECK(out.probs.rows() == 40);
  CHECK(out.probs.cols() == c.n_slots());
  CHECK(out.probs.maxCoeff() <= Sigmoid(1.0) + 1e-12);
  CHECK(out.probs.minCoeff() >= Sigmoid(-1.0) - 1e-12);
}

TEST_CASE("encoder causality beyond the look-ahead") {
  const ModelConfig c = SmallConfig();
  const auto w = EncoderWeights<double>::FromTensors(NoisyTensors(c, 8), c.encoder);
  std::mt19937_64 rng(9);
  MatrixD x = RandomMatrix(50, c.encoder.in_dim, &rng);
  const MatrixD e = Encode(x, w, c.encoder, c.encoder_retention());
  x.row(30) += RandomMatrix(1, c.encoder.in_dim, &rng);
  const MatrixD e2 = Encode(x, w, c.encoder, c.encoder_retention());
  CHECK((e.topRows(21) - e2.topRows(21)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((e.row(21) - e2.row(21)).norm() > 1e-9);
}

TEST_CASE("encoder stream matches offline with a nine frame delay") {
  const ModelConfig c = SmallConfig();
  const TensorMap m = NoisyTensors(c, 10);
  const auto w = EncoderWeights<float>::FromTensors(m, c.encoder);
  std::mt19937_64 rng(11);
  const MatrixF raw = RandomMatrix(60, c.encoder.in_dim, &rng).cast<float>();
  const MatrixF offline = Encode(CumulativeMeanNormalize(raw), w, c.encoder, c.encoder_retention());
  EncoderStream<float> s(&w, c.encoder, c.encoder_retention());
  std::vector<RowVector<float>> got;
  for (int t = 0; t < 60; ++t) {
    auto e = s.Push(raw.row(t));
    CHECK(e.has_value() == (t >= 9));
    if (e) got.push_back(*e);
  }
  for (auto& e : s.Flush()) got.push_back(e);
  REQUIRE(got.size() == 60);
  double worst = 0;
  for (int t = 0; t < 60; ++t) worst = std::max(worst, double((got[t] - offline.row(t)).cwiseAbs().maxCoeff()));
  CHECK(worst < 1e-5);
}

TEST_CASE("decoder stream matches offline") {
  const ModelConfig c = SmallConfig();
  const TensorMap m = NoisyTensors(c, 12);
  const auto w = DecoderWeights<double>::FromTensors(m, c.decoder);
  std::mt19937_64 rng(13);
  const MatrixD e = L2NormalizeRows(MatrixD(RandomMatrix(30, c.decoder.d_model, &rng)));
  const AttractorTensor<double> a = Decode(e, w, c.decoder, c.decoder_retention());
  DecoderStream<double> s(&w, c.decoder, c.decoder_retention());
  for (int t = 0; t < 30; ++t) {
    const MatrixD at = s.Step(e.row(t));
    CHECK(MaxRelError(at, MatrixD(a.a.middleRows(t * c.n_slots(), c.n_slots()))) < 1e-9);
  }
}

TEST_CASE("speaker index encoding") {
  const MatrixD pe = SpeakerIndexPe(4, 6);
  CHECK(pe(0, 0) == 0.0);
  CHECK(pe(0, 1) == 1.0);
  CHECK(std::abs(pe(2, 0) - std::sin(2.0)) < 1e-15);
  CHECK(std::abs(pe(3, 3) - std::cos(3.0 / std::pow(10000.0, 2.0 / 6))) < 1e-15);
  CHECK_THROWS_AS(SpeakerIndexPe(4, 5), InvalidArgument);
}

TEST_CASE("attention rows sum to one") {
  const ModelConfig c = SmallConfig();
  const auto w = DecoderWeights<double>::FromTensors(NoisyTensors(c, 14), c.decoder);
  std::mt19937_64 rng(15);
  const MatrixD h = RandomMatrix(5 * c.n_slots(), c.decoder.d_model, &rng);
  MatrixD weights;
  CrossAttractorAttention(h, c.n_slots(), c.decoder.n_heads, w.blocks[0], &weights);
  for (int r = 0; r < weights.rows(); ++r) CHECK(std::abs(weights.row(r).sum() - 1.0) < 1e-12);
}

}  // TEST_SUITE

TEST_SUITE("graph") {

TEST_CASE("graph forward equals the inference forward") {
  const ModelConfig c = SmallConfig();
  const TensorMap m = NoisyTensors(c, 20);
  const auto model = Model<double>::FromTensors(c, m);
  std::mt19937_64 rng(21);
  const MatrixD raw = RandomMatrix(33, c.encoder.in_dim, &rng);
  const auto ref = model.Forward(raw);
  for (bool chunk : {false, true}) {
    ad::Graph g;
    const ParamVars p = AddParameters(g, m);
    GraphOptions o;
    o.chunkwise = chunk;
    o.chunk_len = 7;
    const GraphForward f = BuildForward(g, p, CumulativeMeanNormalize(raw), c, o);
    CHECK(MaxRelError(g.value(f.embeddings), ref.embeddings) < 1e-9);
    CHECK(MaxRelError(g.value(f.attractors), ref.attractors.a) < 1e-9);
    CHECK(MaxRelError(g.value(f.probs), ref.probs) < 1e-9);
  }
}

TEST_CASE("chunked gradients equal monolithic gradients") {
  const ModelConfig c = SmallConfig();
  const TensorMap m = NoisyTensors(c, 22);
  std::mt19937_64 rng(23);
  const MatrixD x = CumulativeMeanNormalize(MatrixD(RandomMatrix(40, c.encoder.in_dim, &rng)));
  RawLabels raw;
  raw.y = MatrixD::Zero(40, 2);
  raw.y.block(5, 0, 20, 1).setOnes();
  raw.y.block(15, 1, 20, 1).setOnes();
  const AugmentedLabels y = AppearanceOrderPermute(raw, c.decoder.max_speakers);
  auto run = [&](GraphOptions o, std::map<std::string, MatrixD>* grads) {
    ad::Graph g;
    const ParamVars p = AddParameters(g, m);
    const GraphForward f = BuildForward(g, p, x, c, o);
    const ad::Var loss = LossNode(g, f.probs, f.embeddings, y, LossMode::kBce, nullptr);
    g.Backward(loss);
    for (const auto& kv : p) (*grads)[kv.first] = g.grad(kv.second);
    return g.scalar(loss);
  };
  std::map<std::string, MatrixD> g_full, g_chunk, g_trunc;
  GraphOptions full, chunk, trunc;
  chunk.chunkwise = trunc.chunkwise = true;
  chunk.chunk_len = trunc.chunk_len = 10;
  trunc.detach_window = 1;
  const double l_full = run(full, &g_full);
  const double l_chunk = run(chunk, &g_chunk);
  const double l_trunc = run(trunc, &g_trunc);
  CHECK(std::abs(l_chunk - l_full) <= 1e-9 * std::abs(l_full));
  CHECK(std::abs(l_trunc - l_full) <= 1e-9 * std::abs(l_full));
  double worst = 0, trunc_diff = 0;
  for (const auto& kv : g_full) {
    // Key biases of the slot attention have an exactly zero gradient.
    worst = std::max(worst, MaxRelError(g_chunk[kv.first], kv.second, 1e-8));
    trunc_diff = std::max(trunc_diff, MaxRelError(g_trunc[kv.first], kv.second, 1e-8));
  }
  CHECK(worst < 1e-9);
  // Detaching after every chunk cuts credit paths, so gradients move.
  CHECK(trunc_diff > 1e-6);
}

TEST_CASE("full micro model gradient check") {
  const ModelConfig c = ModelConfig::Micro();
  TensorMap m = NoisyTensors(c, 30, 0.1);
  std::mt19937_64 rng(31);
  const MatrixD x = CumulativeMeanNormalize(MatrixD(RandomMatrix(6, c.encoder.in_dim, &rng)));
  RawLabels raw;
  raw.y = MatrixD::Zero(6, 2);
  raw.y(1, 0) = raw.y(2, 0) = raw.y(3, 0) = 1;
  raw.y(3, 1) = raw.y(4, 1) = 1;
  const AugmentedLabels y = AppearanceOrderPermute(raw, c.decoder.max_speakers);
  auto loss_of = [&](const TensorMap& params, std::map<std::string, MatrixD>* grads) {
    ad::Graph g;
    const ParamVars p = AddParameters(g, params);
    const GraphForward f = BuildForward(g, p, x, c);
    const ad::Var loss = LossNode(g, f.probs, f.embeddings, y, LossMode::kBce, nullptr);
    if (grads) {
      g.Backward(loss);
      for (const auto& kv : p) (*grads)[kv.first] = g.grad(kv.second);
    }
    return g.scalar(loss);
  };
  std::map<std::string, MatrixD> analytic;
  loss_of(m, &analytic);
  const double h = 1e-5;
  double worst = 0;
  std::string worst_name;
  for (auto& kv : m) {
    MatrixD fd(kv.second.rows(), kv.second.cols());
    for (int i = 0; i < kv.second.size(); ++i) {
      const double keep = kv.second.data()[i];
      kv.second.data()[i] = keep + h;
      const double lp = loss_of(m, nullptr);
      kv.second.data()[i] = keep - h;
      const double lm = loss_of(m, nullptr);
      kv.second.data()[i] = keep;
      fd.data()[i] = (lp - lm) / (2 * h);
    }
    const MatrixD& a = analytic[kv.first];
    const double scale = std::max({a.norm(), fd.norm(), 1e-6});
    const double err = (a - fd).norm() / scale;
    if (err > worst) {
      worst = err;
      worst_name = kv.first;
    }
  }
  INFO("worst tensor: " << worst_name);
  CHECK(worst < 1e-3);
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
