// model.cc

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

#include "lseend/model.h"

#include <cmath>
#include <random>

namespace lseend {

RetentionConfig ModelConfig::encoder_retention() const {
  RetentionConfig r;
  r.gammas = multiscale_decay ? MultiscaleGammas(encoder.n_heads) : UnitGammas(encoder.n_heads);
  r.scaling = scaling;
  return r;
}

RetentionConfig ModelConfig::decoder_retention() const {
  RetentionConfig r;
  r.gammas = multiscale_decay ? MultiscaleGammas(decoder.n_heads) : UnitGammas(decoder.n_heads);
  r.scaling = scaling;
  return r;
}

void ModelConfig::Validate() const {
  encoder.Validate();
  decoder.Validate();
  Require(encoder.d_model == decoder.d_model,
          "model: encoder and decoder widths must match");
}

ModelConfig ModelConfig::Paper() {
  ModelConfig c;
  c.decoder.max_speakers = 8;
  return c;
}

ModelConfig ModelConfig::Desk() {
  ModelConfig c;
  c.encoder.n_blocks = 2;
  c.encoder.d_model = 64;
  c.encoder.ff_dim = 256;
  c.decoder.n_blocks = 1;
  c.decoder.d_model = 64;
  c.decoder.ff_dim = 256;
  c.decoder.max_speakers = 3;
  return c;
}

ModelConfig ModelConfig::Micro() {
  ModelConfig c;
  c.encoder.in_dim = 12;
  c.encoder.n_blocks = 1;
  c.encoder.d_model = 8;
  c.encoder.n_heads = 2;
  c.encoder.ff_dim = 16;
  c.decoder.n_blocks = 1;
  c.decoder.d_model = 8;
  c.decoder.n_heads = 2;
  c.decoder.ff_dim = 16;
  c.decoder.max_speakers = 2;
  return c;
}

nlohmann::json ToJson(const ModelConfig& c) {
  const auto& e = c.encoder;
  const auto& d = c.decoder;
  return {
      {"encoder",
       {{"in_dim", e.in_dim}, {"n_blocks", e.n_blocks}, {"d_model", e.d_model},
        {"n_heads", e.n_heads}, {"ff_dim", e.ff_dim}, {"conv_kernel", e.conv_kernel},
        {"conv_left_pad", e.conv_left_pad}, {"lookahead_kernel", e.lookahead_kernel},
        {"lookahead_pad", e.lookahead_pad}}},
      {"decoder",
       {{"n_blocks", d.n_blocks}, {"d_model", d.d_model}, {"n_heads", d.n_heads},
        {"ff_dim", d.ff_dim}, {"max_speakers", d.max_speakers}}},
      {"multiscale_decay", c.multiscale_decay},
      {"scaling", c.scaling == RetentionScaling::kNormalized ? "normalized" : "none"},
  };
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    const auto& e = j.at("encoder");
    c.encoder.in_dim = e.at("in_dim");
    c.encoder.n_blocks = e.at("n_blocks");
    c.encoder.d_model = e.at("d_model");
    c.encoder.n_heads = e.at("n_heads");
    c.encoder.ff_dim = e.at("ff_dim");
    c.encoder.conv_kernel = e.at("conv_kernel");
    c.encoder.conv_left_pad = e.at("conv_left_pad");
    c.encoder.lookahead_kernel = e.at("lookahead_kernel");
    c.encoder.lookahead_pad = e.at("lookahead_pad");
    const auto& d = j.at("decoder");
    c.decoder.n_blocks = d.at("n_blocks");
    c.decoder.d_model = d.at("d_model");
    c.decoder.n_heads = d.at("n_heads");
    c.decoder.ff_dim = d.at("ff_dim");
    c.decoder.max_speakers = d.at("max_speakers");
    c.multiscale_decay = j.value("multiscale_decay", false);
    const std::string scaling = j.value("scaling", std::string("normalized"));
    Require(scaling == "normalized" || scaling == "none", "model: unknown scaling " + scaling);
    c.scaling = scaling == "none" ? RetentionScaling::kNone : RetentionScaling::kNormalized;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("model config: ") + ex.what());
  }
  c.Validate();
  return c;
}

double LatencySeconds(const ModelConfig& cfg) {
  return (1 + cfg.encoder.lookahead_frames()) * kSplicedFramePeriod +
         kSpliceContext * kRawFramePeriod;
}

ShapeMap ModelParameterShapes(const ModelConfig& cfg) {
  ShapeMap s;
  EncoderParameterShapes(cfg.encoder, &s);
  DecoderParameterShapes(cfg.decoder, &s);
  return s;
}

namespace {

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

TensorMap InitModelTensors(const ModelConfig& cfg, uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  TensorMap m;
  // std::map iteration order makes the draw sequence independent of
  // insertion order.
  for (const auto& [name, shape] : ModelParameterShapes(cfg)) {
    const auto [rows, cols] = shape;
    MatrixD t = MatrixD::Zero(rows, cols);
    const bool is_norm_gain = EndsWith(name, ".g") || EndsWith(name, ".gn_g");
    if (is_norm_gain) {
      t.setOnes();
    } else if (EndsWith(name, ".b") || EndsWith(name, ".gn_b")) {
      // zero
    } else if (name.find(".conv_dw.w") != std::string::npos) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(rows), 1.0 / std::sqrt(rows));
      for (int i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    } else if (name == "enc.la.w") {
      const int d = cols;
      const double lim = 0.1 * std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> u(-lim, lim);
      for (int i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
      t.middleRows(cfg.encoder.lookahead_pad * d, d) += MatrixD::Identity(d, d);
    } else {
      const double lim = std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> u(-lim, lim);
      for (int i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    }
    m.emplace(name, std::move(t));
  }
  return m;
}

void ValidateTensors(const ModelConfig& cfg, const TensorMap& m) {
  const ShapeMap shapes = ModelParameterShapes(cfg);
  for (const auto& [name, shape] : shapes) {
    auto it = m.find(name);
    if (it == m.end()) throw InvalidArgument("missing tensor " + name);
    if (it->second.rows() != shape.first || it->second.cols() != shape.second)
      throw InvalidArgument("tensor " + name + " has the wrong shape for this config");
  }
  for (const auto& kv : m)
    if (!shapes.count(kv.first)) throw InvalidArgument("unexpected tensor " + kv.first);
}

template <typename T>
Model<T> Model<T>::FromTensors(const ModelConfig& cfg, const TensorMap& m) {
  cfg.Validate();
  ValidateTensors(cfg, m);
  Model<T> model;
  model.cfg = cfg;
  model.enc = EncoderWeights<T>::FromTensors(m, cfg.encoder);
  model.dec = DecoderWeights<T>::FromTensors(m, cfg.decoder);
  return model;
}

template <typename T>
ModelOutput<T> Model<T>::Forward(const Matrix<T>& raw_feats) const {
  ModelOutput<T> out;
  const Matrix<T> x = CumulativeMeanNormalize(raw_feats);
  out.embeddings = Encode(x, enc, cfg.encoder, cfg.encoder_retention());
  out.attractors = Decode(out.embeddings, dec, cfg.decoder, cfg.decoder_retention());
  out.probs = ActivityProbsSequence(out.attractors, out.embeddings);
  return out;
}

template struct Model<float>;
template struct Model<double>;

}  // namespace lseend
