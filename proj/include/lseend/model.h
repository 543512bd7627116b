// lseend/model.h

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

#ifndef LSEEND_MODEL_H_
#define LSEEND_MODEL_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "json.hpp"
#include "lseend/decoder.h"
#include "lseend/encoder.h"

namespace lseend {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  // Per-head decays 1 - 2^(-5-k) instead of gamma = 1 (ablation only).
  bool multiscale_decay = false;
  RetentionScaling scaling = RetentionScaling::kNormalized;

  int n_slots() const { return decoder.n_slots(); }
  RetentionConfig encoder_retention() const;
  RetentionConfig decoder_retention() const;
  void Validate() const;

  /// N=4, M=2, D=256, 4 heads, FFN 1024/2048, S=8.
  static ModelConfig Paper();
  /// D=64, N=2, M=1, 4 heads, FFN 256, S=3.
  static ModelConfig Desk();
  /// D=8, 2 heads, tiny FFNs, 12-dim input, S=2; used for gradient checks.
  static ModelConfig Micro();
};

nlohmann::json ToJson(const ModelConfig& cfg);
ModelConfig ModelConfigFromJson(const nlohmann::json& j);

/// Seconds between a sample entering the front end and its decision:
/// (1 + look-ahead frames) spliced periods plus the right splice context.
double LatencySeconds(const ModelConfig& cfg);

using ShapeMap = std::map<std::string, std::pair<int, int>>;
ShapeMap ModelParameterShapes(const ModelConfig& cfg);

/// Xavier-uniform matrices, zero biases, unit norms; the look-ahead kernel
/// starts near a centred identity.
TensorMap InitModelTensors(const ModelConfig& cfg, uint64_t seed);

/// Throws InvalidArgument unless `m` holds exactly the model's parameters.
void ValidateTensors(const ModelConfig& cfg, const TensorMap& m);

template <typename T>
struct ModelOutput {
  Matrix<T> embeddings;             // [T x D]
  AttractorTensor<T> attractors;    // [T * G x D]
  Matrix<T> probs;                  // [T x G]
};

template <typename T>
struct Model {
  ModelConfig cfg;
  EncoderWeights<T> enc;
  DecoderWeights<T> dec;

  static Model FromTensors(const ModelConfig& cfg, const TensorMap& m);

  /// Offline forward pass on raw (un-normalized) spliced features.
  ModelOutput<T> Forward(const Matrix<T>& raw_feats) const;
};

}  // namespace lseend

#endif  // LSEEND_MODEL_H_
