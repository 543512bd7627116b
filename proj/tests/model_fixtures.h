// model_fixtures.h

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

#ifndef LSEEND_TESTS_MODEL_FIXTURES_H_
#define LSEEND_TESTS_MODEL_FIXTURES_H_

#include <random>

#include "lseend/model.h"
#include "test_util.h"

namespace lseend {
namespace testing {

// Initial tensors plus Gaussian noise, so that no block is near identity.
inline TensorMap NoisyTensors(const ModelConfig& cfg, uint64_t seed, double noise = 0.05) {
  TensorMap m = InitModelTensors(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  for (auto& kv : m) kv.second += RandomMatrix(kv.second.rows(), kv.second.cols(), &rng, noise);
  return m;
}

inline ModelConfig SmallConfig() {
  ModelConfig c = ModelConfig::Micro();
  c.encoder.in_dim = 20;
  c.encoder.n_blocks = 2;
  c.encoder.d_model = 16;
  c.encoder.n_heads = 4;
  c.encoder.ff_dim = 32;
  c.decoder.n_blocks = 2;
  c.decoder.d_model = 16;
  c.decoder.n_heads = 4;
  c.decoder.ff_dim = 32;
  c.decoder.max_speakers = 3;
  return c;
}

}  // namespace testing
}  // namespace lseend

#endif  // LSEEND_TESTS_MODEL_FIXTURES_H_
