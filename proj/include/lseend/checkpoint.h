// lseend/checkpoint.h

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

// Checkpoint container:
//   "LSCK" | u32 version | u64 header bytes | header JSON
//   | u64 tensor count | per tensor: u32 name bytes, name, u8 dtype (0 = f64),
//     u32 rows, u32 cols, row-major little-endian payload
// The header holds the model config and the training position.

#ifndef LSEEND_CHECKPOINT_H_
#define LSEEND_CHECKPOINT_H_

#include <string>

#include "json.hpp"
#include "lseend/model.h"

namespace lseend {

constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  TensorMap params;
  TensorMap opt_m;       // Adam first moments, same names as params (may be empty)
  TensorMap opt_v;
  nlohmann::json state = nlohmann::json::object();  // curriculum position, step, seeds
};

std::string EncodeCheckpoint(const Checkpoint& ck);
Checkpoint DecodeCheckpoint(const std::string& bytes);
void SaveCheckpoint(const std::string& path, const Checkpoint& ck);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace lseend

#endif  // LSEEND_CHECKPOINT_H_
