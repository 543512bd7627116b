// lseend/config.h

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

// Run configuration shared by the command-line tools. The text format is
//
//   # comment
//   seed = 7
//   [model]
//   preset = desk
//   encoder.d_model = 64
//
// Keys are fixed; anything else is an error. Presets are applied before the
// remaining keys of their section, whatever the order in the file.

#ifndef LSEEND_CONFIG_H_
#define LSEEND_CONFIG_H_

#include <string>
#include <vector>

#include "lseend/simulation.h"
#include "lseend/training.h"

namespace lseend {

enum class CurriculumMode { kProgressive, kSingle };

/// Two speakers, 30 s crops, 200 epochs of BCE with Adam.
CurriculumStage DefaultSingleStage();

struct RunConfig {
  uint64_t seed = 0;

  std::string model_preset = "desk";
  ModelConfig model = ModelConfig::Desk();

  SimSpec simulation;
  int conversations = 20;          // per speaker count and stage
  int heldout_conversations = 20;

  std::string curriculum_preset = "desk";
  CurriculumMode curriculum_mode = CurriculumMode::kProgressive;
  CurriculumConfig curriculum = CurriculumConfig::Desk();
  CurriculumStage single = DefaultSingleStage();  // used in kSingle mode

  TrainOptions training;

  std::string data_dir;            // dataset manifest directory; empty simulates

  /// Cross-section checks; throws InvalidArgument.
  void Validate() const;
  std::vector<CurriculumStage> Stages() const;
};

/// Simulated conversations for every speaker count admitted by `stage`,
/// cfg.conversations (or heldout_conversations) of each. Conversations in
/// which a speaker never talks are replaced by the next seed. Beta is tuned
/// first when simulation.overlap_target is set.
std::vector<Conversation> SimulateStageData(const RunConfig& cfg, const CurriculumStage& stage,
                                            bool heldout);

/// Throws InvalidArgument naming the line for syntax errors, unknown keys
/// and malformed values.
RunConfig ParseRunConfig(const std::string& text);
RunConfig LoadRunConfig(const std::string& path);
/// Every key with its effective value; parses back to the same config.
std::string FormatRunConfig(const RunConfig& cfg);

}  // namespace lseend

#endif  // LSEEND_CONFIG_H_
