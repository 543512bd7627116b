// lseend/training.h

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

#ifndef LSEEND_TRAINING_H_
#define LSEEND_TRAINING_H_

#include <cstdint>
#include <functional>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lseend/checkpoint.h"
#include "lseend/evaluation.h"
#include "lseend/losses.h"
#include "lseend/simulation.h"
#include "lseend/train_graph.h"

namespace lseend {

enum class OptimizerKind { kNoam, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kNoam;
  double lr = 1e-3;          // Adam: constant rate. Noam: scale factor.
  int warmup = 2000;         // Noam only
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double clip_norm = 5.0;    // global gradient norm; 0 disables

  /// Rate for optimizer step `step` (1-based).
  double LearningRate(int64_t step, int d_model) const;
};

struct CurriculumStage {
  std::string name;
  std::vector<int> speakers;   // admissible speaker counts
  double segment_len = 30.0;   // seconds
  int epochs = 1;
  OptimizerConfig optimizer;
  LossMode loss = LossMode::kBce;
};

struct CurriculumConfig {
  int max_speakers = 0;
  double min_len = 0.0;        // pre-training segment length
  double max_len = 0.0;        // adaptation doubles min_len up to this
  std::vector<int> pretrain_epochs;   // per stage; the last value repeats
  std::vector<int> adapt_epochs;
  OptimizerConfig pretrain_optimizer;
  OptimizerConfig adapt_optimizer;
  // Non-empty: used as is.
  std::vector<CurriculumStage> stages;

  /// 3 speakers, 30 s to 120 s.
  static CurriculumConfig Desk();
  /// 4 speakers, pre-training only.
  static CurriculumConfig Paper();
};

nlohmann::json ToJson(const CurriculumStage& s);
nlohmann::json ToJson(const CurriculumConfig& c);

/// Pre-training grows the speaker set at the shortest length with BCE
/// ({2}, then {1..max}); adaptation doubles the segment length per stage
/// with PIT over {1..max}.
std::vector<CurriculumStage> CurriculumSchedule(const CurriculumConfig& cfg);

struct TrainOptions {
  int batch_size = 8;
  uint64_t seed = 0;
  double chunk_seconds = 50.0;   // chunkwise retention beyond this
  int detach_window = 4;
  PairLossOptions pair;
  std::string log_path;           // JSONL; empty disables
  // Evaluate training-set DER every eval_every epochs (0 never) and end the
  // stage once it drops below target_der (< 0 never).
  int eval_every = 0;
  double target_der = -1.0;
  DiarizeOptions eval;
  int64_t max_steps = -1;         // stop after this many steps in total (< 0 unlimited)
};

/// One cropped training example.
struct Sample {
  int conversation = 0;
  int offset = 0;                 // first frame of the crop
  int frames = 0;
};

/// Seeded crop plan of one batch: a pure function of its arguments.
std::vector<Sample> PlanBatch(const std::vector<Conversation>& data, const CurriculumStage& stage,
                              uint64_t seed, int stage_index, int epoch, int batch, int batch_size);
int BatchesPerEpoch(int n_conversations, int batch_size);

struct StepReport {
  int64_t step = 0;
  LossReport loss;    // batch means
  double lr = 0.0;
  double grad_norm = 0.0;
};

struct StageResult {
  int epochs_run = 0;
  int64_t steps = 0;
  double last_loss = 0.0;
  double train_der = -1.0;   // last evaluated, < 0 if never
  bool early_stopped = false;
};

class Trainer {
 public:
  Trainer(const ModelConfig& cfg, const TrainOptions& opts, uint64_t init_seed);
  /// Resumes parameters, optimizer moments and position.
  Trainer(const Checkpoint& ck, const TrainOptions& opts);

  const ModelConfig& config() const { return cfg_; }
  const TensorMap& params() const { return params_; }
  Model<double> model() const { return Model<double>::FromTensors(cfg_, params_); }

  /// Loss and gradients of a batch without updating anything.
  LossReport BatchGradients(const std::vector<Conversation>& data, const std::vector<Sample>& batch,
                            LossMode mode, TensorMap* grads) const;

  /// One optimizer step on the given batch.
  StepReport Step(const std::vector<Conversation>& data, const std::vector<Sample>& batch,
                  const CurriculumStage& stage);

  /// Runs (or continues) stage `stage_index` to completion.
  StageResult TrainStage(const std::vector<CurriculumStage>& stages, int stage_index,
                         const std::vector<Conversation>& data);

  /// Runs every stage from the current position.
  void TrainCurriculum(const std::vector<CurriculumStage>& stages,
                       const std::vector<std::vector<Conversation>>& data_per_stage,
                       const std::function<void(int, const Trainer&)>& after_stage = {});

  /// Called after every completed epoch, with epoch() already advanced.
  void SetEpochHook(std::function<void(Trainer&)> hook) { epoch_hook_ = std::move(hook); }

  Checkpoint MakeCheckpoint() const;
  /// Appends one record to the training log, if any.
  void Log(const nlohmann::json& record);

  int stage_index() const { return stage_; }
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }
  int64_t total_steps() const { return total_steps_; }

 private:
  void ResetOptimizer();

  ModelConfig cfg_;
  TrainOptions opts_;
  TensorMap params_;
  TensorMap m_, v_;
  int64_t opt_step_ = 0;      // steps since the optimizer was reset
  int64_t total_steps_ = 0;
  int stage_ = 0;
  int epoch_ = 0;
  int batch_ = 0;
  bool stage_started_ = false;
  std::shared_ptr<std::ofstream> log_;
  std::function<void(Trainer&)> epoch_hook_;
};

}  // namespace lseend

#endif  // LSEEND_TRAINING_H_
