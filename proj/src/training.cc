// training.cc

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

#include "lseend/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace lseend {

namespace {

std::mt19937_64 PlanRng(uint64_t seed, int stage, int epoch, int64_t item) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(stage), static_cast<uint32_t>(epoch),
                    static_cast<uint32_t>(item + 1)};
  return std::mt19937_64(seq);
}

std::string OptName(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "noam"; }

nlohmann::json ToJson(const OptimizerConfig& o) {
  return {{"kind", OptName(o.kind)}, {"lr", o.lr},       {"warmup", o.warmup},
          {"beta1", o.beta1},        {"beta2", o.beta2}, {"eps", o.eps},
          {"clip_norm", o.clip_norm}};
}

}  // namespace

double OptimizerConfig::LearningRate(int64_t step, int d_model) const {
  Require(step >= 1, "optimizer: steps are 1-based");
  if (kind == OptimizerKind::kAdam) return lr;
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(std::max(1, warmup));
  return lr / std::sqrt(static_cast<double>(d_model)) * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

CurriculumConfig CurriculumConfig::Desk() {
  CurriculumConfig c;
  c.max_speakers = 3;
  c.min_len = 30.0;
  c.max_len = 120.0;
  c.pretrain_epochs = {100, 50};
  c.adapt_epochs = {25};
  c.pretrain_optimizer.kind = OptimizerKind::kNoam;
  c.pretrain_optimizer.lr = 1.0;
  c.pretrain_optimizer.warmup = 2000;
  c.adapt_optimizer.kind = OptimizerKind::kAdam;
  c.adapt_optimizer.lr = 1e-5;
  return c;
}

CurriculumConfig CurriculumConfig::Paper() {
  CurriculumConfig c;
  c.max_speakers = 4;
  c.min_len = 50.0;
  c.max_len = 50.0;
  c.pretrain_epochs = {100, 50};
  c.pretrain_optimizer.kind = OptimizerKind::kNoam;
  c.pretrain_optimizer.lr = 1.0;
  c.pretrain_optimizer.warmup = 100000;
  c.adapt_optimizer.kind = OptimizerKind::kAdam;
  c.adapt_optimizer.lr = 1e-5;
  return c;
}

nlohmann::json ToJson(const CurriculumStage& s) {
  return {{"name", s.name},
          {"speakers", s.speakers},
          {"segment_len", s.segment_len},
          {"epochs", s.epochs},
          {"optimizer", ToJson(s.optimizer)},
          {"loss", s.loss == LossMode::kPit ? "pit" : "bce"}};
}

nlohmann::json ToJson(const CurriculumConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.stages) stages.push_back(ToJson(s));
  return {{"max_speakers", c.max_speakers},
          {"min_len", c.min_len},
          {"max_len", c.max_len},
          {"pretrain_epochs", c.pretrain_epochs},
          {"adapt_epochs", c.adapt_epochs},
          {"pretrain_optimizer", ToJson(c.pretrain_optimizer)},
          {"adapt_optimizer", ToJson(c.adapt_optimizer)},
          {"stages", stages}};
}

std::vector<CurriculumStage> CurriculumSchedule(const CurriculumConfig& cfg) {
  if (!cfg.stages.empty()) {
    for (const auto& s : cfg.stages) {
      Require(!s.speakers.empty() && s.segment_len > 0 && s.epochs >= 0,
              "curriculum: malformed stage " + s.name);
    }
    return cfg.stages;
  }
  if (cfg.max_speakers < 1 || cfg.min_len <= 0)
    throw InvalidArgument("curriculum: empty configuration");
  Require(cfg.max_len >= cfg.min_len, "curriculum: max_len below min_len");
  auto epochs_at = [](const std::vector<int>& v, size_t i) {
    Require(!v.empty(), "curriculum: epochs not given");
    return v[std::min(i, v.size() - 1)];
  };
  std::vector<int> all(cfg.max_speakers);
  std::iota(all.begin(), all.end(), 1);
  auto range_name = [&](const std::vector<int>& spk) {
    if (spk.size() == 1) return std::to_string(spk[0]) + "spk";
    return "{" + std::to_string(spk.front()) + "-" + std::to_string(spk.back()) + "}spk";
  };
  auto len_name = [](double len) {
    std::ostringstream o;
    o << len << "s";
    return o.str();
  };

  std::vector<std::vector<int>> pre = {{2}, all};
  if (cfg.max_speakers == 1) pre = {{1}};
  std::vector<CurriculumStage> out;
  for (size_t i = 0; i < pre.size(); ++i) {
    CurriculumStage s;
    s.speakers = pre[i];
    s.segment_len = cfg.min_len;
    s.epochs = epochs_at(cfg.pretrain_epochs, i);
    s.optimizer = cfg.pretrain_optimizer;
    s.loss = LossMode::kBce;
    s.name = range_name(s.speakers) + "/" + len_name(s.segment_len) + "/bce";
    out.push_back(s);
  }
  size_t k = 0;
  for (double len = cfg.min_len * 2; len <= cfg.max_len + 1e-9; len *= 2, ++k) {
    CurriculumStage s;
    s.speakers = all;
    s.segment_len = len;
    s.epochs = epochs_at(cfg.adapt_epochs, k);
    s.optimizer = cfg.adapt_optimizer;
    s.loss = LossMode::kPit;
    s.name = range_name(s.speakers) + "/" + len_name(s.segment_len) + "/pit";
    out.push_back(s);
  }
  return out;
}

int BatchesPerEpoch(int n, int batch_size) {
  Require(batch_size >= 1, "training: batch size must be positive");
  return (n + batch_size - 1) / batch_size;
}

std::vector<Sample> PlanBatch(const std::vector<Conversation>& data, const CurriculumStage& stage,
                              uint64_t seed, int stage_index, int epoch, int batch, int batch_size) {
  const int n = static_cast<int>(data.size());
  Require(n > 0, "training: empty dataset");
  Require(batch >= 0 && batch < BatchesPerEpoch(n, batch_size), "training: batch index out of range");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = PlanRng(seed, stage_index, epoch, -1);
  std::shuffle(order.begin(), order.end(), rng);
  const int seg = std::max(1, static_cast<int>(std::lround(stage.segment_len / kSplicedFramePeriod)));
  std::vector<Sample> out;
  for (int i = batch * batch_size; i < std::min(n, (batch + 1) * batch_size); ++i) {
    Sample s;
    s.conversation = order[i];
    const int total = static_cast<int>(data[s.conversation].feats.rows());
    s.frames = std::min(seg, total);
    auto crop = PlanRng(seed, stage_index, epoch, i);
    s.offset = std::uniform_int_distribution<int>(0, total - s.frames)(crop);
    out.push_back(s);
  }
  return out;
}

Trainer::Trainer(const ModelConfig& cfg, const TrainOptions& opts, uint64_t init_seed)
    : cfg_(cfg), opts_(opts), params_(InitModelTensors(cfg, init_seed)) {
  cfg_.Validate();
  ResetOptimizer();
  if (!opts_.log_path.empty()) {
    log_ = std::make_shared<std::ofstream>(opts_.log_path, std::ios::app);
    if (!*log_) throw IoError("cannot open training log " + opts_.log_path);
  }
}

Trainer::Trainer(const Checkpoint& ck, const TrainOptions& opts)
    : cfg_(ck.config), opts_(opts), params_(ck.params) {
  ValidateTensors(cfg_, params_);
  ResetOptimizer();
  for (const auto& [name, m] : ck.opt_m) {
    Require(m_.count(name) && m_[name].rows() == m.rows() && m_[name].cols() == m.cols(),
            "checkpoint: optimizer state does not match " + name);
    m_[name] = m;
  }
  for (const auto& [name, m] : ck.opt_v) {
    Require(v_.count(name) && v_[name].rows() == m.rows() && v_[name].cols() == m.cols(),
            "checkpoint: optimizer state does not match " + name);
    v_[name] = m;
  }
  const auto& st = ck.state;
  opt_step_ = st.value("opt_step", int64_t{0});
  total_steps_ = st.value("total_steps", int64_t{0});
  stage_ = st.value("stage", 0);
  epoch_ = st.value("epoch", 0);
  batch_ = st.value("batch", 0);
  stage_started_ = st.value("stage_started", false);
  if (!opts_.log_path.empty()) {
    log_ = std::make_shared<std::ofstream>(opts_.log_path, std::ios::app);
    if (!*log_) throw IoError("cannot open training log " + opts_.log_path);
  }
}

void Trainer::ResetOptimizer() {
  m_.clear();
  v_.clear();
  for (const auto& [name, p] : params_) {
    m_[name] = MatrixD::Zero(p.rows(), p.cols());
    v_[name] = MatrixD::Zero(p.rows(), p.cols());
  }
  opt_step_ = 0;
}

void Trainer::Log(const nlohmann::json& record) {
  if (log_) {
    *log_ << record.dump() << "\n";
    log_->flush();
  }
}

Checkpoint Trainer::MakeCheckpoint() const {
  Checkpoint ck;
  ck.config = cfg_;
  ck.params = params_;
  ck.opt_m = m_;
  ck.opt_v = v_;
  ck.state = {{"opt_step", opt_step_}, {"total_steps", total_steps_}, {"stage", stage_},
              {"epoch", epoch_},       {"batch", batch_},             {"stage_started", stage_started_},
              {"seed", opts_.seed}};
  return ck;
}

LossReport Trainer::BatchGradients(const std::vector<Conversation>& data,
                                   const std::vector<Sample>& batch, LossMode mode,
                                   TensorMap* grads) const {
  Require(!batch.empty(), "training: empty batch");
  if (grads) {
    grads->clear();
    for (const auto& [name, p] : params_) (*grads)[name] = MatrixD::Zero(p.rows(), p.cols());
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const int chunk = std::max(1, static_cast<int>(std::lround(opts_.chunk_seconds / kSplicedFramePeriod)));
  LossReport mean;
  for (const auto& s : batch) {
    const auto& c = data.at(s.conversation);
    const MatrixD feats =
        CumulativeMeanNormalize<double>(c.feats.middleRows(s.offset, s.frames).cast<double>());
    RawLabels crop;
    crop.y = c.labels.y.middleRows(s.offset, s.frames);
    const AugmentedLabels y = AppearanceOrderPermute(crop, cfg_.decoder.max_speakers);

    GraphOptions gopts;
    gopts.chunkwise = s.frames > chunk;
    gopts.chunk_len = chunk;
    gopts.detach_window = opts_.detach_window;
    ad::Graph g;
    const ParamVars p = AddParameters(g, params_);
    const GraphForward fw = BuildForward(g, p, feats, cfg_, gopts);
    LossReport r;
    const ad::Var loss = LossNode(g, fw.probs, fw.embeddings, y, mode, &r, opts_.pair);
    mean.l_d += r.l_d * inv_b;
    mean.l_e += r.l_e * inv_b;
    mean.total += r.total * inv_b;
    mean.embedding_degenerate = mean.embedding_degenerate || r.embedding_degenerate;
    if (grads) {
      g.Backward(loss);
      for (const auto& [name, var] : p) (*grads)[name] += inv_b * g.grad(var);
    }
  }
  return mean;
}

StepReport Trainer::Step(const std::vector<Conversation>& data, const std::vector<Sample>& batch,
                         const CurriculumStage& stage) {
  TensorMap grads;
  StepReport rep;
  try {
    rep.loss = BatchGradients(data, batch, stage.loss, &grads);
  } catch (const NumericError& e) {
    std::ostringstream o;
    o << "training diverged at step " << total_steps_ + 1 << " (stage " << stage_ << ", epoch "
      << epoch_ << ", batch " << batch_ << ", conversations";
    for (const auto& s : batch) o << " " << data[s.conversation].id << "@" << s.offset;
    o << "): " << e.what();
    throw NumericError(o.str());
  }
  double sq = 0.0;
  for (const auto& [name, gm] : grads) sq += gm.squaredNorm();
  rep.grad_norm = std::sqrt(sq);
  if (!std::isfinite(rep.grad_norm))
    throw NumericError("training diverged at step " + std::to_string(total_steps_ + 1) +
                       ": non-finite gradient (loss " + std::to_string(rep.loss.total) + ")");
  const auto& oc = stage.optimizer;
  const double clip = oc.clip_norm > 0 && rep.grad_norm > oc.clip_norm ? oc.clip_norm / rep.grad_norm : 1.0;

  ++opt_step_;
  ++total_steps_;
  rep.step = total_steps_;
  rep.lr = oc.LearningRate(opt_step_, cfg_.encoder.d_model);
  const double bc1 = 1.0 - std::pow(oc.beta1, static_cast<double>(opt_step_));
  const double bc2 = 1.0 - std::pow(oc.beta2, static_cast<double>(opt_step_));
  for (auto& [name, p] : params_) {
    const MatrixD gm = grads[name] * clip;
    MatrixD& m = m_[name];
    MatrixD& v = v_[name];
    m = oc.beta1 * m + (1.0 - oc.beta1) * gm;
    v = oc.beta2 * v + (1.0 - oc.beta2) * gm.cwiseProduct(gm);
    p.array() -= rep.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + oc.eps);
  }
  Log({{"step", rep.step},
       {"stage", stage_},
       {"epoch", epoch_},
       {"l_d", rep.loss.l_d},
       {"l_e", rep.loss.l_e},
       {"total", rep.loss.total},
       {"lr", rep.lr}});
  return rep;
}

StageResult Trainer::TrainStage(const std::vector<CurriculumStage>& stages, int stage_index,
                                const std::vector<Conversation>& data) {
  Require(stage_index >= 0 && stage_index < static_cast<int>(stages.size()),
          "training: stage index out of range");
  const CurriculumStage& stage = stages[stage_index];
  Require(!data.empty(), "training: empty dataset for stage " + stage.name);
  for (const auto& c : data) {
    const int n = ActiveSpeakers(c.labels);
    if (std::find(stage.speakers.begin(), stage.speakers.end(), n) == stage.speakers.end())
      throw InvalidArgument("training: conversation " + c.id + " has " + std::to_string(n) +
                            " speakers, outside stage " + stage.name);
    if (n > cfg_.decoder.max_speakers)
      throw CapacityExceeded("training: conversation " + c.id + " exceeds model capacity");
  }
  if (!stage_started_ || stage_ != stage_index) {
    stage_ = stage_index;
    epoch_ = 0;
    batch_ = 0;
    stage_started_ = true;
    ResetOptimizer();
  }
  StageResult res;
  const int nb = BatchesPerEpoch(static_cast<int>(data.size()), opts_.batch_size);
  while (epoch_ < stage.epochs) {
    while (batch_ < nb) {
      if (opts_.max_steps >= 0 && total_steps_ >= opts_.max_steps) return res;
      const auto plan = PlanBatch(data, stage, opts_.seed, stage_, epoch_, batch_, opts_.batch_size);
      const StepReport r = Step(data, plan, stage);
      res.last_loss = r.loss.total;
      ++res.steps;
      ++batch_;
    }
    batch_ = 0;
    ++epoch_;
    ++res.epochs_run;
    if (epoch_hook_) epoch_hook_(*this);
    if (opts_.eval_every > 0 && (epoch_ % opts_.eval_every == 0 || epoch_ == stage.epochs)) {
      res.train_der = DatasetDer(model(), data, opts_.eval).der;
      Log({{"step", total_steps_}, {"stage", stage_}, {"epoch", epoch_}, {"train_der", res.train_der}});
      if (opts_.target_der >= 0 && res.train_der < opts_.target_der) {
        res.early_stopped = true;
        break;
      }
    }
  }
  stage_started_ = false;
  stage_ = stage_index + 1;
  epoch_ = 0;
  batch_ = 0;
  return res;
}

void Trainer::TrainCurriculum(const std::vector<CurriculumStage>& stages,
                              const std::vector<std::vector<Conversation>>& data_per_stage,
                              const std::function<void(int, const Trainer&)>& after_stage) {
  Require(data_per_stage.size() == stages.size(), "training: one dataset per stage required");
  while (stage_ < static_cast<int>(stages.size())) {
    const int idx = stage_;
    TrainStage(stages, idx, data_per_stage[idx]);
    if (opts_.max_steps >= 0 && total_steps_ >= opts_.max_steps && stage_ == idx) return;
    if (after_stage) after_stage(idx, *this);
  }
}

}  // namespace lseend
