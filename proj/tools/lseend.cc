// lseend.cc

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

// Command-line front end: simulate, train, infer, eval and bench.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "lseend/config.h"
#include "lseend/evaluation.h"
#include "lseend/streaming.h"
#include "lseend/training.h"

#ifndef LSEEND_VERSION
#define LSEEND_VERSION "unknown"
#endif
#ifndef LSEEND_BUILD_TYPE
#define LSEEND_BUILD_TYPE "unknown"
#endif

namespace fs = std::filesystem;
using namespace lseend;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string VersionString() {
  return std::string("lseend ") + LSEEND_VERSION + " (" + LSEEND_BUILD_TYPE + ", " +
         "gcc " + __VERSION__ + ", eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
         std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION) + ")";
}

RunConfig ConfigFrom(const std::string& path) {
  return path.empty() ? ParseRunConfig("") : LoadRunConfig(path);
}

std::vector<double> ParseLengths(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("bad length '" + item + "'");
    }
  }
  Require(!out.empty(), "no lengths given");
  return out;
}

// ---- simulate

struct SimulateArgs {
  std::string config, out;
  bool heldout = false;
  bool print = false;
};

int RunSimulate(const SimulateArgs& a) {
  const RunConfig cfg = ConfigFrom(a.config);
  if (a.print) {
    std::cout << FormatRunConfig(cfg);
    return 0;
  }
  Require(!a.out.empty(), "simulate: --out is required");
  CurriculumStage stage;
  stage.name = "simulate";
  stage.speakers = {cfg.simulation.n_speakers};
  const auto convs = SimulateStageData(cfg, stage, a.heldout);
  WriteDataset(a.out, convs);
  const auto stats = ComputeStats(convs);
  nlohmann::json j = {{"conversations", convs.size()},
                      {"overlap_ratio", stats.overlap_ratio},
                      {"silence_fraction", stats.silence_fraction},
                      {"avg_duration", stats.avg_duration},
                      {"manifest", (fs::path(a.out) / "manifest.jsonl").string()}};
  std::cout << j.dump() << "\n";
  return 0;
}

// ---- train

struct TrainArgs {
  std::string config, out, data;
  bool resume = false;
  bool print = false;
};

std::vector<Conversation> Filter(const std::vector<Conversation>& all, const CurriculumStage& st) {
  std::vector<Conversation> out;
  for (const auto& c : all) {
    const int n = ActiveSpeakers(c.labels);
    if (std::find(st.speakers.begin(), st.speakers.end(), n) != st.speakers.end()) out.push_back(c);
  }
  Require(!out.empty(), "train: no conversations for stage " + st.name);
  return out;
}

int RunTrain(const TrainArgs& a) {
  RunConfig cfg = ConfigFrom(a.config);
  if (!a.data.empty()) cfg.data_dir = a.data;
  if (a.print) {
    std::cout << FormatRunConfig(cfg);
    return 0;
  }
  Require(!a.out.empty(), "train: --out is required");
  fs::create_directories(a.out);
  const std::string ck_path = (fs::path(a.out) / "checkpoint.lsck").string();
  {
    std::ofstream eff(fs::path(a.out) / "effective.cfg");
    eff << FormatRunConfig(cfg);
  }
  const auto stages = cfg.Stages();

  std::vector<std::vector<Conversation>> data;
  std::vector<Conversation> heldout;
  if (!cfg.data_dir.empty()) {
    const auto all = LoadDataset((fs::path(cfg.data_dir) / "manifest.jsonl").string());
    for (const auto& st : stages) data.push_back(Filter(all, st));
  } else {
    std::map<std::vector<int>, std::vector<Conversation>> cache;
    for (const auto& st : stages) {
      auto it = cache.find(st.speakers);
      if (it == cache.end()) it = cache.emplace(st.speakers, SimulateStageData(cfg, st, false)).first;
      data.push_back(it->second);
    }
    if (cfg.heldout_conversations > 0) heldout = SimulateStageData(cfg, stages.back(), true);
  }

  TrainOptions opts = cfg.training;
  opts.log_path = (fs::path(a.out) / "train.jsonl").string();
  std::unique_ptr<Trainer> trainer;
  if (a.resume && fs::exists(ck_path)) {
    const Checkpoint ck = LoadCheckpoint(ck_path);
    Require(ToJson(ck.config) == ToJson(cfg.model), "train: checkpoint model differs from the config");
    trainer = std::make_unique<Trainer>(ck, opts);
  } else {
    if (fs::exists(opts.log_path)) fs::remove(opts.log_path);
    trainer = std::make_unique<Trainer>(cfg.model, opts, cfg.seed);
  }
  if (!heldout.empty() && opts.eval_every > 0) {
    trainer->SetEpochHook([&](Trainer& t) {
      if (t.epoch() % opts.eval_every != 0) return;
      t.Log({{"step", t.total_steps()}, {"stage", t.stage_index()}, {"epoch", t.epoch()},
             {"heldout_der", DatasetDer(t.model(), heldout, cfg.training.eval).der}});
    });
  }
  trainer->TrainCurriculum(stages, data, [&](int idx, const Trainer& t) {
    const Checkpoint ck = t.MakeCheckpoint();
    SaveCheckpoint(ck_path, ck);
    SaveCheckpoint((fs::path(a.out) / ("stage" + std::to_string(idx) + ".lsck")).string(), ck);
  });
  SaveCheckpoint(ck_path, trainer->MakeCheckpoint());

  const Model<double> model = trainer->model();
  nlohmann::json final = {{"event", "final"}, {"step", trainer->total_steps()}};
  final["train_der"] = DatasetDer(model, data.back(), cfg.training.eval).der;
  if (!heldout.empty()) final["heldout_der"] = DatasetDer(model, heldout, cfg.training.eval).der;
  trainer->Log(final);
  std::cout << final.dump() << "\n";
  return 0;
}

// ---- infer

struct InferArgs {
  std::string checkpoint, input, rttm_out, oracle_sad, posteriors, file_id;
  double threshold = 0.5;
  int median_window = 11;
  int min_active = 5;
};

MatrixF LoadInput(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".wav") return SpliceSubsample(LogMel(ReadWav(path))).data;
  return ReadFeatureFile(path);
}

int RunInfer(const InferArgs& a) {
  StreamOptions so;
  so.threshold = a.threshold;
  so.min_active_frames = a.min_active;
  Require(a.threshold > 0 && a.threshold < 1, "infer: threshold must be in (0, 1)");
  Require(a.median_window >= 1 && a.median_window % 2 == 1, "infer: median window must be odd");
  const Checkpoint ck = LoadCheckpoint(a.checkpoint);
  const MatrixF feats = LoadInput(a.input);
  Require(feats.cols() == ck.config.encoder.in_dim,
          "infer: input has " + std::to_string(feats.cols()) + " features, model expects " +
              std::to_string(ck.config.encoder.in_dim));
  auto stream = DiarizationStream<double>::FromCheckpoint(ck, so);
  std::vector<FrameDecision> decisions;
  for (Eigen::Index t = 0; t < feats.rows(); ++t)
    if (auto d = stream.Push(feats.row(t).cast<double>(), t)) decisions.push_back(std::move(*d));
  for (auto& d : stream.Flush()) decisions.push_back(std::move(d));

  const int s = ck.config.decoder.max_speakers;
  MatrixD post(static_cast<Eigen::Index>(decisions.size()), s + 2);
  for (size_t t = 0; t < decisions.size(); ++t) post.row(t) = decisions[t].posteriors;
  if (!a.posteriors.empty()) WriteFeatureFile(a.posteriors, post.cast<float>());

  const std::string id = a.file_id.empty() ? fs::path(a.input).stem().string() : a.file_id;
  MatrixD active;
  if (!a.oracle_sad.empty()) {
    const RawLabels ref = TurnsToFrames(ReadRttm(a.oracle_sad), kSplicedFramePeriod,
                                        static_cast<int>(post.rows()));
    std::vector<int> sad(post.rows());
    for (Eigen::Index t = 0; t < post.rows(); ++t) sad[t] = ref.y.row(t).sum() > 0;
    active = OracleSadPostprocess(post, sad, a.threshold);
  } else {
    active = DecisionMatrix(decisions, s);
  }
  const auto turns = DecisionsToTurns(active, kSplicedFramePeriod, id, a.median_window);
  if (a.rttm_out.empty() || a.rttm_out == "-")
    std::cout << FormatRttm(turns);
  else
    WriteRttm(a.rttm_out, turns);
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string ref, hyp;
  double collar = 0.25;
  bool oracle_sad = false;
};

int RunEval(const EvalArgs& a) {
  Require(a.collar >= 0, "eval: collar must be >= 0");
  const auto ref = ReadRttm(a.ref);
  auto hyp = ReadRttm(a.hyp);
  if (a.oracle_sad) hyp = OracleSadTurns(ref, hyp);
  const DerBreakdown d = DerMultiFile(ref, hyp, a.collar);
  std::printf("miss %.2f\nfalse_alarm %.2f\nconfusion %.2f\ntotal_speech %.2f\n", d.miss,
              d.false_alarm, d.confusion, d.total_speech);
  if (d.defined)
    std::printf("DER %.2f%%\n", 100.0 * d.der);
  else
    std::printf("DER undefined (no reference speech)\n");
  return 0;
}

// ---- bench

struct BenchArgs {
  std::string checkpoint, lengths = "100,1000,10000", report;
  uint64_t seed = 7;
};

int RunBench(const BenchArgs& a) {
  const auto lengths = ParseLengths(a.lengths);
  const Checkpoint ck = LoadCheckpoint(a.checkpoint);
  const auto model = Model<float>::FromTensors(ck.config, ck.params);
  const RtfReport r = BenchRtf(model, lengths, a.seed);
  for (const auto& p : r.points)
    std::printf("%10.1f s audio  %9.3f s wall  rtf %.4f\n", p.audio_seconds, p.wall_seconds, p.rtf);
  std::printf("flatness %.3f\n", r.flatness);
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) throw IoError("cannot write " + a.report);
    out << ToJson(r).dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming end-to-end speaker diarization"};
  app.set_version_flag("--version", VersionString());
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write a simulated dataset");
  c_sim->add_option("--config", sim.config, "Run configuration")->check(CLI::ExistingFile);
  c_sim->add_option("--out", sim.out, "Output directory");
  c_sim->add_flag("--heldout", sim.heldout, "Draw the held-out seeds");
  c_sim->add_flag("--print-effective-config", sim.print, "Print the merged configuration and exit");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train through the curriculum");
  c_train->add_option("--config", tr.config, "Run configuration")->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "Output directory");
  c_train->add_option("--data", tr.data, "Dataset directory (overrides data_dir)");
  c_train->add_flag("--resume", tr.resume, "Continue from <out>/checkpoint.lsck");
  c_train->add_flag("--print-effective-config", tr.print, "Print the merged configuration and exit");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Diarize one recording");
  c_inf->add_option("--checkpoint", inf.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_inf->add_option("--input", inf.input, "WAV (8 kHz) or feature file")->required()->check(CLI::ExistingFile);
  c_inf->add_option("--rttm-out", inf.rttm_out, "RTTM output (default stdout)");
  c_inf->add_option("--threshold", inf.threshold, "Decision threshold")->capture_default_str();
  c_inf->add_option("--median-window", inf.median_window, "Median filter length in frames")->capture_default_str();
  c_inf->add_option("--min-active-frames", inf.min_active, "Frames before a slot counts")->capture_default_str();
  c_inf->add_option("--oracle-sad", inf.oracle_sad, "Reference RTTM giving speech activity")->check(CLI::ExistingFile);
  c_inf->add_option("--emit-posteriors", inf.posteriors, "Write posteriors [T x (S+2)] as a feature file");
  c_inf->add_option("--file-id", inf.file_id, "RTTM file id (default input stem)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a hypothesis RTTM");
  c_eval->add_option("--ref", ev.ref, "Reference RTTM")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--hyp", ev.hyp, "Hypothesis RTTM")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--collar", ev.collar, "Collar in seconds")->capture_default_str();
  c_eval->add_flag("--oracle-sad", ev.oracle_sad, "Apply reference speech activity to the hypothesis");

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Real-time factor against input length");
  c_bench->add_option("--checkpoint", be.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_bench->add_option("--lengths", be.lengths, "Comma-separated lengths in seconds")->capture_default_str();
  c_bench->add_option("--report", be.report, "JSON report path");
  c_bench->add_option("--seed", be.seed, "Input seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (c_sim->parsed()) return RunSimulate(sim);
    if (c_train->parsed()) return RunTrain(tr);
    if (c_inf->parsed()) return RunInfer(inf);
    if (c_eval->parsed()) return RunEval(ev);
    if (c_bench->parsed()) return RunBench(be);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CapacityExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
