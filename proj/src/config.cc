// config.cc

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

#include "lseend/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace lseend {

namespace {

std::string Trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T ParseNumber(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw InvalidArgument("bad number '" + text + "'");
  return v;
}

template <typename T>
std::string FormatNumber(T v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
struct Codec {
  static T Parse(const std::string& s) { return ParseNumber<T>(s); }
  static std::string Format(const T& v) { return FormatNumber(v); }
};

template <>
struct Codec<bool> {
  static bool Parse(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw InvalidArgument("expected true or false, got '" + s + "'");
  }
  static std::string Format(bool v) { return v ? "true" : "false"; }
};

template <>
struct Codec<std::string> {
  static std::string Parse(const std::string& s) { return s; }
  static std::string Format(const std::string& v) { return v; }
};

template <>
struct Codec<std::vector<int>> {
  static std::vector<int> Parse(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(ParseNumber<int>(Trim(item)));
    if (out.empty()) throw InvalidArgument("empty list");
    return out;
  }
  static std::string Format(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
  }
};

template <typename E>
struct EnumCodec {
  std::vector<std::pair<E, std::string>> names;
  E Parse(const std::string& s) const {
    for (const auto& [e, n] : names)
      if (n == s) return e;
    std::string all;
    for (const auto& p : names) all += (all.empty() ? "" : "|") + p.second;
    throw InvalidArgument("expected " + all + ", got '" + s + "'");
  }
  std::string Format(E v) const {
    for (const auto& [e, n] : names)
      if (e == v) return n;
    return "?";
  }
};

const EnumCodec<OptimizerKind> kOptimizers{{{OptimizerKind::kNoam, "noam"}, {OptimizerKind::kAdam, "adam"}}};
const EnumCodec<LossMode> kLosses{{{LossMode::kBce, "bce"}, {LossMode::kPit, "pit"}}};
const EnumCodec<EmitMode> kEmit{{{EmitMode::kFeatures, "features"}, {EmitMode::kWaveform, "waveform"}}};
const EnumCodec<CurriculumMode> kModes{
    {{CurriculumMode::kProgressive, "progressive"}, {CurriculumMode::kSingle, "single"}}};
const EnumCodec<RetentionScaling> kScaling{
    {{RetentionScaling::kNormalized, "normalized"}, {RetentionScaling::kNone, "none"}}};

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T, typename Ref>
Field Bind(const std::string& section, const std::string& key, Ref ref) {
  return {section, key, [ref](RunConfig& c) { return Codec<T>::Format(ref(c)); },
          [ref](RunConfig& c, const std::string& s) { ref(c) = Codec<T>::Parse(s); }};
}

template <typename E, typename Ref>
Field BindEnum(const std::string& section, const std::string& key, const EnumCodec<E>& codec, Ref ref) {
  return {section, key, [ref, &codec](RunConfig& c) { return codec.Format(ref(c)); },
          [ref, &codec](RunConfig& c, const std::string& s) { ref(c) = codec.Parse(s); }};
}

#define LSEEND_REF(expr) [](RunConfig& c) -> auto& { return expr; }

void AddOptimizer(std::vector<Field>* f, const std::string& prefix,
                  OptimizerConfig& (*get)(RunConfig&)) {
  f->push_back(BindEnum(
      "curriculum", prefix + ".optimizer", kOptimizers,
      [get](RunConfig& c) -> auto& { return get(c).kind; }));
  f->push_back(Bind<double>("curriculum", prefix + ".lr",
                            [get](RunConfig& c) -> auto& { return get(c).lr; }));
  f->push_back(Bind<int>("curriculum", prefix + ".warmup",
                         [get](RunConfig& c) -> auto& { return get(c).warmup; }));
  f->push_back(Bind<double>("curriculum", prefix + ".clip_norm",
                            [get](RunConfig& c) -> auto& { return get(c).clip_norm; }));
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(Bind<uint64_t>("", "seed", LSEEND_REF(c.seed)));
    f.push_back(Bind<std::string>("", "data_dir", LSEEND_REF(c.data_dir)));

    f.push_back(Bind<std::string>("model", "preset", LSEEND_REF(c.model_preset)));
    f.push_back(Bind<int>("model", "encoder.in_dim", LSEEND_REF(c.model.encoder.in_dim)));
    f.push_back(Bind<int>("model", "encoder.n_blocks", LSEEND_REF(c.model.encoder.n_blocks)));
    f.push_back(Bind<int>("model", "encoder.d_model", LSEEND_REF(c.model.encoder.d_model)));
    f.push_back(Bind<int>("model", "encoder.n_heads", LSEEND_REF(c.model.encoder.n_heads)));
    f.push_back(Bind<int>("model", "encoder.ff_dim", LSEEND_REF(c.model.encoder.ff_dim)));
    f.push_back(Bind<int>("model", "encoder.conv_kernel", LSEEND_REF(c.model.encoder.conv_kernel)));
    f.push_back(Bind<int>("model", "encoder.conv_left_pad", LSEEND_REF(c.model.encoder.conv_left_pad)));
    f.push_back(Bind<int>("model", "encoder.lookahead_kernel", LSEEND_REF(c.model.encoder.lookahead_kernel)));
    f.push_back(Bind<int>("model", "encoder.lookahead_pad", LSEEND_REF(c.model.encoder.lookahead_pad)));
    f.push_back(Bind<int>("model", "decoder.n_blocks", LSEEND_REF(c.model.decoder.n_blocks)));
    f.push_back(Bind<int>("model", "decoder.d_model", LSEEND_REF(c.model.decoder.d_model)));
    f.push_back(Bind<int>("model", "decoder.n_heads", LSEEND_REF(c.model.decoder.n_heads)));
    f.push_back(Bind<int>("model", "decoder.ff_dim", LSEEND_REF(c.model.decoder.ff_dim)));
    f.push_back(Bind<int>("model", "decoder.max_speakers", LSEEND_REF(c.model.decoder.max_speakers)));
    f.push_back(Bind<bool>("model", "multiscale_decay", LSEEND_REF(c.model.multiscale_decay)));
    f.push_back(BindEnum("model", "scaling", kScaling, LSEEND_REF(c.model.scaling)));

    f.push_back(Bind<int>("simulation", "n_speakers", LSEEND_REF(c.simulation.n_speakers)));
    f.push_back(Bind<double>("simulation", "beta", LSEEND_REF(c.simulation.beta)));
    f.push_back(Bind<int>("simulation", "min_utterances", LSEEND_REF(c.simulation.min_utterances)));
    f.push_back(Bind<int>("simulation", "max_utterances", LSEEND_REF(c.simulation.max_utterances)));
    f.push_back(Bind<double>("simulation", "utt_log_mean", LSEEND_REF(c.simulation.utt_log_mean)));
    f.push_back(Bind<double>("simulation", "utt_log_sigma", LSEEND_REF(c.simulation.utt_log_sigma)));
    f.push_back(Bind<double>("simulation", "utt_min", LSEEND_REF(c.simulation.utt_min)));
    f.push_back(Bind<double>("simulation", "utt_max", LSEEND_REF(c.simulation.utt_max)));
    f.push_back(Bind<double>("simulation", "overlap_target", LSEEND_REF(c.simulation.overlap_target)));
    f.push_back(Bind<double>("simulation", "duration_target", LSEEND_REF(c.simulation.duration_target)));
    f.push_back(BindEnum("simulation", "emit", kEmit, LSEEND_REF(c.simulation.emit)));
    f.push_back(Bind<int>("simulation", "feature_dim", LSEEND_REF(c.simulation.feature_dim)));
    f.push_back(Bind<double>("simulation", "signal_gain", LSEEND_REF(c.simulation.signal_gain)));
    f.push_back(Bind<double>("simulation", "jitter", LSEEND_REF(c.simulation.jitter)));
    f.push_back(Bind<double>("simulation", "noise_floor", LSEEND_REF(c.simulation.noise_floor)));
    f.push_back(Bind<double>("simulation", "shared_weight", LSEEND_REF(c.simulation.shared_weight)));
    f.push_back(Bind<int>("simulation", "speaker_dims", LSEEND_REF(c.simulation.speaker_dims)));
    f.push_back(Bind<int>("simulation", "speaker_pool", LSEEND_REF(c.simulation.speaker_pool)));
    f.push_back(Bind<uint64_t>("simulation", "pool_seed", LSEEND_REF(c.simulation.pool_seed)));
    f.push_back(Bind<int>("simulation", "conversations", LSEEND_REF(c.conversations)));
    f.push_back(Bind<int>("simulation", "heldout_conversations", LSEEND_REF(c.heldout_conversations)));

    f.push_back(Bind<std::string>("curriculum", "preset", LSEEND_REF(c.curriculum_preset)));
    f.push_back(BindEnum("curriculum", "mode", kModes, LSEEND_REF(c.curriculum_mode)));
    f.push_back(Bind<int>("curriculum", "max_speakers", LSEEND_REF(c.curriculum.max_speakers)));
    f.push_back(Bind<double>("curriculum", "min_len", LSEEND_REF(c.curriculum.min_len)));
    f.push_back(Bind<double>("curriculum", "max_len", LSEEND_REF(c.curriculum.max_len)));
    f.push_back(Bind<std::vector<int>>("curriculum", "pretrain_epochs", LSEEND_REF(c.curriculum.pretrain_epochs)));
    f.push_back(Bind<std::vector<int>>("curriculum", "adapt_epochs", LSEEND_REF(c.curriculum.adapt_epochs)));
    AddOptimizer(&f, "pretrain", [](RunConfig& c) -> OptimizerConfig& { return c.curriculum.pretrain_optimizer; });
    AddOptimizer(&f, "adapt", [](RunConfig& c) -> OptimizerConfig& { return c.curriculum.adapt_optimizer; });
    f.push_back(Bind<std::vector<int>>("curriculum", "single.speakers", LSEEND_REF(c.single.speakers)));
    f.push_back(Bind<double>("curriculum", "single.segment_len", LSEEND_REF(c.single.segment_len)));
    f.push_back(Bind<int>("curriculum", "single.epochs", LSEEND_REF(c.single.epochs)));
    f.push_back(BindEnum("curriculum", "single.loss", kLosses, LSEEND_REF(c.single.loss)));
    AddOptimizer(&f, "single", [](RunConfig& c) -> OptimizerConfig& { return c.single.optimizer; });

    f.push_back(Bind<int>("training", "batch_size", LSEEND_REF(c.training.batch_size)));
    f.push_back(Bind<double>("training", "chunk_seconds", LSEEND_REF(c.training.chunk_seconds)));
    f.push_back(Bind<int>("training", "detach_window", LSEEND_REF(c.training.detach_window)));
    f.push_back(Bind<int>("training", "eval_every", LSEEND_REF(c.training.eval_every)));
    f.push_back(Bind<double>("training", "target_der", LSEEND_REF(c.training.target_der)));
    f.push_back(Bind<int64_t>("training", "max_steps", LSEEND_REF(c.training.max_steps)));
    f.push_back(Bind<int>("training", "pair_full_frames", LSEEND_REF(c.training.pair.max_full_frames)));
    f.push_back(Bind<int64_t>("training", "pair_samples", LSEEND_REF(c.training.pair.sampled_pairs)));
    f.push_back(Bind<double>("training", "eval.threshold", LSEEND_REF(c.training.eval.stream.threshold)));
    f.push_back(Bind<int>("training", "eval.min_active_frames",
                          LSEEND_REF(c.training.eval.stream.min_active_frames)));
    f.push_back(Bind<int>("training", "eval.median_window", LSEEND_REF(c.training.eval.median_window)));
    f.push_back(Bind<double>("training", "eval.collar", LSEEND_REF(c.training.eval.collar)));
    return f;
  }();
  return fields;
}

#undef LSEEND_REF

const Field* FindField(const std::string& section, const std::string& key) {
  for (const auto& f : Fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

void ApplyModelPreset(RunConfig* c) {
  if (c->model_preset == "desk")
    c->model = ModelConfig::Desk();
  else if (c->model_preset == "paper")
    c->model = ModelConfig::Paper();
  else if (c->model_preset == "micro")
    c->model = ModelConfig::Micro();
  else
    throw InvalidArgument("unknown model preset '" + c->model_preset + "'");
}

void ApplyCurriculumPreset(RunConfig* c) {
  if (c->curriculum_preset == "desk")
    c->curriculum = CurriculumConfig::Desk();
  else if (c->curriculum_preset == "paper")
    c->curriculum = CurriculumConfig::Paper();
  else
    throw InvalidArgument("unknown curriculum preset '" + c->curriculum_preset + "'");
}

struct Entry {
  int line;
  std::string section, key, value;
};

}  // namespace

CurriculumStage DefaultSingleStage() {
  CurriculumStage s;
  s.name = "single";
  s.speakers = {2};
  s.segment_len = 30.0;
  s.epochs = 200;
  s.optimizer.kind = OptimizerKind::kAdam;
  s.optimizer.lr = 5e-4;
  s.optimizer.warmup = 1;
  s.loss = LossMode::kBce;
  return s;
}

std::vector<Conversation> SimulateStageData(const RunConfig& cfg, const CurriculumStage& stage,
                                            bool heldout) {
  const int want = heldout ? cfg.heldout_conversations : cfg.conversations;
  std::vector<Conversation> out;
  for (int n : stage.speakers) {
    SimSpec spec = cfg.simulation;
    spec.n_speakers = n;
    if (n == 1) spec.overlap_target = 0;
    if (spec.overlap_target > 0) spec = TuneBeta(spec);
    const uint64_t base = cfg.seed * 1000003ULL + static_cast<uint64_t>(n) * 100000 + (heldout ? 50000 : 0);
    int got = 0;
    for (uint64_t k = 0; got < want; ++k) {
      Require(k < static_cast<uint64_t>(want) * 10 + 100,
              "config: simulation keeps producing silent speakers");
      spec.seed = base + k;
      Conversation c = SampleConversation(spec);
      if (ActiveSpeakers(c.labels) != n) continue;
      char id[32];
      std::snprintf(id, sizeof(id), "%s%dspk_%05d", heldout ? "ho" : "tr", n, got);
      c.id = id;
      out.push_back(std::move(c));
      ++got;
    }
  }
  return out;
}

void RunConfig::Validate() const {
  model.Validate();
  simulation.Validate();
  if (simulation.emit == EmitMode::kFeatures)
    Require(simulation.feature_dim == model.encoder.in_dim,
            "config: simulation.feature_dim must equal model encoder.in_dim");
  else
    Require(model.encoder.in_dim == kSplicedDim, "config: waveform simulation needs encoder.in_dim = 345");
  Require(conversations >= 1 && heldout_conversations >= 0, "config: bad conversation counts");
  Require(training.batch_size >= 1 && training.chunk_seconds > 0 && training.detach_window >= 1,
          "config: bad training options");
  const auto stages = Stages();
  Require(!stages.empty(), "config: no training stages");
  for (const auto& s : stages) {
    for (int n : s.speakers)
      Require(n >= 1 && n <= model.decoder.max_speakers,
              "config: stage " + s.name + " uses " + std::to_string(n) + " speakers, model holds " +
                  std::to_string(model.decoder.max_speakers));
    Require(s.optimizer.lr > 0 && s.optimizer.warmup >= 1, "config: bad optimizer in stage " + s.name);
  }
}

std::vector<CurriculumStage> RunConfig::Stages() const {
  if (curriculum_mode == CurriculumMode::kSingle) {
    CurriculumStage s = single;
    if (s.name.empty()) s.name = "single";
    CurriculumConfig c;
    c.stages = {s};
    return CurriculumSchedule(c);
  }
  return CurriculumSchedule(curriculum);
}

RunConfig ParseRunConfig(const std::string& text) {
  std::vector<Entry> entries;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> InvalidArgument {
    return InvalidArgument("config line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = Trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      section = Trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "simulation" && section != "curriculum" && section != "training")
        throw fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected key = value");
    Entry e{line_no, section, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1))};
    if (!FindField(e.section, e.key))
      throw fail("unknown key '" + e.key + "'" + (section.empty() ? "" : " in [" + section + "]"));
    if (!seen.insert({e.section, e.key}).second) throw fail("duplicate key '" + e.key + "'");
    entries.push_back(e);
  }

  RunConfig cfg;
  auto apply = [&](const Entry& e) {
    line_no = e.line;
    try {
      FindField(e.section, e.key)->set(cfg, e.value);
    } catch (const InvalidArgument& ex) {
      throw fail(e.key + ": " + ex.what());
    }
  };
  for (const auto& e : entries) {
    if (e.key != "preset") continue;
    apply(e);
    try {
      if (e.section == "model") ApplyModelPreset(&cfg);
      else ApplyCurriculumPreset(&cfg);
    } catch (const InvalidArgument& ex) {
      throw fail(ex.what());
    }
  }
  for (const auto& e : entries)
    if (e.key != "preset") apply(e);
  cfg.training.seed = cfg.seed;
  cfg.training.pair.seed = cfg.seed;
  cfg.Validate();
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str());
}

std::string FormatRunConfig(const RunConfig& cfg) {
  RunConfig c = cfg;
  std::string out, section;
  for (const auto& f : Fields()) {
    if (f.section != section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

}  // namespace lseend
