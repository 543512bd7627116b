// simulation.cc

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

#include "lseend/simulation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

namespace lseend {

namespace {

using Rng = std::mt19937_64;

Rng StreamRng(uint64_t seed, uint64_t stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Streams within one conversation.
constexpr uint64_t kSpeakerStream = 1000;
constexpr uint64_t kEmitStream = 1001;
constexpr uint64_t kPickStream = 1002;
constexpr uint64_t kBasisStream = 1003;
constexpr uint64_t kTuneOffset = 0x5bd1e995u;

double TruncatedLogNormal(Rng& rng, double mu, double sigma, double lo, double hi) {
  std::lognormal_distribution<double> dist(mu, sigma);
  for (int i = 0; i < 1000; ++i) {
    const double v = dist(rng);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(dist(rng), lo, hi);
}

RowVectorD GaussianRow(Rng& rng, int dim) {
  std::normal_distribution<double> n01;
  RowVectorD v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n01(rng);
  return v;
}

std::string EmitName(EmitMode m) { return m == EmitMode::kWaveform ? "waveform" : "features"; }

// Second-order band-pass (constant peak gain), direct form I.
struct Biquad {
  double b0 = 0, b2 = 0, a1 = 0, a2 = 0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  Biquad(double centre, double q, double rate) {
    const double w = 2.0 * M_PI * centre / rate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w) / a0;
    a2 = (1.0 - alpha) / a0;
  }
  double Step(double x) {
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

RawLabels TimelineLabels(const std::vector<std::vector<Segment>>& turns, int frames) {
  RawLabels out;
  out.y = MatrixD::Zero(frames, static_cast<int>(turns.size()));
  for (size_t s = 0; s < turns.size(); ++s) {
    const auto row = SegmentsToFrames(turns[s], frames, kSplicedFramePeriod);
    for (int t = 0; t < frames; ++t) out.y(t, static_cast<int>(s)) = row[t];
    out.speaker_ids.push_back("spk" + std::to_string(s));
  }
  return out;
}

int FramesFor(double duration) {
  return std::max(1, static_cast<int>(std::ceil(duration / kSplicedFramePeriod - 1e-9)));
}

MatrixF EmitFeatures(const SimSpec& spec, const std::vector<SyntheticSpeaker>& spk,
                     const RawLabels& labels) {
  Rng rng = StreamRng(spec.seed, kEmitStream);
  const int dim = spec.feature_dim;
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(dim));
  RowVectorD channel = GaussianRow(rng, dim);
  channel *= 0.5 / channel.norm();
  MatrixF out(labels.frames(), dim);
  for (int t = 0; t < labels.frames(); ++t) {
    RowVectorD v = channel + spec.noise_floor * inv_sqrt_dim * GaussianRow(rng, dim);
    RowVectorD sum = RowVectorD::Zero(dim);
    double jitter = 0.0;
    int active = 0;
    for (int s = 0; s < labels.speakers(); ++s) {
      if (labels.y(t, s) == 0.0) continue;
      sum += spk[s].signature;
      jitter = std::max(jitter, spk[s].jitter);
      ++active;
    }
    if (active > 0) {
      v += spec.signal_gain * sum / sum.norm();
      v += jitter * inv_sqrt_dim * GaussianRow(rng, dim);
    }
    out.row(t) = v.cast<float>();
  }
  return out;
}

MatrixF EmitWaveform(const SimSpec& spec, const std::vector<SyntheticSpeaker>& spk,
                     const std::vector<std::vector<Segment>>& turns, double duration) {
  Rng rng = StreamRng(spec.seed, kEmitStream);
  std::normal_distribution<double> n01;
  const int rate = 8000;
  const int n = static_cast<int>(std::lround(duration * rate));
  std::vector<Biquad> filters;
  for (const auto& s : spk) filters.emplace_back(s.centre_hz, s.q, rate);
  std::vector<size_t> cursor(turns.size(), 0);
  Waveform wav;
  wav.sample_rate = rate;
  wav.samples.resize(n);
  const double speech_amp = 4000.0 * spec.signal_gain;
  const double floor_amp = 400.0 * spec.noise_floor;
  for (int i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) / rate;
    double x = floor_amp * n01(rng);
    for (size_t s = 0; s < turns.size(); ++s) {
      const double y = filters[s].Step(n01(rng));
      while (cursor[s] < turns[s].size() && turns[s][cursor[s]].offset <= time) ++cursor[s];
      if (cursor[s] < turns[s].size() && turns[s][cursor[s]].onset <= time)
        x += speech_amp * (1.0 + spk[s].jitter * 0.3 * n01(rng)) * y;
    }
    wav.samples[i] = static_cast<int16_t>(std::clamp(std::lround(x), -32768L, 32767L));
  }
  return SpliceSubsample(LogMel(wav)).data;
}

}  // namespace

void SimSpec::Validate() const {
  Require(n_speakers >= 1, "simulation: n_speakers must be >= 1");
  Require(beta >= 0 && std::isfinite(beta), "simulation: beta must be >= 0");
  Require(min_utterances >= 1 && max_utterances >= min_utterances,
          "simulation: bad utterance count range");
  Require(utt_log_sigma >= 0 && utt_min > 0 && utt_max >= utt_min,
          "simulation: bad utterance length distribution");
  Require(overlap_target >= 0 && overlap_target < 1, "simulation: overlap_target must be in [0, 1)");
  if (n_speakers == 1 && overlap_target > 0)
    throw InvalidArgument("simulation: overlap_target > 0 needs at least two speakers");
  Require(duration_target >= 0, "simulation: duration_target must be >= 0");
  Require(feature_dim >= 1, "simulation: feature_dim must be positive");
  Require(emit == EmitMode::kFeatures || feature_dim == kSplicedDim,
          "simulation: waveform mode produces 345-dimensional features");
  Require(jitter >= 0 && noise_floor >= 0 && signal_gain > 0, "simulation: bad emission levels");
  Require(shared_weight >= 0 && shared_weight < 1, "simulation: shared_weight must be in [0, 1)");
  Require(speaker_dims >= 0 && speaker_dims < feature_dim,
          "simulation: speaker_dims must be below feature_dim");
  Require(speaker_pool == 0 || speaker_pool >= n_speakers,
          "simulation: speaker pool smaller than n_speakers");
}

nlohmann::json ToJson(const SimSpec& s) {
  return {{"n_speakers", s.n_speakers},
          {"beta", s.beta},
          {"min_utterances", s.min_utterances},
          {"max_utterances", s.max_utterances},
          {"utt_log_mean", s.utt_log_mean},
          {"utt_log_sigma", s.utt_log_sigma},
          {"utt_min", s.utt_min},
          {"utt_max", s.utt_max},
          {"overlap_target", s.overlap_target},
          {"duration_target", s.duration_target},
          {"seed", s.seed},
          {"emit", EmitName(s.emit)},
          {"feature_dim", s.feature_dim},
          {"signal_gain", s.signal_gain},
          {"jitter", s.jitter},
          {"noise_floor", s.noise_floor},
          {"shared_weight", s.shared_weight},
          {"speaker_dims", s.speaker_dims},
          {"speaker_pool", s.speaker_pool},
          {"pool_seed", s.pool_seed}};
}

SimSpec SimSpecFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("simulation spec must be a JSON object");
  SimSpec s;
  const auto known = ToJson(s);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw InvalidArgument("simulation spec: unknown key " + it.key());
  try {
    s.n_speakers = j.value("n_speakers", s.n_speakers);
    s.beta = j.value("beta", s.beta);
    s.min_utterances = j.value("min_utterances", s.min_utterances);
    s.max_utterances = j.value("max_utterances", s.max_utterances);
    s.utt_log_mean = j.value("utt_log_mean", s.utt_log_mean);
    s.utt_log_sigma = j.value("utt_log_sigma", s.utt_log_sigma);
    s.utt_min = j.value("utt_min", s.utt_min);
    s.utt_max = j.value("utt_max", s.utt_max);
    s.overlap_target = j.value("overlap_target", s.overlap_target);
    s.duration_target = j.value("duration_target", s.duration_target);
    s.seed = j.value("seed", s.seed);
    const std::string emit = j.value("emit", EmitName(s.emit));
    if (emit == "features")
      s.emit = EmitMode::kFeatures;
    else if (emit == "waveform")
      s.emit = EmitMode::kWaveform;
    else
      throw InvalidArgument("simulation spec: emit must be features or waveform");
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.signal_gain = j.value("signal_gain", s.signal_gain);
    s.jitter = j.value("jitter", s.jitter);
    s.noise_floor = j.value("noise_floor", s.noise_floor);
    s.shared_weight = j.value("shared_weight", s.shared_weight);
    s.speaker_dims = j.value("speaker_dims", s.speaker_dims);
    s.speaker_pool = j.value("speaker_pool", s.speaker_pool);
    s.pool_seed = j.value("pool_seed", s.pool_seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("simulation spec: ") + e.what());
  }
  s.Validate();
  return s;
}

std::vector<SyntheticSpeaker> SampleSpeakers(int n, int dim, double jitter, uint64_t seed,
                                             double shared_weight, int speaker_dims,
                                             uint64_t basis_seed) {
  Require(n >= 0 && dim >= 1, "simulation: bad speaker request");
  Require(shared_weight >= 0 && shared_weight < 1, "simulation: shared_weight must be in [0, 1)");
  Require(speaker_dims >= 0 && speaker_dims < dim, "simulation: speaker_dims must be below the feature dimension");
  const RowVectorD shared = RowVectorD::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  MatrixD basis;
  if (speaker_dims > 0) {
    Rng brng = StreamRng(basis_seed, kBasisStream);
    basis.resize(speaker_dims, dim);
    for (int k = 0; k < speaker_dims; ++k) basis.row(k) = GaussianRow(brng, dim);
  }
  Rng rng = StreamRng(seed, kSpeakerStream);
  std::uniform_real_distribution<double> unit;
  std::vector<SyntheticSpeaker> out;
  int tries = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++tries > 1000 * (n + 1))
      throw InvalidArgument("simulation: cannot place " + std::to_string(n) +
                            " speakers with cosine < 0.5 in " + std::to_string(dim) + " dimensions");
    SyntheticSpeaker s;
    RowVectorD own = speaker_dims > 0 ? RowVectorD(GaussianRow(rng, speaker_dims) * basis)
                                      : GaussianRow(rng, dim);
    own -= own.dot(shared) * shared;
    if (own.norm() < 1e-12) continue;
    own /= own.norm();
    s.signature = shared_weight * shared + std::sqrt(1.0 - shared_weight * shared_weight) * own;
    s.signature /= s.signature.norm();
    s.jitter = jitter;
    s.centre_hz = 300.0 * std::pow(10.0, unit(rng));  // 300 Hz to 3 kHz
    s.q = 2.0 + 4.0 * unit(rng);
    bool ok = true;
    for (const auto& o : out) ok = ok && s.signature.dot(o.signature) < 0.5;
    if (ok) out.push_back(s);
  }
  return out;
}

std::vector<std::vector<Segment>> SampleTimeline(const SimSpec& spec, double* duration) {
  spec.Validate();
  std::vector<std::vector<Segment>> turns(spec.n_speakers);
  double end = 0.0;
  for (int s = 0; s < spec.n_speakers; ++s) {
    Rng rng = StreamRng(spec.seed, static_cast<uint64_t>(s));
    std::exponential_distribution<double> exp1(1.0);
    std::uniform_int_distribution<int> count(spec.min_utterances, spec.max_utterances);
    const int n_utt = count(rng);
    double t = 0.0;
    for (int u = 0;; ++u) {
      if (spec.duration_target <= 0 && u >= n_utt) break;
      t += spec.beta * exp1(rng);
      const double len = TruncatedLogNormal(rng, spec.utt_log_mean, spec.utt_log_sigma,
                                            spec.utt_min, spec.utt_max);
      if (spec.duration_target > 0) {
        if (t >= spec.duration_target) break;
        turns[s].push_back({t, std::min(t + len, spec.duration_target)});
      } else {
        turns[s].push_back({t, t + len});
      }
      t += len;
    }
    if (!turns[s].empty()) end = std::max(end, turns[s].back().offset);
  }
  double d = spec.duration_target > 0 ? spec.duration_target : end;
  d = FramesFor(d) * kSplicedFramePeriod;
  if (duration) *duration = d;
  return turns;
}

Conversation SampleConversation(const SimSpec& spec) {
  Conversation c;
  c.turns = SampleTimeline(spec, &c.duration);
  c.n_speakers = spec.n_speakers;
  c.seed = spec.seed;
  c.beta = spec.beta;
  c.id = "conv";

  std::vector<SyntheticSpeaker> speakers;
  if (spec.speaker_pool > 0) {
    auto pool = SampleSpeakers(spec.speaker_pool, spec.feature_dim, spec.jitter, spec.pool_seed,
                               spec.shared_weight, spec.speaker_dims, spec.pool_seed);
    std::vector<int> idx(spec.speaker_pool);
    for (int i = 0; i < spec.speaker_pool; ++i) idx[i] = i;
    Rng rng = StreamRng(spec.seed, kPickStream);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int s = 0; s < spec.n_speakers; ++s) speakers.push_back(pool[idx[s]]);
  } else {
    speakers = SampleSpeakers(spec.n_speakers, spec.feature_dim, spec.jitter, spec.seed,
                              spec.shared_weight, spec.speaker_dims, spec.pool_seed);
  }

  if (spec.emit == EmitMode::kFeatures) {
    c.labels = TimelineLabels(c.turns, FramesFor(c.duration));
    c.feats = EmitFeatures(spec, speakers, c.labels);
  } else {
    c.feats = EmitWaveform(spec, speakers, c.turns, c.duration);
    c.labels = TimelineLabels(c.turns, static_cast<int>(c.feats.rows()));
  }
  return c;
}

std::vector<Conversation> SampleDataset(const SimSpec& base, int count,
                                        const std::string& id_prefix) {
  Require(count >= 0, "simulation: negative conversation count");
  std::vector<Conversation> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SimSpec s = base;
    s.seed = base.seed + static_cast<uint64_t>(i);
    out.push_back(SampleConversation(s));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05d", i);
    out.back().id = id_prefix + buf;
  }
  return out;
}

DatasetStats ComputeStats(const std::vector<RawLabels>& labels, double frame_period) {
  DatasetStats st;
  if (labels.empty()) throw InvalidArgument("dataset_stats: empty dataset");
  double speech = 0, overlap = 0, frames = 0;
  std::vector<double> spk_time, spk_count;
  for (const auto& l : labels) {
    frames += l.frames();
    for (int t = 0; t < l.frames(); ++t) {
      const double k = l.y.row(t).sum();
      if (k >= 1) ++speech;
      if (k >= 2) ++overlap;
    }
    if (static_cast<int>(spk_time.size()) < l.speakers()) {
      spk_time.resize(l.speakers(), 0.0);
      spk_count.resize(l.speakers(), 0.0);
    }
    for (int s = 0; s < l.speakers(); ++s) {
      spk_time[s] += l.y.col(s).sum() * frame_period;
      spk_count[s] += 1;
    }
  }
  st.overlap_defined = speech > 0;
  st.overlap_ratio = speech > 0 ? overlap / speech : 0.0;
  st.avg_duration = frames * frame_period / labels.size();
  st.silence_fraction = frames > 0 ? 1.0 - speech / frames : 0.0;
  for (size_t s = 0; s < spk_time.size(); ++s) st.speaking_time.push_back(spk_time[s] / spk_count[s]);
  return st;
}

DatasetStats ComputeStats(const std::vector<Conversation>& convs) {
  std::vector<RawLabels> labels;
  for (const auto& c : convs) labels.push_back(c.labels);
  return ComputeStats(labels, kSplicedFramePeriod);
}

SimSpec TuneBeta(const SimSpec& spec, int conversations, int iterations) {
  spec.Validate();
  Require(spec.overlap_target > 0, "simulation: TuneBeta needs overlap_target > 0");
  Require(conversations >= 1 && iterations >= 1, "simulation: bad tuning budget");
  auto overlap_at = [&](double beta) {
    std::vector<RawLabels> labels;
    for (int i = 0; i < conversations; ++i) {
      SimSpec s = spec;
      s.beta = beta;
      s.seed = spec.seed + kTuneOffset + static_cast<uint64_t>(i);
      double d = 0;
      const auto turns = SampleTimeline(s, &d);
      labels.push_back(TimelineLabels(turns, FramesFor(d)));
    }
    return ComputeStats(labels, kSplicedFramePeriod).overlap_ratio;
  };
  // Overlap falls as beta grows; bisect in log space.
  double lo = std::log(1e-3), hi = std::log(1e3);
  if (overlap_at(std::exp(lo)) < spec.overlap_target || overlap_at(std::exp(hi)) > spec.overlap_target)
    throw InvalidArgument("simulation: overlap_target " + std::to_string(spec.overlap_target) +
                          " is not reachable");
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (overlap_at(std::exp(mid)) > spec.overlap_target)
      lo = mid;
    else
      hi = mid;
  }
  SimSpec out = spec;
  out.beta = std::exp(0.5 * (lo + hi));
  return out;
}

void WriteDataset(const std::string& dir, const std::vector<Conversation>& convs) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  for (const auto& c : convs) {
    const std::string feat = c.id + ".feat", rttm = c.id + ".rttm";
    WriteFeatureFile((fs::path(dir) / feat).string(), c.feats);
    WriteRttm((fs::path(dir) / rttm).string(), FramesToTurns(c.labels, kSplicedFramePeriod, c.id));
    nlohmann::json j = {{"id", c.id},           {"features", feat},
                        {"rttm", rttm},         {"n_speakers", c.n_speakers},
                        {"seed", c.seed},       {"duration", c.duration}};
    manifest << j.dump() << "\n";
  }
  if (!manifest) throw IoError("manifest write failed in " + dir);
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.features = j.at("features").get<std::string>();
      e.rttm = j.value("rttm", std::string());
      e.n_speakers = j.value("n_speakers", 0);
      e.seed = j.value("seed", uint64_t{0});
      e.duration = j.value("duration", 0.0);
      out.push_back(e);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Conversation> LoadDataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<Conversation> out;
  for (const auto& e : ReadManifest(manifest_path)) {
    Conversation c;
    c.id = e.id;
    c.seed = e.seed;
    c.feats = ReadFeatureFile((base / e.features).string());
    c.duration = c.feats.rows() * kSplicedFramePeriod;
    if (!e.rttm.empty()) {
      std::vector<RttmTurn> turns;
      for (auto& t : ReadRttm((base / e.rttm).string()))
        if (t.file_id == e.id) turns.push_back(t);
      c.labels = TurnsToFrames(turns, kSplicedFramePeriod, static_cast<int>(c.feats.rows()));
    } else {
      c.labels.y = MatrixD::Zero(c.feats.rows(), 0);
    }
    c.n_speakers = e.n_speakers > 0 ? e.n_speakers : c.labels.speakers();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace lseend
