// evaluation.cc

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

#include "lseend/evaluation.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include "lseend/hungarian.h"

namespace lseend {

using Eigen::Index;

DerBreakdown& DerBreakdown::operator+=(const DerBreakdown& o) {
  miss += o.miss;
  false_alarm += o.false_alarm;
  confusion += o.confusion;
  total_speech += o.total_speech;
  defined = total_speech > 0;
  der = defined ? (miss + false_alarm + confusion) / total_speech : 0.0;
  return *this;
}

nlohmann::json ToJson(const DerBreakdown& d) {
  return {{"miss", d.miss},
          {"false_alarm", d.false_alarm},
          {"confusion", d.confusion},
          {"total_speech", d.total_speech},
          {"der", d.der},
          {"defined", d.defined}};
}

ScoringGrid BuildGrid(const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp,
                      double collar, double step) {
  Require(collar >= 0 && step > 0, "der: bad collar or step");
  double end = 0.0;
  for (const auto& t : ref) end = std::max(end, t.onset + t.duration);
  for (const auto& t : hyp) end = std::max(end, t.onset + t.duration);
  const int n = static_cast<int>(std::ceil(end / step - 1e-9));
  ScoringGrid g;
  g.ref = TurnsToFrames(ref, step, n);
  g.hyp = TurnsToFrames(hyp, step, n);
  g.scored.assign(n, 1);
  if (collar > 0) {
    for (const auto& t : ref) {
      for (double b : {t.onset, t.onset + t.duration}) {
        // Centres strictly within the collar of b.
        const int lo = std::max(0, static_cast<int>(std::floor((b - collar) / step - 0.5)) + 1);
        const int hi = std::min(n - 1, static_cast<int>(std::ceil((b + collar) / step - 0.5)) - 1);
        for (int i = lo; i <= hi; ++i) g.scored[i] = 0;
      }
    }
  }
  return g;
}

std::vector<int> OptimalSpeakerMap(const ScoringGrid& g) {
  const int nr = g.ref.speakers(), nh = g.hyp.speakers();
  std::vector<int> map(nh, -1);
  if (nr == 0 || nh == 0) return map;
  MatrixD overlap = MatrixD::Zero(nh, nr);
  for (int t = 0; t < g.ref.frames(); ++t) {
    if (!g.scored[t]) continue;
    for (int h = 0; h < nh; ++h) {
      if (g.hyp.y(t, h) == 0.0) continue;
      for (int r = 0; r < nr; ++r) overlap(h, r) += g.ref.y(t, r);
    }
  }
  const auto assign = SolveAssignment(-overlap);
  for (int h = 0; h < nh; ++h)
    if (assign[h] >= 0 && overlap(h, assign[h]) > 0) map[h] = assign[h];
  return map;
}

std::vector<std::pair<std::string, std::string>> OptimalSpeakerMap(
    const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp) {
  const auto g = BuildGrid(ref, hyp, 0.0);
  const auto map = OptimalSpeakerMap(g);
  std::vector<std::pair<std::string, std::string>> out;
  for (size_t h = 0; h < map.size(); ++h)
    out.emplace_back(g.hyp.speaker_ids[h], map[h] >= 0 ? g.ref.speaker_ids[map[h]] : "");
  return out;
}

DerBreakdown ScoreGrid(const ScoringGrid& g, const std::vector<int>& map) {
  DerBreakdown d;
  double miss = 0, fa = 0, conf = 0, speech = 0;
  for (int t = 0; t < g.ref.frames(); ++t) {
    if (!g.scored[t]) continue;
    const double n_ref = g.ref.speakers() ? g.ref.y.row(t).sum() : 0.0;
    const double n_hyp = g.hyp.speakers() ? g.hyp.y.row(t).sum() : 0.0;
    double correct = 0;
    for (size_t h = 0; h < map.size(); ++h)
      if (map[h] >= 0 && g.hyp.y(t, h) > 0 && g.ref.y(t, map[h]) > 0) ++correct;
    speech += n_ref;
    miss += std::max(0.0, n_ref - n_hyp);
    fa += std::max(0.0, n_hyp - n_ref);
    conf += std::min(n_ref, n_hyp) - correct;
  }
  d.miss = miss;
  d.false_alarm = fa;
  d.confusion = conf;
  d.total_speech = speech;
  d.defined = speech > 0;
  d.der = d.defined ? (miss + fa + conf) / speech : 0.0;
  return d;
}

DerBreakdown Der(const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp,
                 double collar, double step) {
  const auto g = BuildGrid(ref, hyp, collar, step);
  DerBreakdown d = ScoreGrid(g, OptimalSpeakerMap(g));
  d.miss *= step;
  d.false_alarm *= step;
  d.confusion *= step;
  d.total_speech *= step;
  return d;
}

DerBreakdown DerMultiFile(const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp,
                          double collar, double step) {
  std::map<std::string, std::pair<std::vector<RttmTurn>, std::vector<RttmTurn>>> files;
  for (const auto& t : ref) files[t.file_id].first.push_back(t);
  for (const auto& t : hyp) files[t.file_id].second.push_back(t);
  DerBreakdown total;
  total.defined = false;
  for (const auto& [id, rh] : files) total += Der(rh.first, rh.second, collar, step);
  return total;
}

MatrixD OracleSadPostprocess(const MatrixD& posteriors, const std::vector<int>& sad, double threshold) {
  Require(static_cast<Index>(sad.size()) == posteriors.rows(),
          "oracle sad: length " + std::to_string(sad.size()) + " does not match " +
              std::to_string(posteriors.rows()) + " frames");
  const int s = static_cast<int>(posteriors.cols()) - 2;
  Require(s >= 1, "oracle sad: no speaker slots");
  MatrixD out = MatrixD::Zero(posteriors.rows(), s);
  for (Index t = 0; t < posteriors.rows(); ++t) {
    if (!sad[t]) continue;
    bool any = false;
    for (int k = 0; k < s; ++k) {
      if (posteriors(t, k + 1) > threshold) {
        out(t, k) = 1.0;
        any = true;
      }
    }
    if (!any) {
      Index best;
      posteriors.row(t).segment(1, s).maxCoeff(&best);
      out(t, best) = 1.0;
    }
  }
  return out;
}

std::vector<RttmTurn> OracleSadTurns(const std::vector<RttmTurn>& ref,
                                     const std::vector<RttmTurn>& hyp, double step) {
  std::map<std::string, std::vector<RttmTurn>> ref_by, hyp_by;
  for (const auto& t : ref) ref_by[t.file_id].push_back(t);
  for (const auto& t : hyp) hyp_by[t.file_id].push_back(t);
  std::vector<RttmTurn> out;
  for (const auto& [file, rturns] : ref_by) {
    const auto& hturns = hyp_by[file];
    double end = 0;
    for (const auto& t : rturns) end = std::max(end, t.onset + t.duration);
    for (const auto& t : hturns) end = std::max(end, t.onset + t.duration);
    const int n = static_cast<int>(std::ceil(end / step - 1e-9));
    const RawLabels r = TurnsToFrames(rturns, step, n);
    RawLabels h = TurnsToFrames(hturns, step, n);
    if (h.speakers() == 0) {
      h.y = MatrixD::Zero(n, 1);
      h.speaker_ids = {"spk1"};
    }
    std::vector<int> speech(n), owner(n, -1);
    for (int t = 0; t < n; ++t) speech[t] = r.y.row(t).sum() > 0;
    // Nearest hypothesized frame, scanning both directions.
    std::vector<int> last(n, -1), next(n, -1);
    for (int t = 0, k = -1; t < n; ++t) {
      if (h.y.row(t).sum() > 0) k = t;
      last[t] = k;
    }
    for (int t = n - 1, k = -1; t >= 0; --t) {
      if (h.y.row(t).sum() > 0) k = t;
      next[t] = k;
    }
    MatrixD y = MatrixD::Zero(n, h.speakers());
    for (int t = 0; t < n; ++t) {
      if (!speech[t]) continue;
      if (h.y.row(t).sum() > 0) {
        y.row(t) = h.y.row(t);
        continue;
      }
      int src = -1;
      if (last[t] >= 0 && (next[t] < 0 || t - last[t] <= next[t] - t)) src = last[t];
      else if (next[t] >= 0) src = next[t];
      if (src < 0) {
        y(t, 0) = 1;
        continue;
      }
      Index best;
      h.y.row(src).maxCoeff(&best);
      y(t, best) = 1;
    }
    RawLabels fixed;
    fixed.y = y;
    fixed.speaker_ids = h.speaker_ids;
    for (auto& turn : FramesToTurns(fixed, step, file)) out.push_back(turn);
  }
  return out;
}

std::vector<RttmTurn> Diarize(const Model<double>& model, const MatrixF& feats,
                              const std::string& file_id, const DiarizeOptions& opts,
                              const RawLabels* oracle) {
  const MatrixD probs = model.Forward(feats.cast<double>()).probs;
  const int s = model.cfg.decoder.max_speakers;
  MatrixD active;
  if (opts.oracle_sad) {
    Require(oracle != nullptr, "diarize: oracle SAD needs reference labels");
    std::vector<int> sad(probs.rows(), 0);
    for (Index t = 0; t < probs.rows() && t < oracle->frames(); ++t)
      sad[t] = oracle->speakers() > 0 && oracle->y.row(t).sum() > 0;
    active = OracleSadPostprocess(probs, sad, opts.stream.threshold);
  } else {
    active = DecisionMatrix(DecideOffline(probs, opts.stream), s);
  }
  return DecisionsToTurns(active, kSplicedFramePeriod, file_id, opts.median_window);
}

DerBreakdown DatasetDer(const Model<double>& model, const std::vector<Conversation>& convs,
                        const DiarizeOptions& opts) {
  DerBreakdown total;
  total.defined = false;
  for (const auto& c : convs) {
    const auto ref = FramesToTurns(c.labels, kSplicedFramePeriod, c.id);
    const auto hyp = Diarize(model, c.feats, c.id, opts, &c.labels);
    total += Der(ref, hyp, opts.collar);
  }
  return total;
}

nlohmann::json ToJson(const RtfReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"audio_seconds", p.audio_seconds}, {"wall_seconds", p.wall_seconds}, {"rtf", p.rtf}});
  return {{"points", pts}, {"flatness", r.flatness}};
}

RtfReport BenchRtf(const Model<float>& model, const std::vector<double>& lengths, uint64_t seed) {
  RtfReport report;
  for (size_t i = 1; i < lengths.size(); ++i)
    Require(lengths[i] > lengths[i - 1], "bench: lengths must be strictly increasing");
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n01;
  const int dim = model.cfg.encoder.in_dim;
  MatrixF pool(997, dim);
  for (Index k = 0; k < pool.size(); ++k) pool.data()[k] = n01(rng);
  auto shared = std::shared_ptr<const Model<float>>(&model, [](const Model<float>*) {});
  {
    // Untimed pass so that caches and allocations settle before the first length.
    DiarizationStream<float> warm(shared);
    for (int t = 0; t < 300; ++t) warm.Push(pool.row(t));
    warm.Flush();
  }
  for (double len : lengths) {
    const int64_t frames = static_cast<int64_t>(std::llround(len / kSplicedFramePeriod));
    if (frames <= 0) continue;
    DiarizationStream<float> stream(shared);
    const auto t0 = std::chrono::steady_clock::now();
    for (int64_t t = 0; t < frames; ++t) stream.Push(pool.row(t % pool.rows()));
    stream.Flush();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.points.push_back({len, wall, wall / len});
  }
  if (!report.points.empty()) {
    double lo = report.points[0].rtf, hi = lo;
    for (const auto& p : report.points) {
      lo = std::min(lo, p.rtf);
      hi = std::max(hi, p.rtf);
    }
    report.flatness = lo > 0 ? hi / lo : 0.0;
  }
  return report;
}

}  // namespace lseend
