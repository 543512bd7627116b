// lseend/evaluation.h

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

#ifndef LSEEND_EVALUATION_H_
#define LSEEND_EVALUATION_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "lseend/labels.h"
#include "lseend/model.h"
#include "lseend/simulation.h"
#include "lseend/streaming.h"

namespace lseend {

constexpr double kScoringStep = 0.01;

struct DerBreakdown {
  double miss = 0.0;           // seconds
  double false_alarm = 0.0;
  double confusion = 0.0;
  double total_speech = 0.0;
  double der = 0.0;            // fraction
  bool defined = true;         // false when the reference has no scored speech

  DerBreakdown& operator+=(const DerBreakdown& o);
};

nlohmann::json ToJson(const DerBreakdown& d);

/// Scoring grid for one file: frame i covers the 10 ms around its centre
/// (i + 0.5) * step. Mask is 0 inside the collar of a reference boundary.
struct ScoringGrid {
  RawLabels ref;
  RawLabels hyp;
  std::vector<int> scored;
};

ScoringGrid BuildGrid(const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp,
                      double collar, double step = kScoringStep);

/// map[h] = reference column matched to hypothesis column h, or -1.
/// Maximizes total overlap over scored frames.
std::vector<int> OptimalSpeakerMap(const ScoringGrid& grid);
/// Name-based wrapper: hypothesis speaker -> reference speaker ("" if none).
std::vector<std::pair<std::string, std::string>> OptimalSpeakerMap(
    const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp);

/// Frame-quantized, overlap-aware DER of one file.
DerBreakdown ScoreGrid(const ScoringGrid& grid, const std::vector<int>& map);
DerBreakdown Der(const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp,
                 double collar = 0.0, double step = kScoringStep);
/// Groups turns by file id and sums the per-file breakdowns.
DerBreakdown DerMultiFile(const std::vector<RttmTurn>& ref, const std::vector<RttmTurn>& hyp,
                          double collar = 0.0, double step = kScoringStep);

/// Speaker decisions [T x S] from posteriors [T x (S + 2)] and oracle speech
/// activity: silent frames lose every speaker; speech frames with no speaker
/// above threshold get the most probable speaker slot.
MatrixD OracleSadPostprocess(const MatrixD& posteriors, const std::vector<int>& oracle_sad,
                             double threshold = 0.5);

/// Turn-level form of the oracle speech activity rule for scoring an
/// existing hypothesis: hypothesis speech outside reference speech is
/// removed, and reference speech left without any hypothesis speaker takes
/// the speaker of the nearest hypothesis frame of the same file.
std::vector<RttmTurn> OracleSadTurns(const std::vector<RttmTurn>& ref,
                                     const std::vector<RttmTurn>& hyp, double step = kScoringStep);

struct DiarizeOptions {
  StreamOptions stream;
  int median_window = 11;
  double collar = 0.25;
  bool oracle_sad = false;
};

/// Offline inference through the recurrent path; returns hypothesis turns.
std::vector<RttmTurn> Diarize(const Model<double>& model, const MatrixF& feats,
                              const std::string& file_id, const DiarizeOptions& opts = {},
                              const RawLabels* oracle = nullptr);

/// DER of `model` over a labelled dataset.
DerBreakdown DatasetDer(const Model<double>& model, const std::vector<Conversation>& convs,
                        const DiarizeOptions& opts = {});

struct RtfPoint {
  double audio_seconds = 0.0;
  double wall_seconds = 0.0;
  double rtf = 0.0;
};

struct RtfReport {
  std::vector<RtfPoint> points;
  double flatness = 0.0;  // max rtf / min rtf; 0 when empty
};

nlohmann::json ToJson(const RtfReport& r);

/// Times DiarizationStream::Push over synthetic input of each length
/// (seconds, strictly increasing).
RtfReport BenchRtf(const Model<float>& model, const std::vector<double>& lengths, uint64_t seed = 7);

}  // namespace lseend

#endif  // LSEEND_EVALUATION_H_
