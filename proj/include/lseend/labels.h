// lseend/labels.h

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

#ifndef LSEEND_LABELS_H_
#define LSEEND_LABELS_H_

#include <string>
#include <vector>

#include "lseend/common.h"

namespace lseend {

/// Binary speaker activity, one column per speaker.
struct RawLabels {
  MatrixD y;                             // [T x n], entries 0 or 1
  std::vector<std::string> speaker_ids;  // size n (may be empty)

  int frames() const { return static_cast<int>(y.rows()); }
  int speakers() const { return static_cast<int>(y.cols()); }
};

/// Labels laid out like the decoder slots: column 0 is non-speech, columns
/// 1..n_actual the speakers in appearance order, column n_actual + 1 the
/// all-zero termination marker. Columns past it are zero and unscored.
struct AugmentedLabels {
  MatrixD y;                 // [T x (S + 2)]
  int n_actual = 0;
  std::vector<int> order;    // order[i] = raw column of speaker slot i + 1

  int frames() const { return static_cast<int>(y.rows()); }
  int slots() const { return static_cast<int>(y.cols()); }
  /// Number of scored slots: non-speech, speakers and the termination marker.
  int scored_slots() const { return n_actual + 2; }
};

/// Drops all-silent speakers, orders the rest by first active frame (ties
/// keep the raw column order) and adds the non-speech and termination rows.
/// Throws CapacityExceeded when more than `max_speakers` speakers are active.
AugmentedLabels AppearanceOrderPermute(const RawLabels& raw, int max_speakers);

/// Columns with at least one active frame.
int ActiveSpeakers(const RawLabels& labels);

struct Segment {
  double onset = 0.0;
  double offset = 0.0;
};

/// Maximal runs of ones as half-open [onset, offset) intervals in seconds.
std::vector<Segment> FramesToSegments(const std::vector<int>& row, double frame_period);

/// Frame t is 1 when its centre (t + 0.5) * period lies in some segment.
std::vector<int> SegmentsToFrames(const std::vector<Segment>& segments, int frames,
                                  double frame_period);

struct RttmTurn {
  std::string file_id;
  std::string speaker;
  double onset = 0.0;
  double duration = 0.0;
};

std::string FormatRttm(const std::vector<RttmTurn>& turns);
std::vector<RttmTurn> ParseRttm(const std::string& text);
std::vector<RttmTurn> ReadRttm(const std::string& path);
void WriteRttm(const std::string& path, const std::vector<RttmTurn>& turns);

/// Converts turns of one file into frame labels. Speakers are numbered in
/// order of first appearance in `turns`; `frames` < 0 sizes the matrix to
/// the last offset.
RawLabels TurnsToFrames(const std::vector<RttmTurn>& turns, double frame_period,
                        int frames = -1);

/// Converts frame labels back into turns, one speaker per column.
std::vector<RttmTurn> FramesToTurns(const RawLabels& labels, double frame_period,
                                    const std::string& file_id);

}  // namespace lseend

#endif  // LSEEND_LABELS_H_
