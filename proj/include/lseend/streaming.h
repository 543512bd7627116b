// lseend/streaming.h

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

// Frame-in, decision-out runtime over the recurrent forms of the model.

#ifndef LSEEND_STREAMING_H_
#define LSEEND_STREAMING_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lseend/checkpoint.h"
#include "lseend/labels.h"
#include "lseend/model.h"

namespace lseend {

struct StreamOptions {
  double threshold = 0.5;
  int min_active_frames = 5;
  // When >= 0, must equal the checkpoint's speaker capacity.
  int max_speakers = -1;
};

struct FrameDecision {
  int64_t frame = 0;
  RowVectorD posteriors;       // [S + 2]
  std::vector<int> active;     // speaker slots, each in 1..count
  int count = 0;
};

/// Causal speaker counting by the leading-slot rule: the count is the
/// largest k such that every slot 1..k has exceeded the threshold on at
/// least min_active_frames frames so far.
class SpeakerCounter {
 public:
  SpeakerCounter(int max_speakers, double threshold, int min_active_frames);
  /// Consumes one posterior row [S + 2] and returns the updated count.
  int Push(const RowVectorD& posteriors);
  /// Speaker slots above threshold and within the current count.
  std::vector<int> Active(const RowVectorD& posteriors) const;
  int count() const { return count_; }

 private:
  int max_speakers_;
  double threshold_;
  int min_active_;
  std::vector<int64_t> hits_;
  int count_ = 0;
};

/// Runs the counter over a posterior matrix [T x (S + 2)].
std::vector<FrameDecision> DecideOffline(const MatrixD& posteriors, const StreamOptions& opts);

template <typename T>
class DiarizationStream {
 public:
  DiarizationStream(std::shared_ptr<const Model<T>> model, const StreamOptions& opts = {});
  static DiarizationStream FromCheckpoint(const Checkpoint& ck, const StreamOptions& opts = {});

  /// Raw spliced frame. Yields the decision for frame (pushed - 10) once
  /// nine frames of look-ahead are buffered. `index`, when given, must be
  /// the number of frames pushed so far.
  std::optional<FrameDecision> Push(const RowVector<T>& frame, int64_t index = -1);
  /// Emits the delayed tail; the stream is closed afterwards.
  std::vector<FrameDecision> Flush();

  int64_t pushed() const { return enc_.pushed(); }
  int64_t emitted() const { return emitted_; }
  const Model<T>& model() const { return *model_; }

 private:
  FrameDecision Decide(const RowVector<T>& e);

  std::shared_ptr<const Model<T>> model_;
  StreamOptions opts_;
  EncoderStream<T> enc_;
  DecoderStream<T> dec_;
  SpeakerCounter counter_;
  int64_t emitted_ = 0;
  bool closed_ = false;
};

/// Per-slot median filter (odd window, shrinking at the edges) over binary
/// decisions [T x S], then RTTM turns. Speaker k is named "spk<k>".
std::vector<RttmTurn> DecisionsToTurns(const MatrixD& active, double frame_period,
                                       const std::string& file_id, int median_window = 11);
/// Binary speaker-slot matrix [T x S] from decisions.
MatrixD DecisionMatrix(const std::vector<FrameDecision>& d, int max_speakers);
std::string EmitRttm(const std::vector<FrameDecision>& d, int max_speakers,
                     const std::string& file_id, int median_window = 11);

/// Offline convenience: posteriors of a full feature matrix through the
/// streaming path.
template <typename T>
MatrixD StreamPosteriors(const Model<T>& model, const Matrix<T>& feats);

}  // namespace lseend

#endif  // LSEEND_STREAMING_H_
