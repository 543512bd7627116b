// streaming.cc

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

#include "lseend/streaming.h"

#include <algorithm>

namespace lseend {

using Eigen::Index;

SpeakerCounter::SpeakerCounter(int max_speakers, double threshold, int min_active_frames)
    : max_speakers_(max_speakers),
      threshold_(threshold),
      min_active_(min_active_frames),
      hits_(max_speakers + 1, 0) {
  Require(max_speakers >= 0, "counter: negative capacity");
  Require(min_active_frames >= 1, "counter: min_active_frames must be >= 1");
}

int SpeakerCounter::Push(const RowVectorD& p) {
  Require(p.size() == max_speakers_ + 2, "counter: posterior width mismatch");
  for (int s = 1; s <= max_speakers_; ++s)
    if (p(s) > threshold_) ++hits_[s];
  while (count_ < max_speakers_ && hits_[count_ + 1] >= min_active_) ++count_;
  return count_;
}

std::vector<int> SpeakerCounter::Active(const RowVectorD& p) const {
  std::vector<int> out;
  for (int s = 1; s <= count_; ++s)
    if (p(s) > threshold_) out.push_back(s);
  return out;
}

std::vector<FrameDecision> DecideOffline(const MatrixD& posteriors, const StreamOptions& opts) {
  const int s = static_cast<int>(posteriors.cols()) - 2;
  Require(s >= 0, "decisions: posteriors need at least two columns");
  SpeakerCounter counter(s, opts.threshold, opts.min_active_frames);
  std::vector<FrameDecision> out;
  out.reserve(posteriors.rows());
  for (Index t = 0; t < posteriors.rows(); ++t) {
    FrameDecision d;
    d.frame = t;
    d.posteriors = posteriors.row(t);
    d.count = counter.Push(d.posteriors);
    d.active = counter.Active(d.posteriors);
    out.push_back(std::move(d));
  }
  return out;
}

template <typename T>
DiarizationStream<T>::DiarizationStream(std::shared_ptr<const Model<T>> model,
                                        const StreamOptions& opts)
    : model_(std::move(model)),
      opts_(opts),
      enc_(&model_->enc, model_->cfg.encoder, model_->cfg.encoder_retention()),
      dec_(&model_->dec, model_->cfg.decoder, model_->cfg.decoder_retention()),
      counter_(model_->cfg.decoder.max_speakers, opts.threshold, opts.min_active_frames) {
  if (opts.max_speakers >= 0 && opts.max_speakers != model_->cfg.decoder.max_speakers)
    throw InvalidArgument("stream: requested " + std::to_string(opts.max_speakers) +
                          " speakers but the checkpoint has " +
                          std::to_string(model_->cfg.decoder.max_speakers));
}

template <typename T>
DiarizationStream<T> DiarizationStream<T>::FromCheckpoint(const Checkpoint& ck,
                                                          const StreamOptions& opts) {
  auto model = std::make_shared<const Model<T>>(Model<T>::FromTensors(ck.config, ck.params));
  return DiarizationStream(std::move(model), opts);
}

template <typename T>
FrameDecision DiarizationStream<T>::Decide(const RowVector<T>& e) {
  const Matrix<T> a = dec_.Step(e);
  FrameDecision d;
  d.frame = emitted_++;
  d.posteriors = ActivityProbs<T>(a, e).template cast<double>();
  d.count = counter_.Push(d.posteriors);
  d.active = counter_.Active(d.posteriors);
  return d;
}

template <typename T>
std::optional<FrameDecision> DiarizationStream<T>::Push(const RowVector<T>& frame, int64_t index) {
  if (closed_) throw ProtocolError("stream: push after flush");
  if (index >= 0 && index != enc_.pushed())
    throw ProtocolError("stream: expected frame " + std::to_string(enc_.pushed()) + ", got " +
                        std::to_string(index));
  auto e = enc_.Push(frame);
  if (!e) return std::nullopt;
  return Decide(*e);
}

template <typename T>
std::vector<FrameDecision> DiarizationStream<T>::Flush() {
  std::vector<FrameDecision> out;
  if (closed_) return out;
  closed_ = true;
  for (const auto& e : enc_.Flush()) out.push_back(Decide(e));
  return out;
}

template class DiarizationStream<float>;
template class DiarizationStream<double>;

MatrixD DecisionMatrix(const std::vector<FrameDecision>& d, int max_speakers) {
  MatrixD m = MatrixD::Zero(static_cast<Index>(d.size()), max_speakers);
  for (size_t t = 0; t < d.size(); ++t)
    for (int s : d[t].active)
      if (s >= 1 && s <= max_speakers) m(static_cast<Index>(t), s - 1) = 1.0;
  return m;
}

std::vector<RttmTurn> DecisionsToTurns(const MatrixD& active, double frame_period,
                                       const std::string& file_id, int median_window) {
  Require(median_window >= 1 && median_window % 2 == 1, "rttm: median window must be odd");
  const int n = static_cast<int>(active.rows());
  const int half = median_window / 2;
  RawLabels smoothed;
  smoothed.y = MatrixD::Zero(n, active.cols());
  for (Index s = 0; s < active.cols(); ++s) {
    smoothed.speaker_ids.push_back("spk" + std::to_string(s + 1));
    for (int t = 0; t < n; ++t) {
      const int lo = std::max(0, t - half), hi = std::min(n - 1, t + half);
      int ones = 0;
      for (int u = lo; u <= hi; ++u) ones += active(u, s) > 0.5;
      smoothed.y(t, s) = 2 * ones > hi - lo + 1 ? 1.0 : 0.0;
    }
  }
  return FramesToTurns(smoothed, frame_period, file_id);
}

std::string EmitRttm(const std::vector<FrameDecision>& d, int max_speakers,
                     const std::string& file_id, int median_window) {
  return FormatRttm(DecisionsToTurns(DecisionMatrix(d, max_speakers), kSplicedFramePeriod,
                                     file_id, median_window));
}

template <typename T>
MatrixD StreamPosteriors(const Model<T>& model, const Matrix<T>& feats) {
  EncoderStream<T> enc(&model.enc, model.cfg.encoder, model.cfg.encoder_retention());
  DecoderStream<T> dec(&model.dec, model.cfg.decoder, model.cfg.decoder_retention());
  MatrixD out(feats.rows(), model.cfg.n_slots());
  Index t = 0;
  auto step = [&](const RowVector<T>& e) {
    out.row(t++) = ActivityProbs<T>(dec.Step(e), e).template cast<double>();
  };
  for (Index i = 0; i < feats.rows(); ++i)
    if (auto e = enc.Push(feats.row(i))) step(*e);
  for (const auto& e : enc.Flush()) step(e);
  return out;
}

template MatrixD StreamPosteriors<float>(const Model<float>&, const Matrix<float>&);
template MatrixD StreamPosteriors<double>(const Model<double>&, const Matrix<double>&);

}  // namespace lseend
