// lseend/decoder.h

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

// Online attractor decoder.
//
// Tensors with a time axis and a slot axis are stored as [T * G x D]
// matrices, row t * G + s holding slot s of frame t (G = S + 2 slots:
// non-speech at 0, speakers 1..S, termination at S + 1).
//
// Each block is post-norm:
//   H = LN(H + TemporalRetention(H))     slots folded into the batch
//   H = LN(H + CrossAttractorAttn(H))    frames folded into the batch
//   H = LN(H + FFN(H))

#ifndef LSEEND_DECODER_H_
#define LSEEND_DECODER_H_

#include <map>
#include <string>
#include <vector>

#include "lseend/nn.h"
#include "lseend/retention.h"

namespace lseend {

struct DecoderConfig {
  int n_blocks = 2;
  int d_model = 256;
  int n_heads = 4;
  int ff_dim = 2048;
  int max_speakers = 4;

  int n_slots() const { return max_speakers + 2; }
  void Validate() const;
};

template <typename T>
struct DecoderBlockWeights {
  RetentionWeights<T> ret;
  LayerNormWeights<T> ret_ln;
  Linear<T> att_q, att_k, att_v, att_o;
  LayerNormWeights<T> att_ln;
  Linear<T> ff1, ff2;
  LayerNormWeights<T> ff_ln;
};

template <typename T>
struct DecoderWeights {
  Linear<T> input;  // [2D -> D] over [embedding ; speaker-index PE]
  std::vector<DecoderBlockWeights<T>> blocks;
  Matrix<T> pe;     // [G x D], fixed

  static DecoderWeights FromTensors(const TensorMap& m, const DecoderConfig& cfg);
};

void DecoderParameterShapes(const DecoderConfig& cfg,
                            std::map<std::string, std::pair<int, int>>* shapes);

/// Sinusoidal encoding of the slot index: PE(s, 2i) = sin(s / 10000^(2i/D)),
/// PE(s, 2i+1) = cos(s / 10000^(2i/D)). D must be even.
MatrixD SpeakerIndexPe(int n_slots, int dim);

template <typename T>
struct AttractorTensor {
  Matrix<T> a;  // [T * G x D]
  int n_slots = 0;

  int frames() const { return n_slots == 0 ? 0 : static_cast<int>(a.rows()) / n_slots; }
  auto at(int t, int s) const { return a.row(static_cast<Eigen::Index>(t) * n_slots + s); }
};

/// Repeats every embedding over the slots, appends the slot PE and applies
/// the shared input map. Returns [T * G x D].
template <typename T>
Matrix<T> BuildDecoderInput(const Matrix<T>& e, const DecoderWeights<T>& w, int n_slots);

/// Retention along time for every slot independently.
template <typename T>
Matrix<T> TemporalRetention(const Matrix<T>& h, int n_slots, const RetentionWeights<T>& w,
                            const RetentionConfig& rcfg);

/// Softmax multi-head self-attention across the slots of each frame.
/// `weights_out`, when given, receives the attention rows [T * heads * G x G].
template <typename T>
Matrix<T> CrossAttractorAttention(const Matrix<T>& h, int n_slots, int n_heads,
                                  const DecoderBlockWeights<T>& w,
                                  Matrix<T>* weights_out = nullptr);

template <typename T>
AttractorTensor<T> Decode(const Matrix<T>& e, const DecoderWeights<T>& w,
                          const DecoderConfig& cfg, const RetentionConfig& rcfg);

/// sigmoid(A_t^T e_t) for one frame: attractors [G x D], embedding [D].
template <typename T>
RowVector<T> ActivityProbs(const Matrix<T>& attractors, const RowVector<T>& e);

/// Frame-wise ActivityProbs over a whole sequence, [T x G].
template <typename T>
Matrix<T> ActivityProbsSequence(const AttractorTensor<T>& a, const Matrix<T>& e);

/// Decoder memory for one stream: one retention state per block and slot.
template <typename T>
class DecoderStream {
 public:
  DecoderStream(const DecoderWeights<T>* weights, const DecoderConfig& cfg,
                const RetentionConfig& rcfg);

  /// Consumes one embedding and returns that frame's attractors [G x D].
  Matrix<T> Step(const RowVector<T>& e);
  void Reset();
  int64_t steps() const { return steps_; }

 private:
  const DecoderWeights<T>* w_;
  DecoderConfig cfg_;
  RetentionConfig rcfg_;
  std::vector<std::vector<RetentionState<T>>> states_;  // [block][slot]
  int64_t steps_ = 0;
};

}  // namespace lseend

#endif  // LSEEND_DECODER_H_
