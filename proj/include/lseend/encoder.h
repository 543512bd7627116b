// lseend/encoder.h

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

// Causal Conformer embedding encoder. Each block is pre-norm:
//   x += Retention(LN(x)); x += ConvModule(LN(x)); x += FFN(LN(x))
// followed by a final layer norm, a symmetric look-ahead convolution along
// time and per-frame L2 normalization.

#ifndef LSEEND_ENCODER_H_
#define LSEEND_ENCODER_H_

#include <optional>
#include <string>
#include <vector>

#include "lseend/features.h"
#include "lseend/nn.h"
#include "lseend/retention.h"

namespace lseend {

struct EncoderConfig {
  int in_dim = kSplicedDim;
  int n_blocks = 4;
  int d_model = 256;
  int n_heads = 4;
  int ff_dim = 1024;
  int conv_kernel = 16;
  int conv_left_pad = 15;
  int lookahead_kernel = 19;
  int lookahead_pad = 9;

  int lookahead_frames() const { return lookahead_kernel - 1 - lookahead_pad; }
  void Validate() const;
};

template <typename T>
struct ConformerBlockWeights {
  LayerNormWeights<T> ret_ln;
  RetentionWeights<T> ret;
  LayerNormWeights<T> conv_ln;
  Linear<T> conv_pw1;        // D -> 2D, followed by GLU
  Matrix<T> conv_dw_w;       // [kernel x D], row j multiplies frame t-(kernel-1)+j
  RowVector<T> conv_dw_b;
  LayerNormWeights<T> conv_mid_ln;
  Linear<T> conv_pw2;        // D -> D
  LayerNormWeights<T> ff_ln;
  Linear<T> ff1, ff2;
};

template <typename T>
struct EncoderWeights {
  Linear<T> input;
  std::vector<ConformerBlockWeights<T>> blocks;
  LayerNormWeights<T> out_ln;
  // Look-ahead convolution, rows [tap * D + channel]; tap j reads frame
  // t - pad + j.
  Matrix<T> la_w;
  RowVector<T> la_b;

  static EncoderWeights FromTensors(const TensorMap& m, const EncoderConfig& cfg);
};

/// Appends the encoder's parameter names and shapes.
void EncoderParameterShapes(const EncoderConfig& cfg,
                            std::map<std::string, std::pair<int, int>>* shapes);

// Offline (whole-sequence) building blocks.
template <typename T>
Matrix<T> ConvModuleForward(const Matrix<T>& u, const ConformerBlockWeights<T>& w,
                            const EncoderConfig& cfg);

template <typename T>
Matrix<T> ConformerBlockForward(const Matrix<T>& x, const ConformerBlockWeights<T>& w,
                                const EncoderConfig& cfg, const RetentionConfig& rcfg);

template <typename T>
Matrix<T> LookaheadConv(const Matrix<T>& h, const Matrix<T>& w, const RowVector<T>& b,
                        int kernel, int pad);

/// Normalized features [T x in_dim] -> unit-norm embeddings [T x D].
template <typename T>
Matrix<T> Encode(const Matrix<T>& feats, const EncoderWeights<T>& w,
                 const EncoderConfig& cfg, const RetentionConfig& rcfg);

/// Per-block streaming memory: retention state plus the causal-conv history.
template <typename T>
struct ConformerBlockState {
  RetentionState<T> ret;
  Matrix<T> conv_hist;  // [kernel-1 x D] ring of GLU outputs
  int conv_pos = 0;

  ConformerBlockState() = default;
  ConformerBlockState(const EncoderConfig& cfg, const RetentionConfig& rcfg);
  void Reset();
};

template <typename T>
RowVector<T> ConformerBlockStep(const RowVector<T>& x, const ConformerBlockWeights<T>& w,
                                const EncoderConfig& cfg, ConformerBlockState<T>* state,
                                double gn_eps);

/// Frame-in, frame-out encoder. Push() takes raw spliced frames (it owns the
/// cumulative-mean normalizer) and yields the embedding of the frame
/// lookahead_frames() pushes back. Flush() drains the tail with zero padding
/// at the look-ahead input, matching the offline convolution padding.
template <typename T>
class EncoderStream {
 public:
  EncoderStream(const EncoderWeights<T>* weights, const EncoderConfig& cfg,
                const RetentionConfig& rcfg);

  std::optional<RowVector<T>> Push(const RowVector<T>& raw_frame);
  std::vector<RowVector<T>> Flush();
  void Reset();

  int64_t pushed() const { return pushed_; }
  int64_t emitted() const { return emitted_; }

 private:
  RowVector<T> EmitCentered();

  const EncoderWeights<T>* w_;
  EncoderConfig cfg_;
  RetentionConfig rcfg_;
  CmnState<T> cmn_;
  std::vector<ConformerBlockState<T>> blocks_;
  Matrix<T> la_window_;  // [kernel x D] ring of block outputs
  int la_pos_ = 0;
  int64_t pushed_ = 0;
  int64_t emitted_ = 0;
};

}  // namespace lseend

#endif  // LSEEND_ENCODER_H_
