// lseend/retention.h

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

#ifndef LSEEND_RETENTION_H_
#define LSEEND_RETENTION_H_

#include <cstdint>
#include <string>
#include <vector>

#include "lseend/common.h"

namespace lseend {

/// Scaling applied to the retention scores.
///
/// kNone computes the bare (QK^T . Gamma) V product. kNormalized divides the
/// scores by sqrt(d_head), normalizes each decay row by its sum and divides
/// each score row by max(1, |row sum|). Every factor is a positive per-row
/// scalar, so the head-wise group norm that follows undoes it up to epsilon.
enum class RetentionScaling { kNone, kNormalized };

enum class RetentionMode { kParallel, kRecurrent, kChunkwise };

/// Per-head decays 1 - 2^(-5-k), k = 0..n_heads-1.
std::vector<double> MultiscaleGammas(int n_heads);

/// gamma = 1 for every head (no decay).
std::vector<double> UnitGammas(int n_heads);

struct RetentionConfig {
  std::vector<double> gammas;  // one decay per head, each in (0, 1]
  RetentionScaling scaling = RetentionScaling::kNormalized;
  double group_norm_eps = 1e-5;

  int n_heads() const { return static_cast<int>(gammas.size()); }
  void Validate() const;
};

/// Weights of one multi-scale retention layer. Projections act on row
/// vectors: q = x * w_q.
template <typename T>
struct RetentionWeights {
  Matrix<T> w_q, w_k, w_v;  // [D x D]
  Matrix<T> w_out;          // [D x D]
  Matrix<T> gate_w;         // [D x D], swish gate on the layer input
  RowVector<T> gn_scale;    // [D], group norm per channel
  RowVector<T> gn_shift;    // [D]
  int n_heads = 1;
  // Rotary/xPos terms are not implemented; the flag only records that.
  bool use_rotary = false;

  int dim() const { return static_cast<int>(w_q.rows()); }
  int head_dim() const { return dim() / n_heads; }
  void Validate() const;
};

/// Recurrent memory of one retention layer for one stream.
///
/// Besides the Gram state s_h = sum gamma^(t-tau) k_tau^T v_tau, the
/// normalized scaling needs the decayed key sum and the decayed count, so
/// that the recurrent output equals the parallel one exactly. All members
/// have a size fixed at construction.
template <typename T>
struct RetentionState {
  std::vector<Matrix<T>> s;          // per head [d_head x d_head]
  std::vector<RowVector<T>> key_sum; // per head [d_head]
  std::vector<T> decay_sum;          // per head
  std::vector<double> gammas;
  RetentionScaling scaling = RetentionScaling::kNormalized;
  int64_t step = 0;

  RetentionState() = default;
  RetentionState(const RetentionConfig& cfg, int head_dim);
  void Reset();
  int head_dim() const { return s.empty() ? 0 : static_cast<int>(s[0].rows()); }
};

/// Cross-chunk memory for the chunkwise form. `r` is the state at the end of
/// the previous chunk (R_{i-1}); all chunks share `chunk_len` except a
/// shorter final one, after which the state is closed.
template <typename T>
struct ChunkState {
  std::vector<Matrix<T>> r;
  std::vector<RowVector<T>> key_sum;
  std::vector<T> decay_sum;
  std::vector<double> gammas;
  RetentionScaling scaling = RetentionScaling::kNormalized;
  int chunk_len = 0;
  int64_t chunk_index = 0;
  bool closed = false;

  ChunkState() = default;
  ChunkState(const RetentionConfig& cfg, int head_dim, int chunk_len);
  void Reset();
};

// Core retention on projected q, k, v [T x D] (heads are contiguous column
// blocks). Returns the concatenated head outputs before group norm.
template <typename T>
Matrix<T> RetentionCoreParallel(const Matrix<T>& q, const Matrix<T>& k,
                                const Matrix<T>& v, const RetentionConfig& cfg);

template <typename T>
RowVector<T> RetentionCoreStep(const RowVector<T>& q, const RowVector<T>& k,
                               const RowVector<T>& v, RetentionState<T>* state);

// Chunk positions are 0-based: zeta_m = gamma^(B-1-m) weights the chunk's own
// keys into R_i and xi_m = gamma^(m+1) decays R_{i-1} into row m.
template <typename T>
Matrix<T> RetentionCoreChunk(const Matrix<T>& q, const Matrix<T>& k,
                             const Matrix<T>& v, ChunkState<T>* state);

/// Per-frame group norm with one group per head.
template <typename T>
Matrix<T> GroupNormHeads(const Matrix<T>& x, int n_heads, const RowVector<T>& scale,
                         const RowVector<T>& shift, double eps);

/// Group norm, swish gate on the layer input, output projection.
template <typename T>
Matrix<T> RetentionOutput(const Matrix<T>& x, const Matrix<T>& heads,
                          const RetentionWeights<T>& w, double eps);

// Full layers.
template <typename T>
Matrix<T> RetentionParallel(const Matrix<T>& x, const RetentionWeights<T>& w,
                            const RetentionConfig& cfg);

template <typename T>
RowVector<T> RetentionRecurrentStep(const RowVector<T>& x, const RetentionWeights<T>& w,
                                    RetentionState<T>* state, double eps = 1e-5);

template <typename T>
Matrix<T> RetentionChunkwise(const Matrix<T>& x_chunk, const RetentionWeights<T>& w,
                             ChunkState<T>* state, double eps = 1e-5);

/// Dispatches on `mode`. Recurrent mode needs `rstate`, chunkwise needs
/// `cstate` (the input is split into chunks of cstate->chunk_len).
template <typename T>
Matrix<T> MsrLayerForward(const Matrix<T>& x, const RetentionWeights<T>& w,
                          const RetentionConfig& cfg, RetentionMode mode,
                          RetentionState<T>* rstate = nullptr,
                          ChunkState<T>* cstate = nullptr);

/// Reads "<prefix>.wq/.wk/.wv/.wo/.wg/.gn_g/.gn_b" out of a tensor map.
template <typename T>
RetentionWeights<T> TakeRetention(const TensorMap& m, const std::string& prefix, int dim,
                                  int n_heads);

}  // namespace lseend

#endif  // LSEEND_RETENTION_H_
