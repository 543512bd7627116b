// lseend/losses.h

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

#ifndef LSEEND_LOSSES_H_
#define LSEEND_LOSSES_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "lseend/common.h"
#include "lseend/labels.h"

namespace lseend {

constexpr double kProbClip = 1e-7;

/// Mean binary cross entropy over all frames and slots 0..n_actual+1.
/// `grad`, when given, receives dL/dy_hat (zero outside the scored slots
/// and where the clip is active).
double BceDiarizationLoss(const MatrixD& y_hat, const AugmentedLabels& y,
                          MatrixD* grad = nullptr);

struct PitResult {
  double loss = 0.0;
  /// perm[i] = output slot (1-based) that label speaker i + 1 is scored on.
  std::vector<int> perm;
};

/// Minimum BCE over the placements of the active speaker rows on slots
/// 1..n_actual. Exhaustive up to 8 speakers, assignment search beyond.
/// Ties keep the lexicographically first permutation, so identity wins.
PitResult PitDiarizationLoss(const MatrixD& y_hat, const AugmentedLabels& y,
                             MatrixD* grad = nullptr);

/// Labels with speaker row i + 1 moved to slot perm[i].
AugmentedLabels PermuteSpeakers(const AugmentedLabels& y, const std::vector<int>& perm);

struct PairLossOptions {
  int max_full_frames = 2000;       // all pairs up to this many frames
  int64_t sampled_pairs = 2000000;  // uniform pairs beyond it
  uint64_t seed = 0;
};

/// Mean over frame pairs of (cos(e_j, e_k) - cos(y_j, y_k))^2 with the
/// augmented label rows. Returns 0 and sets `degenerate` when T < 2.
double EmbeddingSimilarityLoss(const MatrixD& e, const AugmentedLabels& y,
                               MatrixD* grad = nullptr, bool* degenerate = nullptr,
                               const PairLossOptions& opts = {});

enum class LossMode { kBce, kPit };

struct LossReport {
  double l_d = 0.0;
  double l_e = 0.0;
  double total = 0.0;
  std::optional<std::vector<int>> permutation;
  bool embedding_degenerate = false;
};

LossReport TotalLoss(const MatrixD& y_hat, const MatrixD& e, const AugmentedLabels& y,
                     LossMode mode, MatrixD* grad_y_hat = nullptr, MatrixD* grad_e = nullptr,
                     const PairLossOptions& opts = {});

}  // namespace lseend

#endif  // LSEEND_LOSSES_H_
