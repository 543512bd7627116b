// lseend/train_graph.h

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

// The model forward pass expressed on the autograd tape. Numerically it
// follows Encode/Decode; retention runs in parallel form or chunk by chunk
// with the cross-chunk state carried on the tape.

#ifndef LSEEND_TRAIN_GRAPH_H_
#define LSEEND_TRAIN_GRAPH_H_

#include <map>
#include <string>

#include "lseend/autograd.h"
#include "lseend/labels.h"
#include "lseend/losses.h"
#include "lseend/model.h"

namespace lseend {

struct GraphOptions {
  bool chunkwise = false;
  int chunk_len = 500;     // frames per retention chunk
  // The carried state is detached every `detach_window` chunks; 0 never.
  int detach_window = 4;
};

using ParamVars = std::map<std::string, ad::Var>;

/// Adds every tensor as a trainable leaf.
ParamVars AddParameters(ad::Graph& g, const TensorMap& params);

struct GraphForward {
  ad::Var embeddings;  // [T x D]
  ad::Var attractors;  // [T * G x D]
  ad::Var probs;       // [T x G]
};

/// `feats` are already mean-normalized.
GraphForward BuildForward(ad::Graph& g, const ParamVars& p, const MatrixD& feats,
                          const ModelConfig& cfg, const GraphOptions& opts = {});

/// Multi-scale retention over `n_seq` equal-length sequences stacked in x.
ad::Var RetentionGraph(ad::Graph& g, ad::Var x, int n_seq, const ParamVars& p,
                       const std::string& prefix, const RetentionConfig& rcfg,
                       const GraphOptions& opts);

/// Scalar node holding TotalLoss; its backward feeds the analytic loss
/// gradients into `probs` and `embeddings`.
ad::Var LossNode(ad::Graph& g, ad::Var probs, ad::Var embeddings, const AugmentedLabels& y,
                 LossMode mode, LossReport* report, const PairLossOptions& opts = {});

}  // namespace lseend

#endif  // LSEEND_TRAIN_GRAPH_H_
