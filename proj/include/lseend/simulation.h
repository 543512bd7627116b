// lseend/simulation.h

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

// Synthetic multi-speaker conversations at the spliced-frame level.
//
// Each speaker alternates exponential silences (mean beta) and log-normal
// utterances; speakers are overlaid independently. A speaker is a unit
// signature vector in feature space. Active frames emit the normalized sum
// of the active signatures plus per-frame jitter; every frame carries a
// shared noise floor.

#ifndef LSEEND_SIMULATION_H_
#define LSEEND_SIMULATION_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lseend/common.h"
#include "lseend/features.h"
#include "lseend/labels.h"

namespace lseend {

enum class EmitMode { kFeatures, kWaveform };

struct SimSpec {
  int n_speakers = 2;
  double beta = 2.0;                 // mean silence gap, seconds
  int min_utterances = 5;            // per speaker, used when duration_target <= 0
  int max_utterances = 15;
  double utt_log_mean = 1.0;         // log-normal utterance length (log seconds)
  double utt_log_sigma = 0.8;
  double utt_min = 0.5;              // truncation, seconds
  double utt_max = 10.0;
  double overlap_target = 0.0;       // fraction; > 0 lets TuneBeta choose beta
  double duration_target = 0.0;      // seconds; > 0 crops or pads to this length
  uint64_t seed = 0;
  EmitMode emit = EmitMode::kFeatures;
  int feature_dim = kSplicedDim;
  double signal_gain = 1.0;
  double jitter = 0.6;               // per-frame speaker noise (vector norm)
  double noise_floor = 0.3;          // shared per-frame noise (vector norm)
  // Weight of the direction common to all speakers (uniform energy rise
  // across feature dimensions) inside each signature.
  double shared_weight = 0.4;
  // > 0: speaker-specific parts live in a fixed random subspace of this
  // dimension (drawn from pool_seed); 0 uses the whole feature space.
  int speaker_dims = 16;
  // > 0: speakers are drawn from a fixed pool generated from pool_seed.
  int speaker_pool = 0;
  uint64_t pool_seed = 1234;

  void Validate() const;
};

nlohmann::json ToJson(const SimSpec& s);
/// Unknown keys are rejected.
SimSpec SimSpecFromJson(const nlohmann::json& j);

struct SyntheticSpeaker {
  RowVectorD signature;  // unit norm
  double jitter = 0.0;
  // Waveform mode timbre: band-pass centre and quality.
  double centre_hz = 1000.0;
  double q = 2.0;
};

struct Conversation {
  std::string id;
  MatrixF feats;        // [T x feature_dim], raw (not mean-normalized)
  RawLabels labels;     // [T x n_speakers] at 0.1 s
  std::vector<std::vector<Segment>> turns;  // per speaker, seconds
  int n_speakers = 0;
  uint64_t seed = 0;
  double duration = 0.0;
  double beta = 0.0;
};

/// Unit signatures with pairwise cosine below 0.5 (rejection sampling).
std::vector<SyntheticSpeaker> SampleSpeakers(int n, int dim, double jitter, uint64_t seed,
                                             double shared_weight = 0.0, int speaker_dims = 0,
                                             uint64_t basis_seed = 0);

/// Per-speaker turn lists; deterministic in spec.seed.
std::vector<std::vector<Segment>> SampleTimeline(const SimSpec& spec, double* duration);

Conversation SampleConversation(const SimSpec& spec);

/// Conversation i of a dataset uses seed base.seed + i.
std::vector<Conversation> SampleDataset(const SimSpec& base, int count,
                                        const std::string& id_prefix = "conv");

struct DatasetStats {
  double overlap_ratio = 0.0;          // frames with >= 2 speakers / frames with >= 1
  bool overlap_defined = true;          // false when no frame has speech
  double avg_duration = 0.0;            // seconds
  double silence_fraction = 0.0;
  std::vector<double> speaking_time;    // per speaker index, mean seconds
};

DatasetStats ComputeStats(const std::vector<RawLabels>& labels, double frame_period);
DatasetStats ComputeStats(const std::vector<Conversation>& convs);

/// Bisection on beta so that the Monte-Carlo overlap ratio over
/// `conversations` timelines matches spec.overlap_target. Returns the spec
/// with beta set.
SimSpec TuneBeta(const SimSpec& spec, int conversations = 1000, int iterations = 30);

/// Writes <dir>/<id>.feat, <dir>/<id>.rttm and <dir>/manifest.jsonl.
void WriteDataset(const std::string& dir, const std::vector<Conversation>& convs);

struct ManifestEntry {
  std::string id;
  std::string features;
  std::string rttm;
  int n_speakers = 0;
  uint64_t seed = 0;
  double duration = 0.0;
};

std::vector<ManifestEntry> ReadManifest(const std::string& path);
/// Loads features and labels of every entry (paths relative to the manifest).
std::vector<Conversation> LoadDataset(const std::string& manifest_path);

}  // namespace lseend

#endif  // LSEEND_SIMULATION_H_
