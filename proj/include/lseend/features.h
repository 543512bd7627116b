// lseend/features.h

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

#ifndef LSEEND_FEATURES_H_
#define LSEEND_FEATURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "lseend/common.h"

namespace lseend {

constexpr int kLogMelBins = 23;
constexpr int kSpliceContext = 7;  // raw frames on each side
constexpr int kSubsampling = 10;
constexpr int kSplicedDim = kLogMelBins * (2 * kSpliceContext + 1);  // 345
constexpr double kRawFramePeriod = 0.01;
constexpr double kSplicedFramePeriod = kRawFramePeriod * kSubsampling;

/// A [T x F] feature matrix plus its frame period in seconds.
struct FeatureSequence {
  MatrixF data;
  double frame_period = kSplicedFramePeriod;

  int frames() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }
};

struct Waveform {
  std::vector<int16_t> samples;
  int sample_rate = 8000;
};

// 25 ms Hann window, 10 ms hop, 23 HTK-mel triangles over 0-4 kHz.
struct LogMelOptions {
  int sample_rate = 8000;
  int window = 200;
  int hop = 80;
  int fft_size = 256;
  int n_mels = kLogMelBins;
  double low_hz = 0.0;
  double high_hz = 4000.0;
  double energy_floor = 1e-10;
};

double HzToMel(double hz);
double MelToHz(double mel);

/// Filterbank matrix [n_mels x (fft_size/2 + 1)].
MatrixD MelFilterbank(const LogMelOptions& opts);

/// Log-mel energies, one frame per hop: ceil(N / hop) frames, frame i centred
/// on sample i*hop + hop/2 with zero padding at both ends.
FeatureSequence LogMel(const Waveform& wav, const LogMelOptions& opts = {});

/// Splices +-7 raw frames around every 10th raw frame (edges replicated).
/// Output frame k is built around raw frame 10k; ceil(T_raw/10) frames.
FeatureSequence SpliceSubsample(const FeatureSequence& raw);

/// Running cumulative-mean normalizer. mu includes the current frame.
template <typename T>
struct CmnState {
  RowVector<T> mu;
  int64_t count = 0;

  CmnState() = default;
  explicit CmnState(int dim) : mu(RowVector<T>::Zero(dim)) {}
  void Reset() {
    mu.setZero();
    count = 0;
  }
};

template <typename T>
RowVector<T> CmnStep(const RowVector<T>& x, CmnState<T>* state);

/// Offline equivalent of running CmnStep over every row.
template <typename T>
Matrix<T> CumulativeMeanNormalize(const Matrix<T>& x);

// Feature file: "FEAT", u32 T, u32 F, u32 version, then little-endian f32
// row-major payload.
constexpr uint32_t kFeatureFileVersion = 1;
void WriteFeatureFile(const std::string& path, const MatrixF& m);
MatrixF ReadFeatureFile(const std::string& path);
std::string EncodeFeatureFile(const MatrixF& m);
MatrixF DecodeFeatureFile(const std::string& bytes);

/// Reads a 16-bit PCM mono RIFF/WAVE file.
Waveform ReadWav(const std::string& path);
void WriteWav(const std::string& path, const Waveform& wav);

}  // namespace lseend

#endif  // LSEEND_FEATURES_H_
