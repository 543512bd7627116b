// test_features.cc

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

#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "lseend/features.h"
#include "test_util.h"

namespace lseend {
namespace {

Waveform Sine(double hz, double seconds, double amp = 8000.0) {
  Waveform w;
  const int n = static_cast<int>(seconds * w.sample_rate);
  for (int i = 0; i < n; ++i)
    w.samples.push_back(static_cast<int16_t>(amp * std::sin(2 * M_PI * hz * i / w.sample_rate)));
  return w;
}

int PeakBin(const FeatureSequence& f) {
  RowVectorD mean = f.data.cast<double>().colwise().mean();
  int best = 0;
  mean.maxCoeff(&best);
  return best;
}

TEST_SUITE("features") {

TEST_CASE("silence hits the energy floor") {
  Waveform w;
  w.samples.assign(8000, 0);
  const FeatureSequence f = LogMel(w);
  CHECK(f.frames() == 100);
  CHECK(f.dim() == kLogMelBins);
  const double floor = std::log(1e-10);
  CHECK(std::abs(f.data.cast<double>().maxCoeff() - floor) < 1e-4);
  CHECK(std::abs(f.data.cast<double>().minCoeff() - floor) < 1e-4);
}

TEST_CASE("empty waveform and wrong rate") {
  Waveform w;
  CHECK(LogMel(w).frames() == 0);
  w.sample_rate = 16000;
  w.samples.assign(100, 0);
  CHECK_THROWS_AS(LogMel(w), InvalidArgument);
}

TEST_CASE("higher tone peaks in a higher mel bin") {
  const int lo = PeakBin(LogMel(Sine(440, 1.0)));
  const int hi = PeakBin(LogMel(Sine(880, 1.0)));
  CHECK(hi > lo);
  // The 440 Hz peak sits in the filter whose centre is nearest 440 Hz.
  LogMelOptions o;
  const double step = (HzToMel(o.high_hz) - HzToMel(o.low_hz)) / (o.n_mels + 1);
  int nearest = 0;
  double best = 1e9;
  for (int m = 0; m < o.n_mels; ++m) {
    const double c = MelToHz(HzToMel(o.low_hz) + (m + 1) * step);
    if (std::abs(c - 440) < best) {
      best = std::abs(c - 440);
      nearest = m;
    }
  }
  CHECK(std::abs(lo - nearest) <= 1);
}

TEST_CASE("splice and subsample shapes") {
  FeatureSequence raw;
  raw.frame_period = kRawFramePeriod;
  raw.data = MatrixF::Random(100, kLogMelBins);
  FeatureSequence s = SpliceSubsample(raw);
  CHECK(s.frames() == 10);
  CHECK(s.dim() == 345);
  raw.data = MatrixF::Random(95, kLogMelBins);
  CHECK(SpliceSubsample(raw).frames() == 10);
  raw.data = MatrixF::Random(1, kLogMelBins);
  s = SpliceSubsample(raw);
  REQUIRE(s.frames() == 1);
  for (int c = 0; c < 15; ++c)
    CHECK((s.data.row(0).segment(c * kLogMelBins, kLogMelBins) - raw.data.row(0)).norm() == 0.0f);
}

TEST_CASE("splice centres and look-ahead") {
  FeatureSequence raw;
  raw.frame_period = kRawFramePeriod;
  raw.data = MatrixF::Random(60, kLogMelBins);
  const FeatureSequence a = SpliceSubsample(raw);
  // Output k holds raw frames 10k-7 .. 10k+7.
  for (int j = -7; j <= 7; ++j)
    CHECK((a.data.row(2).segment((j + 7) * kLogMelBins, kLogMelBins) - raw.data.row(20 + j))
              .norm() == 0.0f);
  raw.data.row(28).setConstant(99.0f);
  const FeatureSequence b = SpliceSubsample(raw);
  CHECK((a.data.topRows(3) - b.data.topRows(3)).norm() == 0.0f);
}

TEST_CASE("cumulative mean normalization") {
  RowVectorD a(3), b(3);
  a << 1, 2, 3;
  b << 5, 0, -1;
  CmnState<double> st(3);
  CHECK(CmnStep<double>(a, &st).norm() == 0.0);
  CHECK((CmnStep<double>(b, &st) - (b - a) / 2).norm() < 1e-15);

  MatrixD c = MatrixD::Constant(5, 3, 2.5);
  CHECK(CumulativeMeanNormalize(c).norm() == 0.0);

  std::mt19937_64 rng(1);
  MatrixD x = testing::RandomMatrix(50, 4, &rng);
  MatrixD offline = CumulativeMeanNormalize(x);
  CmnState<double> s2(4);
  for (int t = 0; t < 50; ++t) CHECK((CmnStep<double>(x.row(t), &s2) - offline.row(t)).norm() == 0.0);
}

TEST_CASE("feature file round trip") {
  MatrixF m = MatrixF::Random(7, 5);
  const std::string bytes = EncodeFeatureFile(m);
  CHECK(bytes.size() == 16 + 7 * 5 * 4);
  CHECK(bytes.substr(0, 4) == "FEAT");
  CHECK((DecodeFeatureFile(bytes) - m).norm() == 0.0f);
  CHECK_THROWS(DecodeFeatureFile(bytes.substr(0, 20)));
  const std::string path = "features_roundtrip.feat";
  WriteFeatureFile(path, m);
  CHECK((ReadFeatureFile(path) - m).norm() == 0.0f);
  std::remove(path.c_str());
}

TEST_CASE("wav round trip") {
  Waveform w = Sine(300, 0.1);
  const std::string path = "roundtrip.wav";
  WriteWav(path, w);
  Waveform r = ReadWav(path);
  CHECK(r.sample_rate == 8000);
  CHECK(r.samples == w.samples);
  std::remove(path.c_str());
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
