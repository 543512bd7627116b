// test_simulation.cc

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
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "lseend/simulation.h"

namespace lseend {
namespace {

SimSpec Short(int speakers, uint64_t seed) {
  SimSpec s;
  s.n_speakers = speakers;
  s.duration_target = 30.0;
  s.seed = seed;
  return s;
}

TEST_SUITE("simulation") {

TEST_CASE("fixed seed gives identical output") {
  for (EmitMode mode : {EmitMode::kFeatures, EmitMode::kWaveform}) {
    SimSpec s = Short(2, 42);
    s.emit = mode;
    s.duration_target = mode == EmitMode::kWaveform ? 8.0 : 30.0;
    const auto a = SampleConversation(s);
    const auto b = SampleConversation(s);
    REQUIRE(a.feats.rows() == b.feats.rows());
    CHECK(std::memcmp(a.feats.data(), b.feats.data(), sizeof(float) * a.feats.size()) == 0);
    CHECK(a.labels.y == b.labels.y);
    CHECK(a.feats.rows() == a.labels.frames());
    CHECK(a.feats.cols() == kSplicedDim);
    s.seed = 43;
    CHECK(SampleConversation(s).labels.y != a.labels.y);
  }
}

TEST_CASE("single speaker has no overlap") {
  std::vector<Conversation> convs;
  for (uint64_t seed = 0; seed < 10; ++seed) convs.push_back(SampleConversation(Short(1, seed)));
  const auto st = ComputeStats(convs);
  CHECK(st.overlap_defined);
  CHECK(st.overlap_ratio == 0.0);
  SimSpec bad = Short(1, 0);
  bad.overlap_target = 0.2;
  CHECK_THROWS_AS(SampleConversation(bad), InvalidArgument);
  CHECK_THROWS_AS(TuneBeta(bad), InvalidArgument);
}

TEST_CASE("stats on hand-built labels") {
  // 10 frames, 2 speakers: 6 speech frames of which 2 overlap.
  RawLabels l;
  l.y = MatrixD::Zero(10, 2);
  for (int t : {1, 2, 3, 4}) l.y(t, 0) = 1;
  for (int t : {3, 4, 5, 6}) l.y(t, 1) = 1;
  const auto st = ComputeStats({l}, 0.1);
  CHECK(st.overlap_ratio == doctest::Approx(1.0 / 3.0));
  CHECK(st.avg_duration == doctest::Approx(1.0));
  CHECK(st.silence_fraction == doctest::Approx(0.4));
  REQUIRE(st.speaking_time.size() == 2);
  CHECK(st.speaking_time[0] == doctest::Approx(0.4));

  RawLabels silent;
  silent.y = MatrixD::Zero(5, 2);
  const auto s2 = ComputeStats({silent}, 0.1);
  CHECK_FALSE(s2.overlap_defined);
  CHECK(s2.overlap_ratio == 0.0);
  CHECK_THROWS_AS(ComputeStats(std::vector<RawLabels>{}, 0.1), InvalidArgument);
}

TEST_CASE("tuned beta reaches the overlap target") {
  SimSpec s = Short(2, 1000);
  s.duration_target = 60.0;
  s.overlap_target = 0.2;
  const SimSpec tuned = TuneBeta(s);
  CHECK(tuned.beta > 0);
  std::vector<RawLabels> labels;
  for (const auto& c : SampleDataset(tuned, 50)) labels.push_back(c.labels);
  const double measured = ComputeStats(labels, kSplicedFramePeriod).overlap_ratio;
  CHECK(std::abs(measured - 0.2) / 0.2 < 0.1);
}

TEST_CASE("larger beta means more silence") {
  auto silence = [](double beta, uint64_t seed) {
    SimSpec s = Short(2, seed);
    s.beta = beta;
    double d = 0;
    const auto turns = SampleTimeline(s, &d);
    RawLabels l;
    l.y = MatrixD::Zero(static_cast<int>(std::lround(d / kSplicedFramePeriod)), 2);
    for (int k = 0; k < 2; ++k) {
      const auto row = SegmentsToFrames(turns[k], l.frames(), kSplicedFramePeriod);
      for (int t = 0; t < l.frames(); ++t) l.y(t, k) = row[t];
    }
    return ComputeStats({l}, kSplicedFramePeriod).silence_fraction;
  };
  for (auto [lo, hi] : std::vector<std::pair<double, double>>{{1.0, 2.0}, {2.0, 4.0}, {4.0, 8.0}}) {
    std::vector<double> diff;
    for (uint64_t seed = 0; seed < 100; ++seed) diff.push_back(silence(hi, seed) - silence(lo, seed));
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / diff.size();
    double var = 0;
    for (double d : diff) var += (d - mean) * (d - mean);
    const double se = std::sqrt(var / (diff.size() - 1) / diff.size());
    CHECK(mean > 1.96 * se);
  }
}

TEST_CASE("emission follows the labels") {
  SimSpec s = Short(3, 7);
  s.beta = 3.0;
  s.jitter = 0.0;
  s.noise_floor = 0.0;
  const auto c = SampleConversation(s);
  const auto spk = SampleSpeakers(3, s.feature_dim, 0.0, s.seed, s.shared_weight, s.speaker_dims,
                                  s.pool_seed);
  int silent = -1;
  for (int t = 0; t < c.labels.frames() && silent < 0; ++t)
    if (c.labels.y.row(t).sum() == 0) silent = t;
  REQUIRE(silent >= 0);
  const RowVectorD channel = c.feats.row(silent).cast<double>();
  int overlapped = 0;
  for (int t = 0; t < c.labels.frames(); ++t) {
    RowVectorD sum = RowVectorD::Zero(s.feature_dim);
    for (int k = 0; k < 3; ++k)
      if (c.labels.y(t, k) > 0) sum += spk[k].signature;
    overlapped += c.labels.y.row(t).sum() > 1;
    RowVectorD expect = channel;
    if (sum.norm() > 0) expect += sum / sum.norm();
    CHECK((c.feats.row(t).cast<double>() - expect).cwiseAbs().maxCoeff() < 1e-5);
  }
  CHECK(overlapped > 0);
}

TEST_CASE("speaker signatures are unit and well separated") {
  const auto spk = SampleSpeakers(8, kSplicedDim, 0.5, 3, 0.4, 16, 1234);
  for (size_t i = 0; i < spk.size(); ++i) {
    CHECK(spk[i].signature.norm() == doctest::Approx(1.0));
    for (size_t j = 0; j < i; ++j) CHECK(spk[i].signature.dot(spk[j].signature) < 0.5);
  }
  CHECK_THROWS_AS(SampleSpeakers(3, 2, 0.5, 3, 0.9, 1, 1), InvalidArgument);
}

TEST_CASE("speaker pool is shared across conversations") {
  SimSpec s = Short(2, 5);
  s.speaker_pool = 4;
  s.jitter = 0.0;
  s.noise_floor = 0.0;
  const auto pool = SampleSpeakers(4, s.feature_dim, 0.0, s.pool_seed, s.shared_weight,
                                   s.speaker_dims, s.pool_seed);
  const auto c = SampleConversation(s);
  int silent = -1, solo = -1;
  for (int t = 0; t < c.labels.frames(); ++t) {
    if (c.labels.y.row(t).sum() == 0 && silent < 0) silent = t;
    if (c.labels.y(t, 0) == 1 && c.labels.y(t, 1) == 0 && solo < 0) solo = t;
  }
  REQUIRE(silent >= 0);
  REQUIRE(solo >= 0);
  const RowVectorD sig = (c.feats.row(solo) - c.feats.row(silent)).cast<double>();
  double best = 0;
  for (const auto& p : pool) best = std::max(best, sig.dot(p.signature));
  CHECK(best == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("waveform mode is louder during speech") {
  SimSpec s = Short(2, 11);
  s.emit = EmitMode::kWaveform;
  s.duration_target = 12.0;
  s.beta = 3.0;
  const auto c = SampleConversation(s);
  double speech = 0, silence = 0;
  int ns = 0, nq = 0;
  for (int t = 0; t < c.labels.frames(); ++t) {
    const double energy = c.feats.row(t).cast<double>().mean();
    if (c.labels.y.row(t).sum() > 0) {
      speech += energy;
      ++ns;
    } else {
      silence += energy;
      ++nq;
    }
  }
  REQUIRE(ns > 0);
  REQUIRE(nq > 0);
  CHECK(speech / ns > silence / nq + 1.0);
}

TEST_CASE("spec json round trip and validation") {
  SimSpec s = Short(3, 9);
  s.emit = EmitMode::kWaveform;
  const SimSpec back = SimSpecFromJson(ToJson(s));
  CHECK(ToJson(back) == ToJson(s));
  auto j = ToJson(s);
  j["colour"] = 1;
  CHECK_THROWS_AS(SimSpecFromJson(j), InvalidArgument);
  j = ToJson(s);
  j["n_speakers"] = 0;
  CHECK_THROWS_AS(SimSpecFromJson(j), InvalidArgument);
}

TEST_CASE("dataset manifest round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "lseend_sim_test";
  fs::remove_all(dir);
  const auto convs = SampleDataset(Short(2, 77), 3, "rec");
  WriteDataset(dir.string(), convs);
  const auto entries = ReadManifest((dir / "manifest.jsonl").string());
  REQUIRE(entries.size() == 3);
  CHECK(entries[1].id == "rec00001");
  CHECK(entries[1].seed == 78);
  const auto back = LoadDataset((dir / "manifest.jsonl").string());
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].feats == convs[i].feats);
    CHECK(AppearanceOrderPermute(back[i].labels, 2).y == AppearanceOrderPermute(convs[i].labels, 2).y);
  }
  fs::remove_all(dir);
  CHECK_THROWS_AS(LoadDataset((dir / "manifest.jsonl").string()), IoError);
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
