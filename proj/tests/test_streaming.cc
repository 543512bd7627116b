// test_streaming.cc

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

#include <memory>
#include <random>

#include "doctest.h"
#include "lseend/streaming.h"
#include "model_fixtures.h"

namespace lseend {
namespace {

using testing::NoisyTensors;
using testing::RandomMatrix;
using testing::SmallConfig;

std::shared_ptr<const Model<double>> SmallModel(uint64_t seed = 21) {
  const ModelConfig c = SmallConfig();
  return std::make_shared<const Model<double>>(Model<double>::FromTensors(c, NoisyTensors(c, seed)));
}

// Posteriors that say exactly what the labels say, in appearance order.
MatrixD OraclePosteriors(const RawLabels& raw, int s) {
  const auto aug = AppearanceOrderPermute(raw, s);
  return 0.2 + 0.6 * aug.y.array();
}

TEST_SUITE("streaming") {

TEST_CASE("nine pushes of look-ahead, then one decision per push") {
  auto model = SmallModel();
  DiarizationStream<double> stream(model);
  CHECK(stream.emitted() == 0);
  std::mt19937_64 rng(1);
  const MatrixD x = RandomMatrix(30, model->cfg.encoder.in_dim, &rng);
  for (int t = 0; t < 30; ++t) {
    const auto d = stream.Push(x.row(t), t);
    if (t < 9) {
      CHECK_FALSE(d.has_value());
    } else {
      REQUIRE(d.has_value());
      CHECK(d->frame == t - 9);
    }
  }
  const auto tail = stream.Flush();
  REQUIRE(tail.size() == 9);
  CHECK(tail.front().frame == 21);
  CHECK(tail.back().frame == 29);
  CHECK(stream.Flush().empty());
  CHECK_THROWS_AS(stream.Push(x.row(0)), ProtocolError);
}

TEST_CASE("short stream is emitted entirely by flush") {
  auto model = SmallModel();
  DiarizationStream<double> stream(model);
  std::mt19937_64 rng(2);
  const MatrixD x = RandomMatrix(9, model->cfg.encoder.in_dim, &rng);
  for (int t = 0; t < 9; ++t) CHECK_FALSE(stream.Push(x.row(t)).has_value());
  CHECK(stream.Flush().size() == 9);
}

TEST_CASE("out-of-order pushes are rejected") {
  auto model = SmallModel();
  DiarizationStream<double> stream(model);
  const RowVectorD f = RowVectorD::Zero(model->cfg.encoder.in_dim);
  stream.Push(f, 0);
  CHECK_THROWS_AS(stream.Push(f, 2), ProtocolError);
  CHECK_THROWS_AS(stream.Push(f, 0), ProtocolError);
  CHECK_NOTHROW(stream.Push(f, 1));
}

TEST_CASE("streaming decisions equal the offline forward pass") {
  auto model = SmallModel(5);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const MatrixD x = RandomMatrix(60, model->cfg.encoder.in_dim, &rng);
    const MatrixD offline = model->Forward(x).probs;
    DiarizationStream<double> stream(model);
    std::vector<FrameDecision> got;
    for (int t = 0; t < x.rows(); ++t)
      if (auto d = stream.Push(x.row(t))) got.push_back(*d);
    for (auto& d : stream.Flush()) got.push_back(d);
    REQUIRE(got.size() == 60);
    double worst = 0;
    for (int t = 0; t < 60; ++t) worst = std::max(worst, (got[t].posteriors - offline.row(t)).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-9);
    CHECK((StreamPosteriors(*model, x) - offline).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("init is deterministic and checks capacity") {
  const ModelConfig c = SmallConfig();
  Checkpoint ck;
  ck.config = c;
  ck.params = NoisyTensors(c, 8);
  auto a = DiarizationStream<double>::FromCheckpoint(ck);
  auto b = DiarizationStream<double>::FromCheckpoint(ck);
  const RowVectorD f = RowVectorD::Ones(c.encoder.in_dim);
  for (int t = 0; t < 12; ++t) {
    const auto da = a.Push(f), db = b.Push(f);
    CHECK(da.has_value() == db.has_value());
    if (da) CHECK(da->posteriors == db->posteriors);
  }
  StreamOptions opts;
  opts.max_speakers = c.decoder.max_speakers - 1;
  CHECK_THROWS_AS(DiarizationStream<double>::FromCheckpoint(ck, opts), InvalidArgument);
  opts.max_speakers = c.decoder.max_speakers;
  CHECK_NOTHROW(DiarizationStream<double>::FromCheckpoint(ck, opts));
}

TEST_CASE("speaker counting on oracle posteriors") {
  std::mt19937_64 rng(4);
  for (int k = 0; k <= 3; ++k) {
    for (int trial = 0; trial < 10; ++trial) {
      RawLabels raw;
      raw.y = MatrixD::Zero(200, k);
      std::uniform_int_distribution<int> start(0, 150), len(10, 40);
      for (int s = 0; s < k; ++s) {
        const int a = start(rng), n = len(rng);
        raw.y.col(s).segment(a, std::min(n, 200 - a)).setOnes();
      }
      const auto d = DecideOffline(OraclePosteriors(raw, 3), StreamOptions{});
      int last = 0;
      for (const auto& f : d) {
        CHECK(f.count >= last);
        CHECK(f.count <= k);
        for (int s : f.active) CHECK((s >= 1 && s <= f.count));
        last = f.count;
      }
      CHECK(last == k);
    }
  }
}

TEST_CASE("leading-slot rule suppresses a slot behind a silent one") {
  MatrixD p = MatrixD::Constant(30, 5, 0.3);
  p.col(1).setConstant(0.7);   // slot 1 always on
  p.col(3).setConstant(0.7);   // slot 3 on, slot 2 never
  for (const auto& f : DecideOffline(p, StreamOptions{})) {
    CHECK(f.count <= 1);
    for (int s : f.active) CHECK(s == 1);
  }
  // Hysteresis: four frames are not enough to open a slot.
  MatrixD q = MatrixD::Constant(10, 5, 0.3);
  q.col(1).head(4).setConstant(0.7);
  CHECK(DecideOffline(q, StreamOptions{}).back().count == 0);
  q.col(1).head(5).setConstant(0.7);
  CHECK(DecideOffline(q, StreamOptions{}).back().count == 1);
}

TEST_CASE("median filter and rttm emission") {
  MatrixD blip = MatrixD::Zero(30, 1);
  blip(15, 0) = 1;
  CHECK(DecisionsToTurns(blip, 0.1, "f", 11).empty());
  const auto raw = DecisionsToTurns(blip, 0.1, "f", 1);
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].onset == doctest::Approx(1.5));
  CHECK(raw[0].duration == doctest::Approx(0.1));
  CHECK_THROWS_AS(DecisionsToTurns(blip, 0.1, "f", 4), InvalidArgument);

  // 20 frames, two speakers, window 3.
  MatrixD a = MatrixD::Zero(20, 2);
  for (int t : {1, 2, 3, 4, 5, 6, 8, 9, 10}) a(t, 0) = 1;   // gap at 7 is filled
  for (int t : {5, 6, 7, 8, 12, 16, 17, 18, 19}) a(t, 1) = 1;  // 12 is a blip
  const std::string golden =
      "SPEAKER rec 1 0.10 1.00 <NA> <NA> spk1 <NA> <NA>\n"
      "SPEAKER rec 1 0.50 0.40 <NA> <NA> spk2 <NA> <NA>\n"
      "SPEAKER rec 1 1.60 0.40 <NA> <NA> spk2 <NA> <NA>\n";
  CHECK(FormatRttm(DecisionsToTurns(a, 0.1, "rec", 3)) == golden);
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
