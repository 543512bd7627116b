// test_evaluation.cc

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

#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lseend/evaluation.h"
#include "model_fixtures.h"

namespace lseend {
namespace {

RttmTurn Turn(const std::string& spk, double on, double off, const std::string& file = "f") {
  return {file, spk, on, off - on};
}

// Brute force over all injective maps, hypothesis -> reference or none.
double BestOverlap(const ScoringGrid& g, std::vector<int>* map, size_t h, std::vector<bool>* used) {
  const int nr = g.ref.speakers();
  if (h == map->size()) {
    double total = 0;
    for (size_t k = 0; k < map->size(); ++k) {
      if ((*map)[k] < 0) continue;
      for (int t = 0; t < g.hyp.frames(); ++t)
        if (g.scored[t]) total += g.hyp.y(t, k) * g.ref.y(t, (*map)[k]);
    }
    return total;
  }
  (*map)[h] = -1;
  double best = BestOverlap(g, map, h + 1, used);
  for (int r = 0; r < nr; ++r) {
    if ((*used)[r]) continue;
    (*used)[r] = true;
    (*map)[h] = r;
    best = std::max(best, BestOverlap(g, map, h + 1, used));
    (*used)[r] = false;
  }
  return best;
}

TEST_SUITE("evaluation") {

TEST_CASE("ten-frame golden cases") {
  SUBCASE("miss") {
    const auto d = Der({Turn("A", 0, 6)}, {Turn("x", 0, 4)}, 0.0, 1.0);
    CHECK(d.miss == 2);
    CHECK(d.false_alarm == 0);
    CHECK(d.confusion == 0);
    CHECK(d.total_speech == 6);
    CHECK(d.der == doctest::Approx(2.0 / 6));
  }
  SUBCASE("false alarm") {
    const auto d = Der({Turn("A", 0, 5)}, {Turn("x", 0, 5), Turn("y", 7, 9)}, 0.0, 1.0);
    CHECK(d.miss == 0);
    CHECK(d.false_alarm == 2);
    CHECK(d.confusion == 0);
    CHECK(d.der == doctest::Approx(0.4));
  }
  SUBCASE("confusion") {
    const auto d = Der({Turn("A", 0, 5), Turn("B", 5, 10)}, {Turn("x", 0, 7), Turn("y", 7, 10)}, 0.0, 1.0);
    CHECK(d.miss == 0);
    CHECK(d.false_alarm == 0);
    CHECK(d.confusion == 2);
    CHECK(d.der == doctest::Approx(0.2));
  }
  SUBCASE("overlap") {
    const auto d = Der({Turn("A", 0, 4), Turn("B", 2, 6)}, {Turn("x", 0, 6)}, 0.0, 1.0);
    CHECK(d.total_speech == 8);
    CHECK(d.miss == 2);
    CHECK(d.confusion == 2);
    CHECK(d.der == doctest::Approx(0.5));
  }
}

TEST_CASE("identity and the twenty percent miss example") {
  const std::vector<RttmTurn> ref = {Turn("A", 0, 10)};
  CHECK(Der(ref, ref).der == 0.0);
  CHECK(Der(ref, {Turn("A", 0, 8)}).der == doctest::Approx(0.2));
  const auto none = Der({}, {Turn("A", 0, 1)});
  CHECK_FALSE(none.defined);
}

TEST_CASE("crossed names and an extra hypothesis speaker") {
  const auto m = OptimalSpeakerMap({Turn("A", 0, 5), Turn("B", 5, 10)},
                                   {Turn("s2", 0, 5), Turn("s1", 5, 10), Turn("s3", 10, 12)});
  REQUIRE(m.size() == 3);
  for (const auto& [h, r] : m) {
    if (h == "s2") CHECK(r == "A");
    if (h == "s1") CHECK(r == "B");
    if (h == "s3") CHECK(r == "");
  }
}

TEST_CASE("mapping matches brute force") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 20);
  std::uniform_int_distribution<int> nspk(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RttmTurn> ref, hyp;
    const int nr = nspk(rng), nh = nspk(rng);
    for (int k = 0; k < nr * 3; ++k) {
      const double a = u(rng);
      ref.push_back(Turn("r" + std::to_string(k % nr), a, a + u(rng) / 4));
    }
    for (int k = 0; k < nh * 3; ++k) {
      const double a = u(rng);
      hyp.push_back(Turn("h" + std::to_string(k % nh), a, a + u(rng) / 4));
    }
    const auto g = BuildGrid(ref, hyp, 0.0, 0.1);
    const auto map = OptimalSpeakerMap(g);
    double got = 0;
    for (int h = 0; h < g.hyp.speakers(); ++h) {
      if (map[h] < 0) continue;
      for (int t = 0; t < g.hyp.frames(); ++t) got += g.hyp.y(t, h) * g.ref.y(t, map[h]);
    }
    std::vector<int> bm(g.hyp.speakers());
    std::vector<bool> used(g.ref.speakers(), false);
    CHECK(got == BestOverlap(g, &bm, 0, &used));
  }
}

TEST_CASE("collar and relabelling") {
  const std::vector<RttmTurn> ref = {Turn("A", 0, 10)};
  const std::vector<RttmTurn> hyp = {Turn("x", 0, 8)};
  const auto d = Der(ref, hyp, 0.25);
  CHECK(d.total_speech == doctest::Approx(9.5));
  CHECK(d.miss == doctest::Approx(1.75));

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 30);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RttmTurn> r, h, h2;
    for (int k = 0; k < 8; ++k) {
      const double a = u(rng);
      r.push_back(Turn(k % 2 ? "A" : "B", a, a + u(rng) / 5));
      const double b = u(rng);
      h.push_back(Turn(k % 3 ? "p" : "q", b, b + u(rng) / 5));
      h2.push_back(Turn(k % 3 ? "zz" : "aa", b, b + h.back().duration));
    }
    double last = 1e9;
    for (double collar : {0.0, 0.1, 0.25, 0.5}) {
      const auto dd = Der(r, h, collar);
      const double err = dd.miss + dd.false_alarm + dd.confusion;
      CHECK(err <= last + 1e-9);
      last = err;
    }
    CHECK(Der(r, h).der == Der(r, h2).der);
  }
}

TEST_CASE("multi-file scoring sums the breakdowns") {
  const std::vector<RttmTurn> ref = {Turn("A", 0, 10, "a"), Turn("A", 0, 10, "b")};
  const std::vector<RttmTurn> hyp = {Turn("x", 0, 8, "a"), Turn("x", 0, 10, "b")};
  const auto d = DerMultiFile(ref, hyp);
  CHECK(d.total_speech == doctest::Approx(20));
  CHECK(d.der == doctest::Approx(0.1));
}

TEST_CASE("oracle speech activity post-processing") {
  MatrixD p(4, 5);
  p << 0.9, 0.2, 0.1, 0.3, 0.0,
       0.1, 0.2, 0.4, 0.3, 0.0,   // speech, nothing above threshold
       0.1, 0.7, 0.8, 0.1, 0.0,
       0.1, 0.9, 0.1, 0.1, 0.0;   // confident, but oracle says silence
  const MatrixD a = OracleSadPostprocess(p, {1, 1, 1, 0});
  MatrixD want(4, 3);
  want << 0, 0, 1,
          0, 1, 0,
          1, 1, 0,
          0, 0, 0;
  CHECK(a == want);
  CHECK_THROWS_AS(OracleSadPostprocess(p, {1, 1, 1}), InvalidArgument);
}

TEST_CASE("bench input validation") {
  const ModelConfig c = testing::SmallConfig();
  const auto m = Model<float>::FromTensors(c, InitModelTensors(c, 3));
  CHECK(BenchRtf(m, {0.0}).points.empty());
  CHECK_THROWS_AS(BenchRtf(m, {2.0, 1.0}), InvalidArgument);
  const auto r = BenchRtf(m, {1.0, 2.0});
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[1].audio_seconds == doctest::Approx(2.0));
  CHECK(r.flatness >= 1.0);
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
