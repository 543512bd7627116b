// test_labels.cc

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
#include "lseend/hungarian.h"
#include "lseend/labels.h"

namespace lseend {
namespace {

RawLabels Make(const std::vector<std::vector<int>>& cols, int frames) {
  RawLabels r;
  r.y = MatrixD::Zero(frames, static_cast<int>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c)
    for (int t : cols[c]) r.y(t, static_cast<int>(c)) = 1.0;
  return r;
}

TEST_SUITE("labels") {

TEST_CASE("appearance order on the hand-worked fixture") {
  // B active on frames 3,4 and A on frames 2,3,4 (1-based), given as B, A.
  RawLabels raw = Make({{2, 3}, {1, 2, 3}}, 4);
  const auto out = AppearanceOrderPermute(raw, 3);
  CHECK(out.n_actual == 2);
  CHECK(out.order == std::vector<int>{1, 0});
  MatrixD expect(4, 5);
  expect << 1, 0, 0, 0, 0,
            0, 1, 0, 0, 0,
            0, 1, 1, 0, 0,
            0, 1, 1, 0, 0;
  CHECK(out.y == expect);
  CHECK(out.scored_slots() == 4);
}

TEST_CASE("silent input keeps only the non-speech row") {
  RawLabels raw = Make({{}, {}}, 5);
  const auto out = AppearanceOrderPermute(raw, 2);
  CHECK(out.n_actual == 0);
  CHECK(out.y.col(0).sum() == 5);
  CHECK(out.y.rightCols(3).sum() == 0);
  CHECK(out.scored_slots() == 2);  // non-speech and the terminator in slot 1
}

TEST_CASE("ordered input is a fixed point; ties keep column order") {
  RawLabels raw = Make({{0, 1}, {0, 3}, {2}}, 4);
  const auto out = AppearanceOrderPermute(raw, 4);
  CHECK(out.order == std::vector<int>{0, 1, 2});
  CHECK(out.y.block(0, 1, 4, 3) == raw.y);
}

TEST_CASE("silent speakers are dropped before the capacity check") {
  RawLabels raw = Make({{}, {3}, {}, {1}}, 5);
  const auto out = AppearanceOrderPermute(raw, 2);
  CHECK(out.n_actual == 2);
  CHECK(out.order == std::vector<int>{3, 1});
  CHECK_THROWS_AS(AppearanceOrderPermute(Make({{0}, {1}, {2}}, 3), 2), CapacityExceeded);
  CHECK_THROWS_AS(AppearanceOrderPermute(raw, 0), InvalidArgument);
}

TEST_CASE("non-speech row is the NOR of speaker rows; rows are preserved") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution on(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    RawLabels raw;
    raw.y = MatrixD::Zero(40, 4);
    for (int t = 0; t < 40; ++t)
      for (int c = 0; c < 4; ++c) raw.y(t, c) = on(rng);
    const auto out = AppearanceOrderPermute(raw, 4);
    for (int t = 0; t < 40; ++t)
      CHECK(out.y(t, 0) == (raw.y.row(t).sum() == 0 ? 1.0 : 0.0));
    for (int i = 0; i < out.n_actual; ++i) CHECK(out.y.col(i + 1) == raw.y.col(out.order[i]));
    CHECK(out.y.col(out.n_actual + 1).sum() == 0);
  }
}

TEST_CASE("frames to segments") {
  auto s = FramesToSegments({0, 1, 1, 0}, 0.1);
  REQUIRE(s.size() == 1);
  CHECK(s[0].onset == doctest::Approx(0.1));
  CHECK(s[0].offset == doctest::Approx(0.3));
  CHECK(FramesToSegments({0, 0, 0}, 0.1).empty());
  s = FramesToSegments({1, 0, 1}, 0.1);
  REQUIRE(s.size() == 2);
  CHECK(s[0].onset == doctest::Approx(0.0));
  CHECK(s[0].offset == doctest::Approx(0.1));
  CHECK(s[1].onset == doctest::Approx(0.2));
  CHECK(s[1].offset == doctest::Approx(0.3));
}

TEST_CASE("segments to frames inverts frames to segments") {
  for (const auto& row : std::vector<std::vector<int>>{{0, 1, 1, 0}, {0, 0, 0}, {1, 0, 1}}) {
    CHECK(SegmentsToFrames(FramesToSegments(row, 0.1), static_cast<int>(row.size()), 0.1) == row);
  }
  std::mt19937_64 rng(9);
  std::bernoulli_distribution on(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> row(37);
    for (auto& v : row) v = on(rng);
    CHECK(SegmentsToFrames(FramesToSegments(row, 0.01), 37, 0.01) == row);
  }
  // Frame-centre rule: [0.12, 0.26) covers centres 0.15 and 0.25.
  CHECK(SegmentsToFrames({{0.12, 0.26}}, 4, 0.1) == std::vector<int>{0, 1, 1, 0});
}

TEST_CASE("rttm format and parse") {
  std::vector<RttmTurn> turns = {{"rec1", "A", 0.5, 1.25}, {"rec1", "B", 2.0, 0.1}};
  const std::string text = FormatRttm(turns);
  CHECK(text ==
        "SPEAKER rec1 1 0.50 1.25 <NA> <NA> A <NA> <NA>\n"
        "SPEAKER rec1 1 2.00 0.10 <NA> <NA> B <NA> <NA>\n");
  const auto back = ParseRttm(text + "# comment\n\n");
  REQUIRE(back.size() == 2);
  CHECK(back[1].speaker == "B");
  CHECK(back[0].onset == doctest::Approx(0.5));
  CHECK(back[0].duration == doctest::Approx(1.25));
  CHECK_THROWS_AS(ParseRttm("SPEAKER rec1 1 x 1 <NA> <NA> A <NA> <NA>\n"), InvalidArgument);
  CHECK_THROWS_AS(ParseRttm("SPEAKER rec1 1 0.5\n"), InvalidArgument);
}

TEST_CASE("turns and frames round trip") {
  RawLabels raw = Make({{1, 2, 3, 7}, {3, 4}}, 10);
  raw.speaker_ids = {"x", "y"};
  const auto turns = FramesToTurns(raw, 0.1, "f");
  const auto back = TurnsToFrames(turns, 0.1, 10);
  CHECK(back.y == raw.y);
  CHECK(back.speaker_ids == raw.speaker_ids);
}

}  // TEST_SUITE

TEST_SUITE("hungarian") {

double BruteForce(const MatrixD& cost) {
  std::vector<int> perm(cost.cols());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double c = 0;
    for (int r = 0; r < cost.rows(); ++r) c += cost(r, perm[r]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST_CASE("matches brute force on random square and wide matrices") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 1 + trial % 6;
    const int cols = rows + (trial % 3);
    MatrixD c(rows, cols);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    const auto a = SolveAssignment(c);
    double got = 0;
    std::vector<int> used;
    for (int r = 0; r < rows; ++r) {
      REQUIRE(a[r] >= 0);
      got += c(r, a[r]);
      used.push_back(a[r]);
    }
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    CHECK(got == doctest::Approx(BruteForce(c)).epsilon(1e-12));
  }
}

TEST_CASE("tall matrices leave rows unassigned") {
  MatrixD c(3, 2);
  c << 1, 9,
       9, 1,
       5, 5;
  const auto a = SolveAssignment(c);
  CHECK(a == std::vector<int>{0, 1, -1});
  CHECK(SolveAssignment(MatrixD(0, 3)).empty());
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
