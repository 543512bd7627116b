// labels.cc

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

#include "lseend/labels.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace lseend {

AugmentedLabels AppearanceOrderPermute(const RawLabels& raw, int max_speakers) {
  Require(max_speakers >= 1, "labels: max_speakers must be positive");
  const int n_frames = raw.frames();
  std::vector<std::pair<int, int>> first;  // (first active frame, column)
  for (int c = 0; c < raw.speakers(); ++c) {
    for (int t = 0; t < n_frames; ++t) {
      const double v = raw.y(t, c);
      Require(v == 0.0 || v == 1.0, "labels: entries must be 0 or 1");
    }
    for (int t = 0; t < n_frames; ++t) {
      if (raw.y(t, c) != 0.0) {
        first.emplace_back(t, c);
        break;
      }
    }
  }
  std::stable_sort(first.begin(), first.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const int n = static_cast<int>(first.size());
  if (n > max_speakers)
    throw CapacityExceeded("labels: " + std::to_string(n) + " active speakers exceed " +
                           std::to_string(max_speakers) + " slots");

  AugmentedLabels out;
  out.n_actual = n;
  out.y = MatrixD::Zero(n_frames, max_speakers + 2);
  for (int i = 0; i < n; ++i) {
    out.order.push_back(first[i].second);
    out.y.col(i + 1) = raw.y.col(first[i].second);
  }
  for (int t = 0; t < n_frames; ++t)
    out.y(t, 0) = out.y.row(t).segment(1, max_speakers).sum() > 0 ? 0.0 : 1.0;
  return out;
}

int ActiveSpeakers(const RawLabels& labels) {
  int n = 0;
  for (int c = 0; c < labels.speakers(); ++c) n += labels.y.col(c).sum() > 0;
  return n;
}

std::vector<Segment> FramesToSegments(const std::vector<int>& row, double frame_period) {
  std::vector<Segment> segs;
  const int n = static_cast<int>(row.size());
  int t = 0;
  while (t < n) {
    if (!row[t]) {
      ++t;
      continue;
    }
    int end = t;
    while (end < n && row[end]) ++end;
    segs.push_back({t * frame_period, end * frame_period});
    t = end;
  }
  return segs;
}

std::vector<int> SegmentsToFrames(const std::vector<Segment>& segments, int frames,
                                  double frame_period) {
  Require(frames >= 0 && frame_period > 0, "labels: bad frame grid");
  std::vector<int> row(frames, 0);
  for (const auto& s : segments) {
    // Centres (t + 0.5) p in [onset, offset)  <=>  t in [onset/p - 0.5, offset/p - 0.5).
    const int lo = std::max(0, static_cast<int>(std::ceil(s.onset / frame_period - 0.5 - 1e-9)));
    const int hi = std::min(frames, static_cast<int>(std::ceil(s.offset / frame_period - 0.5 - 1e-9)));
    for (int t = lo; t < hi; ++t) row[t] = 1;
  }
  return row;
}

std::string FormatRttm(const std::vector<RttmTurn>& turns) {
  std::string out;
  char buf[64];
  for (const auto& t : turns) {
    out += "SPEAKER " + t.file_id + " 1 ";
    std::snprintf(buf, sizeof(buf), "%.2f %.2f", t.onset, t.duration);
    out += buf;
    out += " <NA> <NA> " + t.speaker + " <NA> <NA>\n";
  }
  return out;
}

std::vector<RttmTurn> ParseRttm(const std::string& text) {
  std::vector<RttmTurn> turns;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string w; ls >> w;) f.push_back(w);
    if (f.empty() || f[0][0] == '#') continue;
    if (f[0] != "SPEAKER") continue;
    if (f.size() < 8)
      throw InvalidArgument("rttm line " + std::to_string(line_no) + ": too few fields");
    RttmTurn t;
    t.file_id = f[1];
    try {
      t.onset = std::stod(f[3]);
      t.duration = std::stod(f[4]);
    } catch (const std::exception&) {
      throw InvalidArgument("rttm line " + std::to_string(line_no) + ": bad time field");
    }
    if (t.onset < 0 || t.duration < 0)
      throw InvalidArgument("rttm line " + std::to_string(line_no) + ": negative time");
    t.speaker = f[7];
    turns.push_back(t);
  }
  return turns;
}

std::vector<RttmTurn> ReadRttm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRttm(ss.str());
}

void WriteRttm(const std::string& path, const std::vector<RttmTurn>& turns) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << FormatRttm(turns);
  if (!out) throw IoError("write failed for " + path);
}

RawLabels TurnsToFrames(const std::vector<RttmTurn>& turns, double frame_period, int frames) {
  Require(frame_period > 0, "labels: frame period must be positive");
  std::vector<std::string> ids;
  std::map<std::string, std::vector<Segment>> by_spk;
  double end = 0.0;
  for (const auto& t : turns) {
    if (!by_spk.count(t.speaker)) ids.push_back(t.speaker);
    by_spk[t.speaker].push_back({t.onset, t.onset + t.duration});
    end = std::max(end, t.onset + t.duration);
  }
  if (frames < 0) frames = static_cast<int>(std::ceil(end / frame_period - 1e-9));
  RawLabels out;
  out.speaker_ids = ids;
  out.y = MatrixD::Zero(frames, static_cast<int>(ids.size()));
  for (size_t c = 0; c < ids.size(); ++c) {
    const auto row = SegmentsToFrames(by_spk[ids[c]], frames, frame_period);
    for (int t = 0; t < frames; ++t) out.y(t, static_cast<int>(c)) = row[t];
  }
  return out;
}

std::vector<RttmTurn> FramesToTurns(const RawLabels& labels, double frame_period,
                                    const std::string& file_id) {
  std::vector<RttmTurn> turns;
  for (int c = 0; c < labels.speakers(); ++c) {
    std::vector<int> row(labels.frames());
    for (int t = 0; t < labels.frames(); ++t) row[t] = labels.y(t, c) > 0.5 ? 1 : 0;
    const std::string spk = c < static_cast<int>(labels.speaker_ids.size())
                                ? labels.speaker_ids[c]
                                : "spk" + std::to_string(c);
    for (const auto& s : FramesToSegments(row, frame_period))
      turns.push_back({file_id, spk, s.onset, s.offset - s.onset});
  }
  std::stable_sort(turns.begin(), turns.end(),
                   [](const RttmTurn& a, const RttmTurn& b) { return a.onset < b.onset; });
  return turns;
}

}  // namespace lseend
