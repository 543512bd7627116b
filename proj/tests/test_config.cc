// test_config.cc

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

#include "doctest.h"
#include "lseend/config.h"

namespace lseend {
namespace {

TEST_SUITE("config") {

TEST_CASE("defaults validate and format round trips") {
  const RunConfig d = ParseRunConfig("");
  CHECK(d.model.encoder.d_model == 64);
  CHECK(d.Stages().size() == 4);
  const std::string text = FormatRunConfig(d);
  CHECK(FormatRunConfig(ParseRunConfig(text)) == text);
}

TEST_CASE("presets apply before the other keys of their section") {
  const RunConfig c = ParseRunConfig(
      "seed = 9\n"
      "[model]\n"
      "encoder.in_dim = 20\n"
      "preset = micro\n"
      "[simulation]\n"
      "feature_dim = 20\n"
      "jitter = 0.25  # inline comment\n"
      "[curriculum]\n"
      "mode = single\n"
      "single.speakers = 1,2\n"
      "single.optimizer = noam\n"
      "single.warmup = 50\n");
  CHECK(c.model.encoder.in_dim == 20);
  CHECK(c.model.encoder.d_model == ModelConfig::Micro().encoder.d_model);
  CHECK(c.simulation.jitter == 0.25);
  CHECK(c.training.seed == 9);
  const auto st = c.Stages();
  REQUIRE(st.size() == 1);
  CHECK(st[0].speakers == std::vector<int>{1, 2});
  CHECK(st[0].optimizer.kind == OptimizerKind::kNoam);
  CHECK(FormatRunConfig(ParseRunConfig(FormatRunConfig(c))) == FormatRunConfig(c));
}

TEST_CASE("errors name the line") {
  auto message = [](const std::string& text) {
    try {
      ParseRunConfig(text);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("[model]\nbogus = 1\n").find("line 2") != std::string::npos);
  CHECK(message("[nowhere]\n").find("unknown section") != std::string::npos);
  CHECK(message("seed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK(message("seed = x\n").find("line 1") != std::string::npos);
  CHECK(message("seed\n").find("key = value") != std::string::npos);
  CHECK(message("[curriculum]\nsingle.loss = mse\n").find("bce|pit") != std::string::npos);
  CHECK(message("[model]\npreset = huge\n").find("preset") != std::string::npos);
  // Cross-section checks.
  CHECK_FALSE(message("[simulation]\nfeature_dim = 20\n").empty());
  CHECK_FALSE(message("[model]\ndecoder.max_speakers = 2\n").empty());
}

}  // TEST_SUITE

}  // namespace
}  // namespace lseend
