//
// Copyright 2026 The PCM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "pcm/experiments.h"
#include "pcm/report.h"

namespace pcm {
namespace {

namespace fs = std::filesystem;

ExperimentConfig TinyFixtureConfig() {
  ExperimentConfig c;
  c.corpus = "fixture";
  c.fixture.train_size = 48;
  c.fixture.test_size = 24;
  c.fixture.keywords_per_class = 8;
  c.fixture.filler_words = 30;
  c.n_per_class = 2;
  c.seeds = {0, 1};
  c.encoder = "random:layers=1,hidden=16,heads=2,ffn=32,max_pos=32,seed=2";
  c.max_len = 32;
  c.head.hidden = 8;
  c.encoder_lr = 1e-3;
  c.head_lr = 1e-2;
  c.epochs = 1;
  c.csr_init_epochs = 2;
  c.check_every = 2;
  c.eval_every = 4;
  c.top_j = 10;
  return c;
}

TEST_CASE("defaults follow the published settings") {
  const ExperimentConfig c;
  CHECK(c.gate.confid1 == 0.95);
  CHECK(c.gate.confid2 == 0.7);
  CHECK(c.gate.temperature == 0.5);
  CHECK(c.top_j == 75);
  CHECK(c.head.hidden == 128);
  CHECK(c.head.activation == "tanh");
  CHECK(c.encoder_lr == 5e-6);
  CHECK(c.head_lr == 5e-4);
  CHECK(c.max_len == 256);
  CHECK(c.lambda_u == 1.0);
}

TEST_CASE("method table") {
  CHECK(AllMethods().size() == 7);
  for (Method m : AllMethods()) CHECK(ParseMethod(MethodName(m)) == m);
  CHECK_THROWS_AS(ParseMethod("mixtext"), ConfigError);

  const MethodSpec bert = DescribeMethod(Method::kBertFt);
  CHECK_FALSE(bert.use_unlabeled);
  CHECK_FALSE(bert.layout.csr_slots);
  CHECK_FALSE(bert.layout.has_matching());
  const MethodSpec uda = DescribeMethod(Method::kUda);
  CHECK(uda.use_unlabeled);
  CHECK_FALSE(uda.layout.has_matching());
  const MethodSpec pcm = DescribeMethod(Method::kPcm);
  CHECK(pcm.layout.csr_slots);
  CHECK(pcm.layout.matching == MatchingHead::kCsrSlots);
  CHECK(pcm.csr_updates);
  CHECK_FALSE(DescribeMethod(Method::kPcmNoCsrUpdate).csr_updates);
  const MethodSpec matching = DescribeMethod(Method::kPcmMatchingOnly);
  CHECK_FALSE(matching.layout.semantic);
  CHECK(matching.predict_with == PredictionHead::kMatching);
  CHECK_FALSE(matching.conditions.semantic_confidence);
  const MethodSpec semantic = DescribeMethod(Method::kPcmSemanticOnly);
  CHECK_FALSE(semantic.layout.has_matching());
  const MethodSpec dcdl = DescribeMethod(Method::kUdaDcdl);
  CHECK_FALSE(dcdl.layout.csr_slots);
  CHECK(dcdl.layout.matching == MatchingHead::kPooled);
}

TEST_CASE("configuration JSON, hashes and diffs") {
  ExperimentConfig a = TinyFixtureConfig();
  const ExperimentConfig back = ExperimentConfig::FromJson(a.ToJson());
  CHECK(back.ToJson() == a.ToJson());
  CHECK(back.Hash() == a.Hash());

  const ExperimentConfig partial = ExperimentConfig::FromJson({{"top_j", 10}, {"gate", {{"confid1", 0.9}}}});
  CHECK(partial.top_j == 10);
  CHECK(partial.gate.confid1 == 0.9);
  CHECK(partial.gate.confid2 == 0.7);
  CHECK_THROWS_AS(ExperimentConfig::FromJson({{"topj", 10}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson({{"gate", {{"confid3", 0.5}}}}), ConfigError);

  ExperimentConfig b = a;
  b.method = Method::kUda;
  b.output_dir = "/elsewhere";
  CHECK(ConfigDiff(a, b) == std::vector<std::string>{"method"});
  CHECK(a.Hash() != b.Hash());
  CHECK(a.ParityHash() == b.ParityHash());
  b.encoder_lr = 1.0;
  CHECK(a.ParityHash() != b.ParityHash());
  CHECK(ConfigDiff(a, b) == std::vector<std::string>{"encoder_lr", "method"});
  b.gate.confid2 = 0.5;
  const auto diff = ConfigDiff(a, b);
  CHECK(std::find(diff.begin(), diff.end(), "gate.confid2") != diff.end());
}

TEST_CASE("validation rejects bad settings") {
  ExperimentConfig c = TinyFixtureConfig();
  c.gate.temperature = 0.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TinyFixtureConfig();
  c.seeds.clear();
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TinyFixtureConfig();
  c.corpus = "yahoo";
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

TEST_CASE("standard error of the mean") {
  const std::vector<double> v = {60.0, 65.0, 70.0};
  CHECK(std::abs(*StandardErrorOfMean(v) - 5.0 / std::sqrt(3.0)) < 1e-10);
  const std::vector<double> w = {1.0, 2.0, 4.0, 8.0};
  const double mean = 3.75;
  const double var = ((1 - mean) * (1 - mean) + (2 - mean) * (2 - mean) + (4 - mean) * (4 - mean) +
                      (8 - mean) * (8 - mean)) / 3.0;
  CHECK(std::abs(*StandardErrorOfMean(w) - std::sqrt(var / 4.0)) < 1e-10);
  CHECK_FALSE(StandardErrorOfMean(std::vector<double>{1.0}));
  CHECK(Mean(w) == mean);
}

TEST_CASE("training config mirrors the method") {
  ExperimentConfig c = TinyFixtureConfig();
  c.method = Method::kPcmMatchingOnly;
  const TrainConfig t = c.ToTrainConfig(4);
  CHECK(t.seed == 4);
  CHECK(t.predict_with == PredictionHead::kMatching);
  CHECK(t.mining.top_j == 10);
  c.corpus = "imdb";
  CHECK(c.ToTrainConfig(0).side == TruncationSide::kTrailing);
}

TEST_CASE("runs write their artifacts and are reproducible") {
  const fs::path out = fs::temp_directory_path() / "pcm_run_test";
  fs::remove_all(out);
  ExperimentConfig c = TinyFixtureConfig();
  c.output_dir = out.string();
  const ExperimentData data = LoadExperimentData(c);
  const RunResult r = RunMethod(c, data);
  CHECK_FALSE(r.incomplete);
  REQUIRE(r.seeds.size() == 2);
  CHECK(r.sem.has_value());
  CHECK(r.config_hash == c.Hash());
  const fs::path dir = out / "pcm_n2_pool0";
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "result.json"));
  CHECK(fs::exists(dir / "seed_0" / "manifest.json"));
  CHECK(fs::exists(dir / "seed_0" / "log.jsonl"));
  CHECK(fs::exists(dir / "seed_0" / "csr_v0.json"));

  std::ifstream in(dir / "result.json");
  const RunResult loaded = RunResult::FromJson(nlohmann::json::parse(in));
  CHECK(loaded.ToJson() == r.ToJson());

  ExperimentConfig again = c;
  again.output_dir.clear();
  const RunResult r2 = RunMethod(again, data);
  for (std::size_t i = 0; i < r.seeds.size(); ++i) {
    CHECK(r2.seeds[i].accuracy == r.seeds[i].accuracy);
    CHECK(r2.seeds[i].best_accuracy == r.seeds[i].best_accuracy);
  }
  fs::remove_all(out);
}

TEST_CASE("baselines and ablations run on the tiny fixture") {
  ExperimentConfig c = TinyFixtureConfig();
  c.seeds = {0};
  const ExperimentData data = LoadExperimentData(c);
  for (Method m : {Method::kBertFt, Method::kUda, Method::kPcmNoCsrUpdate, Method::kPcmSemanticOnly,
                   Method::kPcmMatchingOnly, Method::kUdaDcdl}) {
    c.method = m;
    const RunResult r = RunMethod(c, data);
    CHECK_MESSAGE(!r.incomplete, MethodName(m));
    if (m == Method::kPcmNoCsrUpdate) CHECK(r.seeds[0].final_csr_version == 0);
    if (m == Method::kBertFt) CHECK(r.seeds[0].final_csr_version == -1);
    if (m == Method::kPcmMatchingOnly) CHECK(r.seeds[0].matching_accuracy >= 0.0);
  }
  c.method = Method::kPcm;
  CHECK(RunAblationDcdl(c, data).method == "uda-dcdl");
  const auto sweep = RunUnlabeledSweep(c, data, {10, 20});
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[0].pool_cap == 10);
  CHECK(sweep[1].pool_cap == 20);
}

TEST_CASE("too many labels per class is a configuration error") {
  ExperimentConfig c = TinyFixtureConfig();
  const ExperimentData data = LoadExperimentData(c);
  c.n_per_class = 100;
  CHECK_THROWS_AS(RunMethod(c, data), ConfigError);
}

TEST_CASE("result reports") {
  RunResult a;
  a.method = "pcm";
  a.n_per_class = 3;
  a.mean = 63.5234;
  a.sem = 1.029;
  a.seeds.resize(3);
  RunResult b = a;
  b.method = "uda";
  b.n_per_class = 10;
  b.sem.reset();
  b.incomplete = true;
  CHECK(FormatCell(a) == "63.52±1.03");
  CHECK(FormatCell(b) == "63.52*");
  CHECK(FormatCell(std::nullopt) == "—");
  const std::string grid = RenderResultGrid({a, b});
  CHECK(grid.find("| pcm | 63.52±1.03 | — |") != std::string::npos);
  CHECK(grid.find("| uda | — | 63.52* |") != std::string::npos);

  a.pool_cap = 500;
  b.pool_cap = 1000;
  b.method = "pcm";
  const auto series = SweepSeries({a, b});
  REQUIRE(series.size() == 1);
  CHECK(series[0].points.size() == 2);
  const std::string svg = RenderLinePlotSvg("t", "x", "y", series);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);

  CsrSet before, after;
  ClassSemanticRepresentation c0;
  c0.words = {{"bush", 1.0, WordSource::kLabeled}, {"car", 0.5, WordSource::kLabeled}};
  before.classes = {c0};
  c0.words = {{"iraq", 1.0, WordSource::kUnlabeled}};
  after.classes = {c0};
  after.version = 4;
  const std::string table = RenderCsrBeforeAfter(before, after);
  CHECK(table.find("bush, car") != std::string::npos);
  CHECK(table.find("iraq") != std::string::npos);

  const fs::path dir = fs::temp_directory_path() / "pcm_report_test";
  fs::remove_all(dir);
  WriteReport(dir.string(), {a, b}, {{"toy", {before, after}}});
  CHECK(fs::exists(dir / "grid.md"));
  CHECK(fs::exists(dir / "sweep.svg"));
  CHECK(fs::exists(dir / "csr_toy.md"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace pcm
