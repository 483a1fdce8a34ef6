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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "pcm/ssl_training.h"
#include "test_support.h"

namespace pcm {
namespace {

using testing::Row;

DualHeadOutputs FromProbs(const std::vector<Row>& semantic, const std::vector<Row>& matching) {
  const ag::Mat s = testing::SemanticLogitsFor(semantic);
  const ag::Mat m = testing::MatchingLogitsFor(matching);
  return DualHeadOutputs::FromLogits(&s, &m);
}

PseudoTarget Target(const Row& sharpened, int label) {
  PseudoTarget t;
  t.passed = true;
  t.hard_label = label;
  t.sharpened = Eigen::Map<const Eigen::VectorXd>(sharpened.data(), static_cast<Eigen::Index>(sharpened.size()));
  return t;
}

TEST_CASE("labeled loss on the worked examples") {
  const LossTerms a = LabeledLoss(FromProbs({{0.2, 0.7, 0.1}}, {{0.1, 0.8, 0.2}}), std::vector<int>{1});
  CHECK(a.semantic == doctest::Approx(0.3567).epsilon(1e-4));
  CHECK(a.matching == doctest::Approx(0.5517).epsilon(1e-4));
  CHECK(a.total == doctest::Approx(0.9084).epsilon(1e-4));

  const LossTerms b = LabeledLoss(FromProbs({{0.5, 0.5}}, {{0.5, 0.5}}), std::vector<int>{0});
  CHECK(b.semantic == doctest::Approx(std::log(2.0)));
  CHECK(b.matching == doctest::Approx(2 * std::log(2.0)));

  const ag::Mat sure_s{{40.0, -40.0}};
  const ag::Mat sure_m{{40.0, -40.0}};
  const LossTerms c = LabeledLoss(DualHeadOutputs::FromLogits(&sure_s, &sure_m), std::vector<int>{0});
  CHECK(c.total < 1e-6);
  CHECK(c.grad_semantic_logits.isZero());
}

TEST_CASE("labeled loss matches the scalar oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + trial % 4;
    const int rows = 1 + trial % 8;
    const ag::Mat s = testing::RandomMat(rng, rows, k, 2.0);
    const ag::Mat m = testing::RandomMat(rng, rows, k, 2.0);
    std::vector<int> labels(static_cast<std::size_t>(rows));
    for (auto& y : labels) y = std::uniform_int_distribution<int>(0, k - 1)(rng);
    const DualHeadOutputs o = DualHeadOutputs::FromLogits(&s, &m);
    double expected = 0.0;
    for (int r = 0; r < rows; ++r) {
      Row pm(static_cast<std::size_t>(k));
      for (int c = 0; c < k; ++c) pm[c] = testing::SigmoidOracle(m(r, c));
      expected += testing::CrossEntropyOracle(testing::SoftmaxOracle(testing::RowOf(s, r)), labels[r]) +
                  testing::BinaryCrossEntropyOracle(pm, labels[r]);
    }
    CHECK(LabeledLoss(o, labels).total == doctest::Approx(expected / rows).epsilon(1e-9));
  }
}

TEST_CASE("loss gradients match finite differences in the logits") {
  std::mt19937_64 rng(12);
  const ag::Mat s = testing::RandomMat(rng, 3, 4, 1.5);
  const ag::Mat m = testing::RandomMat(rng, 3, 4, 1.5);
  const std::vector<int> labels = {0, 3, 1};
  std::vector<PseudoTarget> targets = {Target({0.7, 0.1, 0.1, 0.1}, 0), PseudoTarget{}, Target({0.05, 0.05, 0.1, 0.8}, 3)};

  for (KlDirection dir : {KlDirection::kTargetToPrediction, KlDirection::kPredictionToTarget}) {
    auto loss = [&](const ag::Mat& ss, const ag::Mat& mm) {
      const DualHeadOutputs o = DualHeadOutputs::FromLogits(&ss, &mm);
      return LabeledLoss(o, labels).total + UnlabeledLoss(o, targets, dir).total;
    };
    const DualHeadOutputs o = DualHeadOutputs::FromLogits(&s, &m);
    const LossTerms l = LabeledLoss(o, labels);
    const LossTerms u = UnlabeledLoss(o, targets, dir);
    const ag::Mat gs = l.grad_semantic_logits + u.grad_semantic_logits;
    const ag::Mat gm = l.grad_matching_logits + u.grad_matching_logits;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        ag::Mat up = s, down = s;
        up(r, c) += 1e-6;
        down(r, c) -= 1e-6;
        CHECK(gs(r, c) == doctest::Approx((loss(up, m) - loss(down, m)) / 2e-6).epsilon(1e-5).scale(1e-8));
        ag::Mat mup = m, mdown = m;
        mup(r, c) += 1e-6;
        mdown(r, c) -= 1e-6;
        CHECK(gm(r, c) == doctest::Approx((loss(s, mup) - loss(s, mdown)) / 2e-6).epsilon(1e-5).scale(1e-8));
      }
    }
  }
}

TEST_CASE("gate conditions on the worked examples") {
  const GateConfig cfg;
  const auto pass = Gate(FromProbs({{0.97, 0.02, 0.01}}, {{0.80, 0.30, 0.10}}), cfg);
  CHECK(pass[0].passed);
  CHECK(pass[0].hard_label == 0);
  CHECK(pass[0].sharpened.sum() == doctest::Approx(1.0));
  CHECK(Gate(FromProbs({{0.97, 0.02, 0.01}}, {{0.30, 0.80, 0.10}}), cfg)[0].passed == false);
  CHECK(Gate(FromProbs({{0.94, 0.05, 0.01}}, {{0.99, 0.01, 0.01}}), cfg)[0].passed == false);
  CHECK(Gate(FromProbs({{0.97, 0.02, 0.01}}, {{0.69, 0.01, 0.01}}), cfg)[0].passed == false);
}

TEST_CASE("conditions can be disabled and missing heads are skipped") {
  const GateConfig cfg;
  const auto disagree = FromProbs({{0.97, 0.02, 0.01}}, {{0.30, 0.80, 0.10}});
  CHECK(Gate(disagree, cfg, {true, true, false})[0].passed);
  CHECK(Gate(disagree, cfg, {true, true, false})[0].hard_label == 1);

  const ag::Mat s = testing::SemanticLogitsFor({{0.97, 0.02, 0.01}});
  const auto semantic_only = Gate(DualHeadOutputs::FromLogits(&s, nullptr), cfg);
  CHECK(semantic_only[0].passed);
  CHECK(semantic_only[0].hard_label == 0);

  const ag::Mat m = testing::MatchingLogitsFor({{0.1, 0.75, 0.2}});
  const auto matching_only = Gate(DualHeadOutputs::FromLogits(nullptr, &m), cfg);
  CHECK(matching_only[0].passed);
  CHECK(matching_only[0].hard_label == 1);
  CHECK(matching_only[0].sharpened.size() == 0);
}

TEST_CASE("sharpening") {
  Eigen::VectorXd o(3);
  o << 2.0, 1.0, 0.0;
  const Eigen::VectorXd p = Sharpen(o, 0.5);
  CHECK(p(0) == doctest::Approx(0.8668).epsilon(1e-4));
  CHECK(p(1) == doctest::Approx(0.1173).epsilon(1e-3));
  CHECK(p(2) == doctest::Approx(0.0159).epsilon(1e-2));
  CHECK(Sharpen(o, 0.01).maxCoeff() > 0.99);
  CHECK_THROWS_AS(Sharpen(o, 0.0), ConfigError);
  const testing::Row plain = testing::SoftmaxOracle({2.0, 1.0, 0.0});
  const Eigen::VectorXd one = Sharpen(o, 1.0);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(one(i) - plain[i]) < 1e-12);
}

TEST_CASE("unlabeled loss") {
  const auto aug = FromProbs({{0.6, 0.4}}, {{0.5, 0.5}});
  const std::vector<PseudoTarget> t = {Target({0.9, 0.1}, 0)};
  const LossTerms l = UnlabeledLoss(aug, t);
  CHECK(l.semantic == doctest::Approx(0.9 * std::log(0.9 / 0.6) + 0.1 * std::log(0.1 / 0.4)));
  CHECK(l.semantic == doctest::Approx(0.2263).epsilon(1e-3));
  CHECK(l.matching == doctest::Approx(2 * std::log(2.0)));

  const LossTerms reverse = UnlabeledLoss(aug, t, KlDirection::kPredictionToTarget);
  CHECK(reverse.semantic == doctest::Approx(0.6 * std::log(0.6 / 0.9) + 0.4 * std::log(0.4 / 0.1)));

  const std::vector<PseudoTarget> none = {PseudoTarget{}};
  const LossTerms zero = UnlabeledLoss(aug, none);
  CHECK(zero.total == 0.0);
  CHECK(zero.rows == 0);
  CHECK(zero.grad_semantic_logits.isZero());

  const auto fixed_point = FromProbs({{0.7, 0.3}}, {{1.0 - 1e-12, 1e-12}});
  CHECK(UnlabeledLoss(fixed_point, std::vector<PseudoTarget>{Target({0.7, 0.3}, 0)}).total < 1e-6);
}

TEST_CASE("gated rows are averaged over gated rows only") {
  const auto aug = FromProbs({{0.6, 0.4}, {0.6, 0.4}}, {{0.5, 0.5}, {0.5, 0.5}});
  const std::vector<PseudoTarget> one = {Target({0.9, 0.1}, 0), PseudoTarget{}};
  const std::vector<PseudoTarget> both = {Target({0.9, 0.1}, 0), Target({0.9, 0.1}, 0)};
  CHECK(UnlabeledLoss(aug, one).total == doctest::Approx(UnlabeledLoss(aug, both).total));
}

struct ToyRun {
  PcmModel model;
  CsrSet csr;
  TrainData data;
  TrainConfig config;
};

ToyRun MakeToyRun() {
  ToyRun run{PcmModel(testing::ToyEncoder(), 4, ModelLayout{}, HeadConfig{8, "tanh"}, 4),
             CsrSet{}, TrainData{}, TrainConfig{}};
  run.csr = testing::ToyCsr(run.model.encoder());
  const auto texts = testing::Tokenize(run.model.encoder(), testing::ToyTexts());
  run.data.num_classes = 4;
  run.data.labeled = texts;
  run.data.labels = testing::ToyLabels();
  run.data.unlabeled = texts;
  for (const auto& t : texts) run.data.augmented.push_back({t});
  run.data.validation = {texts.begin(), texts.begin() + 4};
  run.data.test = texts;
  run.data.test_labels = testing::ToyLabels();
  run.config.max_len = 32;
  run.config.encoder_lr = 1e-3;
  run.config.head_lr = 1e-2;
  run.config.gate = {0.3, 0.3, 0.5};
  run.config.max_steps = 12;
  run.config.check_every = 4;
  run.config.eval_every = 6;
  run.config.mining.max_len = 32;
  run.config.mining.top_j = 5;
  run.config.seed = 9;
  return run;
}

TEST_CASE("training is reproducible and logs the contract fields") {
  ToyRun a = MakeToyRun();
  ToyRun b = MakeToyRun();
  const TrainResult ra = Train(a.model, a.csr, a.data, a.config, StopWords::English());
  const TrainResult rb = Train(b.model, b.csr, b.data, b.config, StopWords::English());
  CHECK(ra.steps == 12);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) CHECK(ra.log[i].dump() == rb.log[i].dump());

  int last_version = 0;
  int intervals = 0;
  for (const auto& rec : ra.log) {
    if (rec.at("event") != "interval") continue;
    ++intervals;
    for (const char* key : {"step", "loss_labeled", "loss_unlabeled", "gate_pass_rate", "semantic_confidence_rate",
                            "matching_confidence_rate", "agreement_rate", "validation_qualifying", "csr_version",
                            "test_accuracy"}) {
      CHECK_MESSAGE(rec.contains(key), key);
    }
    const int v = rec.at("csr_version");
    CHECK(v >= last_version);
    last_version = v;
  }
  CHECK(intervals >= 2);
  for (std::size_t i = 1; i < ra.csr_history.size(); ++i) {
    CHECK(ra.csr_history[i].version == ra.csr_history[i - 1].version + 1);
  }
}

TEST_CASE("frozen CSRs stay at version 0") {
  ToyRun run = MakeToyRun();
  run.config.csr_updates = false;
  const TrainResult r = Train(run.model, run.csr, run.data, run.config, StopWords::English());
  for (const auto& rec : r.log) {
    if (rec.at("event") == "interval") CHECK(rec.at("csr_version") == 0);
    CHECK(rec.at("event") != "csr_update");
  }
}

TEST_CASE("zero unlabeled weight reproduces the supervised trajectory") {
  ToyRun with = MakeToyRun();
  ToyRun without = MakeToyRun();
  with.config.lambda_u = 0.0;
  with.config.gate = {0.01, 0.01, 0.5};
  without.config.use_unlabeled = false;
  AdamW opt_with(with.model.ParamGroups(1e-3, 1e-2, 0.01), {});
  AdamW opt_without(without.model.ParamGroups(1e-3, 1e-2, 0.01), {});
  TrainState state_with(3), state_without(3);
  const auto& texts = with.data.labeled;
  for (int step = 0; step < 5; ++step) {
    const std::vector<TokenizedText> lab = {texts[step % 8], texts[(step + 3) % 8]};
    const std::vector<int> y = {testing::ToyLabels()[step % 8], testing::ToyLabels()[(step + 3) % 8]};
    const StepStats a = TrainStep(with.model, opt_with, lab, y, with.data.unlabeled, with.data.augmented, &with.csr,
                                  with.config, state_with);
    const StepStats b = TrainStep(without.model, opt_without, lab, y, {}, {}, &without.csr, without.config,
                                  state_without);
    CHECK(a.gated_rows > 0);
    CHECK(a.loss_total == b.loss_total);
  }
  const auto pa = with.model.NamedParameters();
  const auto pb = without.model.NamedParameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second->value == pb[i].second->value);
}

TEST_CASE("non-finite losses abort the step") {
  ToyRun run = MakeToyRun();
  for (const auto& [name, p] : run.model.NamedParameters()) {
    if (name == "semantic_head.dense2.bias") p->value(0, 0) = std::nan("");
  }
  AdamW opt(run.model.ParamGroups(1e-3, 1e-2, 0.0), {});
  TrainState state(1);
  const std::vector<TokenizedText> lab = {run.data.labeled[0]};
  CHECK_THROWS_AS(TrainStep(run.model, opt, lab, std::vector<int>{0}, {}, {}, &run.csr, run.config, state),
                  TrainingDiverged);
}

TEST_CASE("qualifying validation rows respect the gate") {
  ToyRun run = MakeToyRun();
  run.config.gate = {0.01, 0.01, 0.5};
  run.config.conditions.agreement = false;
  const QualifyingSet all = FindQualifying(run.model, run.data.validation, &run.csr, run.config);
  CHECK(all.count() == 4);
  run.config.gate = {1.0, 1.0, 0.5};
  CHECK(FindQualifying(run.model, run.data.validation, &run.csr, run.config).count() == 0);
}

}  // namespace
}  // namespace pcm
