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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "pcm/model.h"
#include "test_support.h"

namespace pcm {
namespace {

ag::Var Named(const PcmModel& m, const std::string& name) {
  for (const auto& [n, p] : m.NamedParameters()) {
    if (n == name) return p;
  }
  FAIL("no parameter " << name);
  return nullptr;
}

PcmModel ToyModel(ModelLayout layout = {}, std::uint64_t seed = 5) {
  return PcmModel(testing::ToyEncoder(), 4, layout, HeadConfig{8, "tanh"}, seed);
}

TEST_CASE("output shapes and probability consistency") {
  const PcmModel model = ToyModel();
  const CsrSet csr = testing::ToyCsr(model.encoder());
  const auto texts = testing::Tokenize(model.encoder(), testing::ToyTexts());
  const DualHeadOutputs o = model.Evaluate(model.Encode(texts, &csr, 32, TruncationSide::kLeading), &csr);
  CHECK(o.semantic_logits.rows() == 8);
  CHECK(o.semantic_logits.cols() == 4);
  CHECK(o.matching_logits.cols() == 4);
  for (int r = 0; r < o.rows(); ++r) {
    CHECK(o.semantic_probs.row(r).sum() == doctest::Approx(1.0).epsilon(1e-5));
    const testing::Row soft = testing::SoftmaxOracle(testing::RowOf(o.semantic_logits, r));
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(o.semantic_probs(r, k) - soft[k]) < 1e-6);
      CHECK(std::abs(o.matching_probs(r, k) - testing::SigmoidOracle(o.matching_logits(r, k))) < 1e-6);
    }
  }
  CHECK(Named(model, "matching_head.dense1.weight")->value.rows() == 2 * model.encoder().config().hidden);
}

TEST_CASE("zero heads give uniform and one-half probabilities") {
  const PcmModel model = ToyModel();
  for (const auto& [name, p] : model.NamedParameters()) {
    if (name.find("_head.") != std::string::npos) p->value.setZero();
  }
  const CsrSet csr = testing::ToyCsr(model.encoder());
  const auto texts = testing::Tokenize(model.encoder(), {testing::ToyTexts()[0]});
  const DualHeadOutputs o = model.Evaluate(model.Encode(texts, &csr, 32, TruncationSide::kLeading), &csr);
  for (int k = 0; k < 4; ++k) {
    CHECK(o.semantic_probs(0, k) == doctest::Approx(0.25));
    CHECK(o.matching_probs(0, k) == doctest::Approx(0.5));
  }
}

TEST_CASE("stale CSR batches are rejected") {
  const PcmModel model = ToyModel();
  CsrSet csr = testing::ToyCsr(model.encoder());
  const auto texts = testing::Tokenize(model.encoder(), {testing::ToyTexts()[0]});
  const EncodedBatch batch = model.Encode(texts, &csr, 32, TruncationSide::kLeading);
  CsrSet newer = csr;
  newer.version = 1;
  CHECK_THROWS_AS(model.Forward(batch, &newer, ForwardMode::Eval()), ConfigError);
  CHECK_THROWS_AS(model.Encode(texts, nullptr, 32, TruncationSide::kLeading), ConfigError);
}

TEST_CASE("argmax ties go to the lowest index") {
  ag::Mat m(3, 3);
  m << 0.1, 0.7, 0.2, 0.4, 0.4, 0.2, 0.3, 0.3, 0.3;
  CHECK(ArgmaxRows(m) == std::vector<int>{1, 0, 0});
}

TEST_CASE("raising one matching logit moves only its own probability") {
  ag::Mat logits(1, 3);
  logits << -0.5, 0.2, 1.0;
  const ag::Mat before = Sigmoid(logits);
  logits(0, 1) += 0.3;
  const ag::Mat after = Sigmoid(logits);
  CHECK(after(0, 1) > before(0, 1));
  CHECK(after(0, 0) == before(0, 0));
  CHECK(after(0, 2) == before(0, 2));
}

TEST_CASE("matching pathway is class symmetric up to slot positions") {
  const PcmModel model = ToyModel();
  // Equal position embeddings on the slot positions remove the only
  // order-dependent input, so permuting CSRs must permute the scores.
  const CsrSet csr = testing::ToyCsr(model.encoder());
  const auto texts = testing::Tokenize(model.encoder(), {"the striker scores twice"});
  const EncodedBatch batch = model.Encode(texts, &csr, 32, TruncationSide::kLeading);
  ag::Mat& pos = Named(model, "embeddings.position_embeddings.weight")->value;
  for (int s : batch.csr_slots[0]) pos.row(s) = pos.row(batch.csr_slots[0][0]);

  const std::vector<int> perm = {2, 0, 3, 1};
  CsrSet permuted = csr;
  for (int k = 0; k < 4; ++k) permuted.classes[k] = csr.classes[perm[k]];
  const ag::Mat base = model.Evaluate(batch, &csr).matching_logits;
  const ag::Mat moved =
      model.Evaluate(model.Encode(texts, &permuted, 32, TruncationSide::kLeading), &permuted).matching_logits;
  for (int k = 0; k < 4; ++k) CHECK(moved(0, k) == doctest::Approx(base(0, perm[k])).epsilon(1e-9));
}

TEST_CASE("head gradients match finite differences") {
  const PcmModel model = ToyModel();
  const CsrSet csr = testing::ToyCsr(model.encoder());
  const auto texts = testing::Tokenize(model.encoder(), {testing::ToyTexts()[0], testing::ToyTexts()[3]});
  const EncodedBatch batch = model.Encode(texts, &csr, 32, TruncationSide::kLeading);
  std::mt19937_64 rng(8);
  const ag::Mat ws = testing::RandomMat(rng, 2, 4, 1.0);
  const ag::Mat wm = testing::RandomMat(rng, 2, 4, 1.0);
  auto objective = [&] {
    const DualHeadOutputs o = model.Evaluate(batch, &csr);
    return (o.semantic_logits.array() * ws.array()).sum() + (o.matching_logits.array() * wm.array()).sum();
  };
  ag::Tape tape;
  const DualHeadForward f = model.Forward(batch, &csr, {&tape, nullptr});
  tape.Backward({{f.semantic_logits, ws}, {f.matching_logits, wm}});
  for (const auto& [name, p] : model.NamedParameters()) {
    if (name.find("_head.") == std::string::npos) continue;
    for (int probe = 0; probe < 3; ++probe) {
      const int r = std::uniform_int_distribution<int>(0, static_cast<int>(p->value.rows()) - 1)(rng);
      const int c = std::uniform_int_distribution<int>(0, static_cast<int>(p->value.cols()) - 1)(rng);
      const double saved = p->value(r, c);
      p->value(r, c) = saved + 1e-6;
      const double up = objective();
      p->value(r, c) = saved - 1e-6;
      const double down = objective();
      p->value(r, c) = saved;
      const double numeric = (up - down) / 2e-6;
      CHECK_MESSAGE(p->grad(r, c) == doctest::Approx(numeric).epsilon(1e-3).scale(1e-6), name);
    }
  }
}

TEST_CASE("layouts without a head report it missing") {
  ModelLayout semantic_only;
  semantic_only.matching = MatchingHead::kNone;
  const PcmModel a = ToyModel(semantic_only);
  const CsrSet csr = testing::ToyCsr(a.encoder());
  const auto texts = testing::Tokenize(a.encoder(), {testing::ToyTexts()[0]});
  const EncodedBatch batch = a.Encode(texts, &csr, 32, TruncationSide::kLeading);
  CHECK_FALSE(a.Evaluate(batch, &csr).has_matching());
  CHECK_THROWS_AS(a.Predict(batch, &csr, PredictionHead::kMatching), ConfigError);

  ModelLayout pooled{false, true, MatchingHead::kPooled};
  const PcmModel b = ToyModel(pooled);
  const EncodedBatch plain = b.Encode(texts, nullptr, 32, TruncationSide::kLeading);
  const DualHeadOutputs o = b.Evaluate(plain, nullptr);
  CHECK(o.has_semantic());
  CHECK(o.matching_probs.cols() == 4);

  ModelLayout invalid{false, true, MatchingHead::kCsrSlots};
  CHECK_THROWS_AS(ToyModel(invalid), ConfigError);
}

TEST_CASE("weight decay exempts biases and layer norms") {
  const PcmModel model = ToyModel();
  const auto groups = model.ParamGroups(1e-5, 1e-3, 0.01);
  REQUIRE(groups.size() == 4);
  CHECK(groups[0].lr == 1e-5);
  CHECK(groups[2].lr == 1e-3);
  CHECK(groups[1].weight_decay == 0.0);
  CHECK(groups[3].weight_decay == 0.0);
  std::size_t total = 0;
  for (const auto& g : groups) total += g.params.size();
  CHECK(total == model.NamedParameters().size());
}

TEST_CASE("checkpoint round trip keeps predictions and the CSR version") {
  const PcmModel model = ToyModel();
  const CsrSet csr = testing::ToyCsr(model.encoder());
  const auto dir = std::filesystem::temp_directory_path() / "pcm_model_test";
  std::filesystem::remove_all(dir);
  model.Save(dir.string(), 7);
  int version = -1;
  const PcmModel loaded = PcmModel::Load(dir.string(), &version);
  CHECK(version == 7);
  const auto texts = testing::Tokenize(model.encoder(), testing::ToyTexts());
  const EncodedBatch batch = model.Encode(texts, &csr, 32, TruncationSide::kLeading);
  CHECK(loaded.Evaluate(batch, &csr).matching_logits == model.Evaluate(batch, &csr).matching_logits);
  CHECK(loaded.Predict(batch, &csr) == model.Predict(batch, &csr));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace pcm
