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

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "pcm/csr.h"
#include "test_support.h"

namespace pcm {
namespace {

using testing::ToyEncoder;

Encoder PieceEncoder() {
  WordPieceTokenizer tok({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "play", "##ing", "game", "the", "score"});
  EncoderConfig c = testing::ToyConfig(static_cast<int>(tok.vocab_size()));
  return Encoder::RandomInit(c, std::move(tok), 1);
}

// One-head attention output over one row of `len` unmasked tokens.
std::pair<EncoderOutput, EncodedBatch> HandAttention(const ag::Mat& attention) {
  EncodedBatch b;
  b.batch_size = 1;
  b.seq_len = static_cast<int>(attention.rows());
  b.lengths = {b.seq_len};
  EncoderOutput out;
  out.batch_size = 1;
  out.seq_len = b.seq_len;
  out.num_heads = 1;
  out.last_attention = {attention};
  return {out, b};
}

TEST_CASE("received attention on a hand-built matrix") {
  ag::Mat a(2, 2);
  a << 0.9, 0.1, 0.6, 0.4;
  auto [out, batch] = HandAttention(a);
  const ag::Mat s = TokenAttentionReceived(out, batch);
  CHECK(s(0, 0) == doctest::Approx(0.75));
  CHECK(s(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("uniform attention scores 1/L everywhere and masked positions 0") {
  const int len = 5;
  EncodedBatch b;
  b.batch_size = 1;
  b.seq_len = 7;
  b.lengths = {len};
  EncoderOutput out;
  out.batch_size = 1;
  out.seq_len = 7;
  out.num_heads = 3;
  for (int h = 0; h < 3; ++h) {
    ag::Mat m = ag::Mat::Zero(7, 7);
    m.topLeftCorner(len, len).setConstant(1.0 / len);
    out.last_attention.push_back(m);
  }
  const ag::Mat s = TokenAttentionReceived(out, b);
  for (int t = 0; t < len; ++t) CHECK(s(0, t) == doctest::Approx(1.0 / len));
  CHECK(s(0, 5) == 0.0);
  CHECK(s(0, 6) == 0.0);
}

TEST_CASE("received attention sums to one per row on a real forward") {
  const Encoder enc = ToyEncoder();
  const auto texts = testing::Tokenize(enc, testing::ToyTexts());
  const EncodedBatch b = EncodePlain(texts, enc.tokenizer(), 32, TruncationSide::kLeading);
  const ag::Mat s = TokenAttentionReceived(enc.Forward(b, ForwardMode::Eval()), b);
  for (int r = 0; r < b.batch_size; ++r) CHECK(s.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("word scores average pieces and add across sentences") {
  const Encoder enc = PieceEncoder();
  const std::vector<TokenizedText> texts = {enc.Tokenize("playing game"), enc.Tokenize("the game")};
  const EncodedBatch b = EncodePlain(texts, enc.tokenizer(), 16, TruncationSide::kLeading);
  ag::Mat scores = ag::Mat::Zero(2, b.seq_len);
  scores(0, 1) = 0.1;  // play
  scores(0, 2) = 0.3;  // ##ing
  scores(0, 3) = 0.2;  // game
  scores(1, 1) = 0.7;  // the
  scores(1, 2) = 0.4;  // game
  AttentionScoreTable table(2);
  const std::vector<int> classes = {1, 1};
  AccumulateClassWords(table, b, classes, scores, StopWords::English(), WordSource::kLabeled);
  CHECK(table.classes[0].empty());
  const auto& words = table.classes[1];
  CHECK(words.size() == 2);
  CHECK(words.at("playing").score == doctest::Approx(0.2));
  CHECK(words.at("playing").count == 1);
  CHECK(words.at("game").score == doctest::Approx(0.6));
  CHECK(words.at("game").count == 2);
  CHECK(words.count("the") == 0);
}

TEST_CASE("stop-word-only sentences leave the table unchanged") {
  const Encoder enc = PieceEncoder();
  const std::vector<TokenizedText> texts = {enc.Tokenize("the the")};
  const EncodedBatch b = EncodePlain(texts, enc.tokenizer(), 16, TruncationSide::kLeading);
  AttentionScoreTable table(1);
  AccumulateClassWords(table, b, std::vector<int>{0}, ag::Mat::Constant(1, b.seq_len, 0.5), StopWords::English(),
                       WordSource::kLabeled);
  CHECK(table.classes[0].empty());
}

TEST_CASE("stop-word filter rejects punctuation and numbers") {
  const StopWords& sw = StopWords::English();
  CHECK(sw.size() > 100);
  CHECK(sw.Rejects("the"));
  CHECK(sw.Rejects(","));
  CHECK(sw.Rejects("1999"));
  CHECK(sw.Rejects("3.5"));
  CHECK_FALSE(sw.Rejects("goalkeeper"));
  const StopWords custom = StopWords::Parse("# comment\nfoo\n\nbar\n");
  CHECK(custom.size() == 2);
  CHECK(custom.Rejects("foo"));
}

AttentionScoreTable TieTable() {
  AttentionScoreTable t(1);
  t.classes[0]["match"] = {0.5, 1, true};
  t.classes[0]["goalkeeper"] = {0.9, 1, true};
  t.classes[0]["final"] = {0.5, 1, true};
  t.classes[0]["penalty"] = {0.1, 1, true};
  return t;
}

TEST_CASE("top-j selection is ordered with a lexicographic tie-break") {
  const Encoder enc = ToyEncoder();
  const CsrSet csr = BuildCsr(TieTable(), 3, enc);
  const auto& words = csr.classes[0].words;
  REQUIRE(words.size() == 3);
  CHECK(words[0].word == "goalkeeper");
  CHECK(words[1].word == "final");
  CHECK(words[2].word == "match");
  CHECK(BuildCsr(TieTable(), 3, enc).classes[0].embedding == csr.classes[0].embedding);

  AttentionScoreTable abc(1);
  abc.classes[0]["striker"] = {0.9, 1, true};
  abc.classes[0]["scores"] = {0.5, 1, true};
  abc.classes[0]["twice"] = {0.1, 1, true};
  const CsrSet two = BuildCsr(abc, 2, enc);
  CHECK(two.classes[0].words.size() == 2);
  CHECK(two.classes[0].words[0].word == "striker");
  CHECK(two.classes[0].words[1].word == "scores");
}

TEST_CASE("mean-per-occurrence accumulation reorders frequent words") {
  const Encoder enc = ToyEncoder();
  AttentionScoreTable t(1);
  t.classes[0]["match"] = {0.9, 3, true};
  t.classes[0]["final"] = {0.5, 1, true};
  CHECK(BuildCsr(t, 1, enc, ScoreAccumulation::kSum).classes[0].words[0].word == "match");
  CHECK(BuildCsr(t, 1, enc, ScoreAccumulation::kMeanPerOccurrence).classes[0].words[0].word == "final");
}

TEST_CASE("a class without scored words is an error naming it") {
  const Encoder enc = ToyEncoder();
  AttentionScoreTable t(2);
  t.classes[0]["match"] = {0.5, 1, true};
  CHECK_THROWS_WITH_AS(BuildCsr(t, 5, enc), doctest::Contains("class 1"), ConfigError);
}

TEST_CASE("stored embeddings match an independent recomputation") {
  const Encoder enc = PieceEncoder();
  AttentionScoreTable t(1);
  t.classes[0]["playing"] = {0.5, 1, true};
  t.classes[0]["score"] = {0.4, 1, true};
  const CsrSet csr = BuildCsr(t, 75, enc);
  const ag::Mat& table = enc.word_embeddings();
  const auto& tok = enc.tokenizer();
  Eigen::VectorXd expected =
      (table.row(tok.Id("play")) + table.row(tok.Id("##ing")) + table.row(tok.Id("score"))).transpose() / 3.0;
  CHECK((csr.classes[0].embedding - expected).cwiseAbs().maxCoeff() < 1e-6);

  const std::vector<CsrWord> twins = {{"score", 1.0, WordSource::kLabeled}, {"score", 0.5, WordSource::kLabeled}};
  CHECK((CsrEmbedding(twins, enc) - table.row(tok.Id("score")).transpose()).norm() < 1e-12);
}

TEST_CASE("trigger fires exactly on strict increases") {
  CsrUpdateTrigger trigger;
  const std::vector<int> counts = {0, 10, 12, 12, 15, 3, 15, 16};
  const std::vector<bool> expected = {false, true, true, false, true, false, false, true};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CHECK(trigger.Observe(counts[i]).should_update == expected[i]);
  }
  CHECK(trigger.running_max() == 16);
}

TEST_CASE("initial mining yields one non-empty stop-word-free list per class") {
  const Encoder enc = ToyEncoder();
  const auto texts = testing::Tokenize(enc, testing::ToyTexts());
  MiningOptions opt;
  opt.max_len = 32;
  const CsrSet csr = InitializeCsr(texts, testing::ToyLabels(), 4, enc, StopWords::English(), opt);
  CHECK(csr.version == 0);
  REQUIRE(csr.num_classes() == 4);
  for (const auto& c : csr.classes) {
    CHECK_FALSE(c.words.empty());
    CHECK(static_cast<int>(c.words.size()) <= opt.top_j);
    std::set<std::string> seen;
    for (const auto& w : c.words) {
      CHECK_FALSE(StopWords::English().Rejects(w.word));
      CHECK(seen.insert(w.word).second);
      CHECK(w.score >= 0.0);
    }
    CHECK((c.embedding - CsrEmbedding(c.words, enc)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("updates bump the version, replace words and keep silent classes") {
  const Encoder enc = ToyEncoder();
  const auto texts = testing::Tokenize(enc, testing::ToyTexts());
  MiningOptions opt;
  opt.max_len = 32;
  opt.top_j = 3;
  const CsrSet initial = InitializeCsr(texts, testing::ToyLabels(), 4, enc, StopWords::English(), opt);

  CsrUpdateInputs in;
  in.labeled = texts;
  in.labels = testing::ToyLabels();
  const CsrSet same = UpdateCsr(initial, in, enc, false, StopWords::English(), opt, 4);
  CHECK(same.version == 1);
  CHECK(same.qualifying_count == 4);
  for (int k = 0; k < 4; ++k) {
    std::vector<std::string> a, b;
    for (const auto& w : initial.classes[k].words) a.push_back(w.word);
    for (const auto& w : same.classes[k].words) b.push_back(w.word);
    CHECK(a == b);
  }

  const std::vector<TokenizedText> only_first(texts.begin(), texts.begin() + 2);
  const std::vector<int> first_labels = {0, 0};
  const std::vector<TokenizedText> extra = {enc.Tokenize("the striker saved a penalty")};
  const std::vector<int> extra_labels = {0};
  in.labeled = only_first;
  in.labels = first_labels;
  in.qualifying = extra;
  in.pseudo_labels = extra_labels;
  std::vector<int> retained;
  const CsrSet next = UpdateCsr(same, in, enc, true, StopWords::English(), opt, 5, &retained);
  CHECK(next.version == 2);
  CHECK(retained == std::vector<int>{1, 2, 3});
  CHECK(next.classes[1].embedding == same.classes[1].embedding);
  bool has_unlabeled_source = false;
  for (const auto& w : next.classes[0].words) has_unlabeled_source |= w.word == "striker" || w.word == "saved";
  CHECK(has_unlabeled_source);
}

TEST_CASE("probe output is bounded and deterministic") {
  const Encoder enc = ToyEncoder();
  const std::vector<std::string> words = {"match", "bank", "vaccine", "election"};
  const MatchProbeResult a = ProbeInherentMatching(enc, "the striker scores twice", words, 32);
  const MatchProbeResult b = ProbeInherentMatching(enc, "the striker scores twice", words, 32);
  CHECK(a.tokens.size() == 4);
  CHECK(a.cosine.size() == 4);
  for (double c : a.cosine) CHECK((c >= -1.0 && c <= 1.0));
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    CHECK((a.best_class[i] >= 0 && a.best_class[i] < 4));
    CHECK((a.attention_value[i] >= 0.0 && a.attention_value[i] <= 1.0));
  }
  CHECK(a.cosine == b.cosine);
  CHECK(a.best_class == b.best_class);
  CHECK(a.ToJson().dump() == b.ToJson().dump());
}

TEST_CASE("snapshot round trip") {
  const Encoder enc = ToyEncoder();
  CsrSet csr = testing::ToyCsr(enc);
  csr.version = 3;
  csr.qualifying_count = 17;
  csr.classes[2].words[1].source = WordSource::kUnlabeled;
  const auto path = std::filesystem::temp_directory_path() / "pcm_csr_snapshot.json";
  WriteCsrSnapshot(path.string(), csr);
  const CsrSet back = ReadCsrSnapshot(path.string());
  CHECK(back.version == 3);
  CHECK(back.qualifying_count == 17);
  CHECK(back.classes[2].words[1].source == WordSource::kUnlabeled);
  CHECK(back.classes[2].words[1].word == csr.classes[2].words[1].word);
  CHECK((back.EmbeddingMatrix() - csr.EmbeddingMatrix()).cwiseAbs().maxCoeff() < 1e-12);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace pcm
