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

#include "pcm/csr.h"

#include <algorithm>
#include <fstream>
#include <iostream>

namespace pcm {
namespace {

double EffectiveScore(const WordStats& s, ScoreAccumulation acc) {
  return acc == ScoreAccumulation::kSum ? s.score : s.score / std::max(1, s.count);
}

ClassSemanticRepresentation BuildClass(const std::map<std::string, WordStats>& words, int class_id, int top_j,
                                       const Encoder& encoder, ScoreAccumulation acc, int version) {
  std::vector<std::pair<std::string, const WordStats*>> ranked;
  ranked.reserve(words.size());
  for (const auto& [w, s] : words) ranked.emplace_back(w, &s);
  std::sort(ranked.begin(), ranked.end(), [acc](const auto& a, const auto& b) {
    const double sa = EffectiveScore(*a.second, acc);
    const double sb = EffectiveScore(*b.second, acc);
    if (sa != sb) return sa > sb;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > top_j) ranked.resize(static_cast<std::size_t>(top_j));

  ClassSemanticRepresentation c;
  c.class_id = class_id;
  c.version = version;
  for (const auto& [w, s] : ranked) {
    c.words.push_back({w, EffectiveScore(*s, acc), s->from_labeled ? WordSource::kLabeled : WordSource::kUnlabeled});
  }
  c.embedding = CsrEmbedding(c.words, encoder);
  return c;
}

const char* SourceName(WordSource s) { return s == WordSource::kLabeled ? "labeled" : "unlabeled"; }

}  // namespace

ag::Mat TokenAttentionReceived(const EncoderOutput& output, const EncodedBatch& batch) {
  ag::Mat scores = ag::Mat::Zero(batch.batch_size, batch.seq_len);
  for (int b = 0; b < batch.batch_size; ++b) {
    const int len = batch.lengths[static_cast<std::size_t>(b)];
    for (int h = 0; h < output.num_heads; ++h) {
      scores.row(b).head(len) += output.Attention(b, h).topLeftCorner(len, len).colwise().sum();
    }
    scores.row(b) /= static_cast<double>(output.num_heads) * len;
  }
  return scores;
}

void AccumulateClassWords(AttentionScoreTable& table, const EncodedBatch& batch, std::span<const int> row_classes,
                          const ag::Mat& scores, const StopWords& stopwords, WordSource source) {
  for (int b = 0; b < batch.batch_size; ++b) {
    const int cls = row_classes[static_cast<std::size_t>(b)];
    if (cls < 0 || cls >= table.num_classes()) throw std::out_of_range("AccumulateClassWords: class out of range");
    const TokenizedText& text = batch.texts[static_cast<std::size_t>(b)];
    const Span span = batch.text_spans[static_cast<std::size_t>(b)];
    std::map<int, std::pair<double, int>> per_word;  // word index -> (piece score sum, pieces)
    for (int i = 0; i < span.size(); ++i) {
      auto& acc = per_word[text.word_of_piece[static_cast<std::size_t>(i)]];
      acc.first += scores(b, span.begin + i);
      acc.second += 1;
    }
    auto& words = table.classes[static_cast<std::size_t>(cls)];
    for (const auto& [w, acc] : per_word) {
      const std::string& word = text.words[static_cast<std::size_t>(w)];
      if (stopwords.Rejects(word)) continue;
      WordStats& s = words[word];
      s.score += acc.first / acc.second;
      s.count += 1;
      s.from_labeled = s.from_labeled || source == WordSource::kLabeled;
    }
  }
}

Eigen::VectorXd CsrEmbedding(std::span<const CsrWord> words, const Encoder& encoder) {
  const ag::Mat& table = encoder.word_embeddings();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.cols());
  int pieces = 0;
  for (const auto& w : words) {
    for (int id : encoder.tokenizer().WordPieces(w.word)) {
      sum += table.row(id).transpose();
      ++pieces;
    }
  }
  if (pieces > 0) sum /= pieces;
  return sum;
}

CsrSet BuildCsr(const AttentionScoreTable& table, int top_j, const Encoder& encoder, ScoreAccumulation accumulation,
                int version) {
  if (top_j < 1) throw ConfigError("top_j must be at least 1");
  CsrSet set;
  set.version = version;
  for (int k = 0; k < table.num_classes(); ++k) {
    const auto& words = table.classes[static_cast<std::size_t>(k)];
    if (words.empty()) throw ConfigError("class " + std::to_string(k) + " has no scored words");
    set.classes.push_back(BuildClass(words, k, top_j, encoder, accumulation, version));
  }
  return set;
}

void MineSentences(AttentionScoreTable& table, const Encoder& encoder, const CsrSet* layout_csr,
                   std::span<const TokenizedText> texts, std::span<const int> classes, WordSource source,
                   const StopWords& stopwords, const MiningOptions& options) {
  const std::size_t step = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (std::size_t begin = 0; begin < texts.size(); begin += step) {
    const std::size_t n = std::min(step, texts.size() - begin);
    const auto chunk = texts.subspan(begin, n);
    const EncodedBatch batch =
        layout_csr != nullptr
            ? EncodeWithCsr(chunk, *layout_csr, encoder.tokenizer(), options.max_len, options.side)
            : EncodePlain(chunk, encoder.tokenizer(), options.max_len, options.side);
    const EncoderOutput out = encoder.Forward(batch, ForwardMode::Eval());
    AccumulateClassWords(table, batch, classes.subspan(begin, n), TokenAttentionReceived(out, batch), stopwords,
                         source);
  }
}

CsrSet InitializeCsr(std::span<const TokenizedText> labeled, std::span<const int> labels, int num_classes,
                     const Encoder& finetuned, const StopWords& stopwords, const MiningOptions& options) {
  AttentionScoreTable table(num_classes);
  MineSentences(table, finetuned, nullptr, labeled, labels, WordSource::kLabeled, stopwords, options);
  return BuildCsr(table, options.top_j, finetuned, options.accumulation, 0);
}

CsrSet UpdateCsr(const CsrSet& current, const CsrUpdateInputs& inputs, const Encoder& encoder, bool slot_layout,
                 const StopWords& stopwords, const MiningOptions& options, int qualifying_count,
                 std::vector<int>* retained) {
  const int k = current.num_classes();
  const CsrSet* layout = slot_layout ? &current : nullptr;
  AttentionScoreTable table(k);
  MineSentences(table, encoder, layout, inputs.labeled, inputs.labels, WordSource::kLabeled, stopwords, options);
  MineSentences(table, encoder, layout, inputs.qualifying, inputs.pseudo_labels, WordSource::kUnlabeled, stopwords,
                options);
  CsrSet next;
  next.version = current.version + 1;
  next.qualifying_count = qualifying_count;
  for (int c = 0; c < k; ++c) {
    const auto& words = table.classes[static_cast<std::size_t>(c)];
    if (words.empty()) {
      ClassSemanticRepresentation kept = current.classes[static_cast<std::size_t>(c)];
      kept.version = next.version;
      next.classes.push_back(std::move(kept));
      if (retained != nullptr) retained->push_back(c);
      std::clog << "csr: class " << c << " has no contributing sentences; keeping its previous words\n";
      continue;
    }
    next.classes.push_back(BuildClass(words, c, options.top_j, encoder, options.accumulation, next.version));
  }
  return next;
}

CsrSet CsrFromSeedWords(const std::vector<std::vector<std::string>>& words, const Encoder& encoder) {
  CsrSet set;
  for (std::size_t k = 0; k < words.size(); ++k) {
    ClassSemanticRepresentation c;
    c.class_id = static_cast<int>(k);
    for (const auto& w : words[k]) c.words.push_back({w, 1.0, WordSource::kLabeled});
    if (c.words.empty()) throw ConfigError("seed words for class " + std::to_string(k) + " are empty");
    c.embedding = CsrEmbedding(c.words, encoder);
    set.classes.push_back(std::move(c));
  }
  return set;
}

CsrUpdateTrigger::Decision CsrUpdateTrigger::Observe(int qualifying_count) {
  Decision d;
  d.qualifying_count = qualifying_count;
  if (qualifying_count > running_max_) {
    running_max_ = qualifying_count;
    d.should_update = true;
  }
  return d;
}

nlohmann::json MatchProbeResult::ToJson() const {
  nlohmann::json j;
  j["class_words"] = class_words;
  j["cosine"] = cosine;
  j["tokens"] = nlohmann::json::array();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(attention.cols()));
    for (Eigen::Index c = 0; c < attention.cols(); ++c) row[static_cast<std::size_t>(c)] = attention(static_cast<Eigen::Index>(i), c);
    j["tokens"].push_back({{"token", tokens[i]},
                           {"best_class", best_class[i]},
                           {"attention_value", attention_value[i]},
                           {"attention", row}});
  }
  return j;
}

MatchProbeResult ProbeInherentMatching(const Encoder& encoder, std::string_view text,
                                       const std::vector<std::string>& class_words, int max_len) {
  if (class_words.empty()) throw ConfigError("probe needs at least one class word");
  const WordPieceTokenizer& tok = encoder.tokenizer();
  std::vector<std::vector<int>> groups;
  for (const auto& w : class_words) {
    TokenizedText t = tok.Tokenize(w);
    if (t.empty()) throw ConfigError("class word '" + w + "' produced no tokens");
    groups.push_back(std::move(t.ids));
  }
  std::vector<Span> spans;
  const EncodedBatch batch =
      EncodeWithLiteralGroups(tok.Tokenize(text), groups, tok, max_len, TruncationSide::kLeading, &spans);
  const EncoderOutput out = encoder.Forward(batch, ForwardMode::Eval());
  const ag::Mat& feats = out.token_features->value;
  const Span text_span = batch.text_spans.front();
  const int k = static_cast<int>(class_words.size());

  MatchProbeResult r;
  r.class_words = class_words;
  r.attention = ag::Mat::Zero(text_span.size(), k);
  for (int i = 0; i < text_span.size(); ++i) {
    const int q = text_span.begin + i;
    r.tokens.push_back(tok.Token(batch.token_ids[static_cast<std::size_t>(q)]));
    for (int c = 0; c < k; ++c) {
      const Span s = spans[static_cast<std::size_t>(c)];
      double v = 0.0;
      for (int h = 0; h < out.num_heads; ++h) v += out.Attention(0, h).row(q).segment(s.begin, s.size()).mean();
      r.attention(i, c) = v / out.num_heads;
    }
    Eigen::Index best = 0;
    r.attention.row(i).maxCoeff(&best);
    r.best_class.push_back(static_cast<int>(best));
    r.attention_value.push_back(r.attention(i, best));
  }

  Eigen::VectorXd sentence = Eigen::VectorXd::Zero(feats.cols());
  if (!text_span.empty()) sentence = feats.middleRows(text_span.begin, text_span.size()).colwise().mean().transpose();
  for (int c = 0; c < k; ++c) {
    const Span s = spans[static_cast<std::size_t>(c)];
    const Eigen::VectorXd word = feats.middleRows(s.begin, s.size()).colwise().mean().transpose();
    const double denom = sentence.norm() * word.norm();
    const double cos = denom > 0.0 ? sentence.dot(word) / denom : 0.0;
    r.cosine.push_back(std::clamp(cos, -1.0, 1.0));
  }
  return r;
}

nlohmann::json CsrSetToJson(const CsrSet& csr) {
  nlohmann::json j;
  j["version"] = csr.version;
  j["qualifying_count"] = csr.qualifying_count;
  j["classes"] = nlohmann::json::array();
  for (const auto& c : csr.classes) {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : c.words) words.push_back({{"word", w.word}, {"score", w.score}, {"source", SourceName(w.source)}});
    j["classes"].push_back({{"class_id", c.class_id},
                            {"version", c.version},
                            {"words", words},
                            {"embedding", std::vector<double>(c.embedding.data(), c.embedding.data() + c.embedding.size())}});
  }
  return j;
}

CsrSet CsrSetFromJson(const nlohmann::json& j) {
  CsrSet csr;
  csr.version = j.at("version").get<int>();
  csr.qualifying_count = j.value("qualifying_count", 0);
  for (const auto& jc : j.at("classes")) {
    ClassSemanticRepresentation c;
    c.class_id = jc.at("class_id").get<int>();
    c.version = jc.value("version", csr.version);
    for (const auto& jw : jc.at("words")) {
      c.words.push_back({jw.at("word").get<std::string>(), jw.at("score").get<double>(),
                         jw.at("source").get<std::string>() == "labeled" ? WordSource::kLabeled : WordSource::kUnlabeled});
    }
    const auto emb = jc.at("embedding").get<std::vector<double>>();
    c.embedding = Eigen::Map<const Eigen::VectorXd>(emb.data(), static_cast<Eigen::Index>(emb.size()));
    csr.classes.push_back(std::move(c));
  }
  return csr;
}

void WriteCsrSnapshot(const std::string& path, const CsrSet& csr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSR snapshot " + path);
  out << CsrSetToJson(csr).dump(2) << '\n';
}

CsrSet ReadCsrSnapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSR snapshot " + path);
  return CsrSetFromJson(nlohmann::json::parse(in));
}

}  // namespace pcm
