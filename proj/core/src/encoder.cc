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

#include "pcm/encoder.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pcm/tensor_io.h"

namespace pcm {
namespace {

struct RowSpec {
  std::vector<int> ids;
  std::vector<int> segments;
  Span text;
  std::vector<int> slots;
  TokenizedText truncated;
};

EncodedBatch Assemble(std::vector<RowSpec> rows, int num_slots, int pad_id) {
  EncodedBatch batch;
  batch.batch_size = static_cast<int>(rows.size());
  batch.num_slots = num_slots;
  for (const auto& r : rows) batch.seq_len = std::max(batch.seq_len, static_cast<int>(r.ids.size()));
  const std::size_t total = static_cast<std::size_t>(batch.batch_size) * batch.seq_len;
  batch.token_ids.assign(total, pad_id);
  batch.attention_mask.assign(total, 0);
  batch.segment_ids.assign(total, 0);
  for (int b = 0; b < batch.batch_size; ++b) {
    RowSpec& r = rows[static_cast<std::size_t>(b)];
    for (std::size_t p = 0; p < r.ids.size(); ++p) {
      const int at = batch.At(b, static_cast<int>(p));
      batch.token_ids[static_cast<std::size_t>(at)] = r.ids[p];
      batch.attention_mask[static_cast<std::size_t>(at)] = 1;
      batch.segment_ids[static_cast<std::size_t>(at)] = r.segments[p];
    }
    batch.lengths.push_back(static_cast<int>(r.ids.size()));
    batch.text_spans.push_back(r.text);
    batch.empty_text.push_back(r.text.empty());
    batch.csr_slots.push_back(std::move(r.slots));
    batch.texts.push_back(std::move(r.truncated));
  }
  return batch;
}

RowSpec FirstSegment(const TokenizedText& text, int budget, TruncationSide side, const WordPieceTokenizer& tok) {
  RowSpec r;
  r.truncated = Truncate(text, budget, side);
  r.ids.push_back(tok.cls_id());
  r.ids.insert(r.ids.end(), r.truncated.ids.begin(), r.truncated.ids.end());
  r.text = {1, 1 + static_cast<int>(r.truncated.size())};
  r.ids.push_back(tok.sep_id());
  r.segments.assign(r.ids.size(), 0);
  return r;
}

std::map<std::string, std::string> ParseOptions(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("encoder option without '=': " + item);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

}  // namespace

ag::Mat CsrSet::EmbeddingMatrix() const {
  if (classes.empty()) return {};
  ag::Mat m(num_classes(), classes.front().embedding.size());
  for (int k = 0; k < num_classes(); ++k) {
    if (classes[static_cast<std::size_t>(k)].embedding.size() != m.cols()) {
      throw ConfigError("CSR embeddings have inconsistent widths");
    }
    m.row(k) = classes[static_cast<std::size_t>(k)].embedding.transpose();
  }
  return m;
}

void EncoderConfig::Validate() const {
  if (vocab_size <= 0) throw ConfigError("encoder vocab_size must be positive");
  if (hidden <= 0) throw ConfigError("encoder hidden must be positive");
  if (num_heads <= 0 || hidden % num_heads != 0) throw ConfigError("encoder num_heads must divide hidden");
  if (num_layers <= 0 || intermediate <= 0 || max_positions <= 0 || type_vocab < 2) {
    throw ConfigError("encoder layers/intermediate/max_positions/type_vocab invalid");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder dropout must be in [0, 1)");
}

nlohmann::json EncoderConfig::ToJson() const {
  return {{"vocab_size", vocab_size},   {"hidden", hidden},
          {"num_layers", num_layers},   {"num_heads", num_heads},
          {"intermediate", intermediate}, {"max_positions", max_positions},
          {"type_vocab", type_vocab},   {"layer_norm_eps", layer_norm_eps},
          {"dropout", dropout},         {"init_std", init_std}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.intermediate = j.at("intermediate").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.type_vocab = j.value("type_vocab", 2);
  c.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
  c.dropout = j.value("dropout", 0.1);
  c.init_std = j.value("init_std", 0.02);
  return c;
}

int TextBudget(int max_len, int num_slots) {
  const int specials = num_slots > 0 ? 3 : 2;
  return std::max(0, max_len - specials - num_slots);
}

TokenizedText Truncate(const TokenizedText& text, int budget, TruncationSide side) {
  if (static_cast<int>(text.size()) <= budget) return text;
  TokenizedText out;
  out.words = text.words;
  const std::size_t keep = static_cast<std::size_t>(std::max(budget, 0));
  const std::size_t first = side == TruncationSide::kLeading ? 0 : text.size() - keep;
  out.ids.assign(text.ids.begin() + static_cast<std::ptrdiff_t>(first),
                 text.ids.begin() + static_cast<std::ptrdiff_t>(first + keep));
  out.word_of_piece.assign(text.word_of_piece.begin() + static_cast<std::ptrdiff_t>(first),
                           text.word_of_piece.begin() + static_cast<std::ptrdiff_t>(first + keep));
  return out;
}

EncodedBatch EncodeWithCsr(std::span<const TokenizedText> texts, const CsrSet& csr,
                           const WordPieceTokenizer& tokenizer, int max_len, TruncationSide side) {
  const int k = csr.num_classes();
  if (k < 1) throw ConfigError("EncodeWithCsr needs at least one CSR");
  ag::Mat emb = csr.EmbeddingMatrix();
  if (emb.cols() == 0) throw ConfigError("CSR embedding is empty");
  const int budget = TextBudget(max_len, k);
  std::vector<RowSpec> rows;
  rows.reserve(texts.size());
  for (const auto& t : texts) {
    RowSpec r = FirstSegment(t, budget, side, tokenizer);
    for (int s = 0; s < k; ++s) {
      r.slots.push_back(static_cast<int>(r.ids.size()));
      r.ids.push_back(tokenizer.mask_id());
      r.segments.push_back(1);
    }
    r.ids.push_back(tokenizer.sep_id());
    r.segments.push_back(1);
    rows.push_back(std::move(r));
  }
  EncodedBatch batch = Assemble(std::move(rows), k, tokenizer.pad_id());
  batch.csr_embeddings = std::move(emb);
  batch.csr_version = csr.version;
  return batch;
}

EncodedBatch EncodePlain(std::span<const TokenizedText> texts, const WordPieceTokenizer& tokenizer, int max_len,
                         TruncationSide side) {
  const int budget = TextBudget(max_len, 0);
  std::vector<RowSpec> rows;
  rows.reserve(texts.size());
  for (const auto& t : texts) rows.push_back(FirstSegment(t, budget, side, tokenizer));
  return Assemble(std::move(rows), 0, tokenizer.pad_id());
}

EncodedBatch EncodeWithLiteralGroups(const TokenizedText& text, const std::vector<std::vector<int>>& groups,
                                     const WordPieceTokenizer& tokenizer, int max_len, TruncationSide side,
                                     std::vector<Span>* group_spans) {
  int second = 0;
  for (const auto& g : groups) second += static_cast<int>(g.size());
  const int budget = std::max(0, max_len - 3 - second);
  RowSpec r = FirstSegment(text, budget, side, tokenizer);
  std::vector<Span> spans;
  for (const auto& g : groups) {
    Span s{static_cast<int>(r.ids.size()), 0};
    r.ids.insert(r.ids.end(), g.begin(), g.end());
    s.end = static_cast<int>(r.ids.size());
    spans.push_back(s);
  }
  r.ids.push_back(tokenizer.sep_id());
  r.segments.resize(r.ids.size(), 1);
  if (static_cast<int>(r.ids.size()) > max_len) throw ConfigError("second segment alone exceeds max_len");
  if (group_spans != nullptr) *group_spans = std::move(spans);
  std::vector<RowSpec> rows;
  rows.push_back(std::move(r));
  return Assemble(std::move(rows), 0, tokenizer.pad_id());
}

void Encoder::Allocate() {
  const auto& c = config_;
  auto zeros = [](int r, int cols) { return ag::Parameter(ag::Mat::Zero(r, cols)); };
  auto ones = [](int cols) { return ag::Parameter(ag::Mat::Ones(1, cols)); };
  word_emb_ = zeros(c.vocab_size, c.hidden);
  pos_emb_ = zeros(c.max_positions, c.hidden);
  type_emb_ = zeros(c.type_vocab, c.hidden);
  emb_ln_g_ = ones(c.hidden);
  emb_ln_b_ = zeros(1, c.hidden);
  layers_.clear();
  for (int l = 0; l < c.num_layers; ++l) {
    Layer layer;
    layer.wq = zeros(c.hidden, c.hidden);
    layer.bq = zeros(1, c.hidden);
    layer.wk = zeros(c.hidden, c.hidden);
    layer.bk = zeros(1, c.hidden);
    layer.wv = zeros(c.hidden, c.hidden);
    layer.bv = zeros(1, c.hidden);
    layer.wo = zeros(c.hidden, c.hidden);
    layer.bo = zeros(1, c.hidden);
    layer.ln1_g = ones(c.hidden);
    layer.ln1_b = zeros(1, c.hidden);
    layer.w1 = zeros(c.hidden, c.intermediate);
    layer.b1 = zeros(1, c.intermediate);
    layer.w2 = zeros(c.intermediate, c.hidden);
    layer.b2 = zeros(1, c.hidden);
    layer.ln2_g = ones(c.hidden);
    layer.ln2_b = zeros(1, c.hidden);
    layers_.push_back(layer);
  }
}

Encoder Encoder::RandomInit(const EncoderConfig& config, WordPieceTokenizer tokenizer, std::uint64_t seed) {
  Encoder e;
  e.config_ = config;
  e.config_.vocab_size = static_cast<int>(tokenizer.vocab_size());
  e.config_.Validate();
  e.tokenizer_ = std::move(tokenizer);
  e.Allocate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, e.config_.init_std);
  for (auto& [name, p] : e.NamedParameters()) {
    // Matrices get N(0, std); biases and LayerNorm parameters keep 0 / 1.
    const bool is_weight = name.find("LayerNorm") == std::string::npos && name.find("bias") == std::string::npos;
    if (!is_weight) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = normal(rng);
  }
  e.word_emb_->value.row(e.tokenizer_.pad_id()).setZero();
  return e;
}

std::vector<std::pair<std::string, ag::Var>> Encoder::NamedParameters() const {
  std::vector<std::pair<std::string, ag::Var>> out = {
      {"embeddings.word_embeddings.weight", word_emb_},
      {"embeddings.position_embeddings.weight", pos_emb_},
      {"embeddings.token_type_embeddings.weight", type_emb_},
      {"embeddings.LayerNorm.weight", emb_ln_g_},
      {"embeddings.LayerNorm.bias", emb_ln_b_},
  };
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "encoder.layer." + std::to_string(l) + ".";
    const Layer& L = layers_[l];
    out.insert(out.end(), {
        {p + "attention.self.query.weight", L.wq}, {p + "attention.self.query.bias", L.bq},
        {p + "attention.self.key.weight", L.wk},   {p + "attention.self.key.bias", L.bk},
        {p + "attention.self.value.weight", L.wv}, {p + "attention.self.value.bias", L.bv},
        {p + "attention.output.dense.weight", L.wo}, {p + "attention.output.dense.bias", L.bo},
        {p + "attention.output.LayerNorm.weight", L.ln1_g}, {p + "attention.output.LayerNorm.bias", L.ln1_b},
        {p + "intermediate.dense.weight", L.w1},   {p + "intermediate.dense.bias", L.b1},
        {p + "output.dense.weight", L.w2},         {p + "output.dense.bias", L.b2},
        {p + "output.LayerNorm.weight", L.ln2_g},  {p + "output.LayerNorm.bias", L.ln2_b},
    });
  }
  return out;
}

std::vector<ag::Var> Encoder::Parameters() const {
  std::vector<ag::Var> out;
  for (auto& [name, p] : NamedParameters()) out.push_back(p);
  return out;
}

void Encoder::LoadParameters(const std::map<std::string, ag::Mat>& tensors) {
  for (auto& [name, p] : NamedParameters()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConfigError("checkpoint is missing tensor " + name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw ConfigError("checkpoint tensor " + name + " has the wrong shape");
    }
    p->value = it->second;
  }
}

Encoder Encoder::Load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream cfg(fs::path(dir) / "config.json");
  if (!cfg) throw ConfigError("no config.json in encoder directory " + dir);
  Encoder e;
  e.config_ = EncoderConfig::FromJson(nlohmann::json::parse(cfg));
  e.tokenizer_ = WordPieceTokenizer::FromFile((fs::path(dir) / "vocab.txt").string());
  if (static_cast<int>(e.tokenizer_.vocab_size()) != e.config_.vocab_size) {
    throw ConfigError("vocab.txt size does not match config vocab_size in " + dir);
  }
  e.config_.Validate();
  e.Allocate();
  e.LoadParameters(ReadTensorFile((fs::path(dir) / "weights.pcmt").string()).tensors);
  return e;
}

void Encoder::Save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream cfg(fs::path(dir) / "config.json");
  cfg << config_.ToJson().dump(2) << '\n';
  tokenizer_.Save((fs::path(dir) / "vocab.txt").string());
  std::vector<std::pair<std::string, const ag::Mat*>> tensors;
  const auto named = NamedParameters();
  for (const auto& [name, p] : named) tensors.emplace_back(name, &p->value);
  WriteTensorFile((fs::path(dir) / "weights.pcmt").string(), {{"kind", "encoder"}}, tensors);
}

Encoder Encoder::Clone() const {
  Encoder e;
  e.config_ = config_;
  e.tokenizer_ = tokenizer_;
  e.Allocate();
  const auto src = NamedParameters();
  const auto dst = e.NamedParameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].second->value = src[i].second->value;
  return e;
}

EncoderOutput Encoder::Forward(const EncodedBatch& batch, ForwardMode mode) const {
  if (batch.seq_len > config_.max_positions) {
    throw ConfigError("sequence length " + std::to_string(batch.seq_len) + " exceeds max positions " +
                      std::to_string(config_.max_positions));
  }
  if (batch.num_slots > 0 && batch.csr_embeddings.cols() != config_.hidden) {
    throw ConfigError("CSR embedding width does not match the encoder hidden size");
  }
  ag::Tape* tape = mode.tape;
  const int rows = batch.batch_size * batch.seq_len;

  std::vector<int> positions(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) positions[static_cast<std::size_t>(r)] = r % batch.seq_len;

  ag::Var x = ag::GatherRows(tape, word_emb_, batch.token_ids);
  if (batch.num_slots > 0) {
    std::vector<int> slot_rows;
    ag::Mat values(batch.batch_size * batch.num_slots, config_.hidden);
    for (int b = 0; b < batch.batch_size; ++b) {
      for (int k = 0; k < batch.num_slots; ++k) {
        slot_rows.push_back(batch.At(b, batch.csr_slots[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)]));
        values.row(b * batch.num_slots + k) = batch.csr_embeddings.row(k);
      }
    }
    x = ag::OverrideRows(tape, x, slot_rows, values);
  }
  x = ag::Add(tape, x, ag::GatherRows(tape, pos_emb_, positions));
  x = ag::Add(tape, x, ag::GatherRows(tape, type_emb_, batch.segment_ids));
  x = ag::LayerNorm(tape, x, emb_ln_g_, emb_ln_b_, config_.layer_norm_eps);
  x = ag::Dropout(tape, x, config_.dropout, mode.dropout_rng);

  EncoderOutput out;
  out.batch_size = batch.batch_size;
  out.seq_len = batch.seq_len;
  out.num_heads = config_.num_heads;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const bool last = l + 1 == layers_.size();
    ag::Var q = ag::Linear(tape, x, L.wq, L.bq);
    ag::Var k = ag::Linear(tape, x, L.wk, L.bk);
    ag::Var v = ag::Linear(tape, x, L.wv, L.bv);
    ag::Var ctx = ag::MultiHeadAttention(tape, q, k, v, batch.lengths, batch.seq_len, config_.num_heads,
                                         last ? &out.last_attention : nullptr);
    ag::Var attn = ag::Dropout(tape, ag::Linear(tape, ctx, L.wo, L.bo), config_.dropout, mode.dropout_rng);
    x = ag::LayerNorm(tape, ag::Add(tape, attn, x), L.ln1_g, L.ln1_b, config_.layer_norm_eps);
    ag::Var h = ag::Gelu(tape, ag::Linear(tape, x, L.w1, L.b1));
    ag::Var ffn = ag::Dropout(tape, ag::Linear(tape, h, L.w2, L.b2), config_.dropout, mode.dropout_rng);
    x = ag::LayerNorm(tape, ag::Add(tape, ffn, x), L.ln2_g, L.ln2_b, config_.layer_norm_eps);
  }
  out.token_features = x;
  return out;
}

ag::Var SentenceRepresentation(ag::Tape* tape, const EncoderOutput& output, const EncodedBatch& batch,
                               std::vector<int>* empty_rows) {
  std::vector<ag::RowRange> ranges;
  for (int b = 0; b < batch.batch_size; ++b) {
    const Span s = batch.text_spans[static_cast<std::size_t>(b)];
    if (s.empty() && empty_rows != nullptr) empty_rows->push_back(b);
    ranges.push_back({batch.At(b, s.begin), batch.At(b, s.begin) + std::max(0, s.size())});
  }
  return ag::RangeMean(tape, output.token_features, ranges);
}

std::string DefaultCacheDir() {
  if (const char* env = std::getenv("PCM_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  if (const char* home = std::getenv("HOME"); home != nullptr) return std::string(home) + "/.cache/pcm";
  return ".cache/pcm";
}

Encoder ResolveEncoder(const std::string& id, const std::string& cache_dir,
                       std::span<const std::string> vocab_texts) {
  namespace fs = std::filesystem;
  constexpr std::string_view kRandom = "random:";
  if (id.rfind(kRandom, 0) == 0 || id == "random") {
    const auto opts = ParseOptions(id.size() > kRandom.size() ? id.substr(kRandom.size()) : "");
    EncoderConfig c;
    std::uint64_t seed = 1234;
    for (const auto& [key, value] : opts) {
      if (key == "layers") c.num_layers = std::stoi(value);
      else if (key == "hidden") c.hidden = std::stoi(value);
      else if (key == "heads") c.num_heads = std::stoi(value);
      else if (key == "ffn") c.intermediate = std::stoi(value);
      else if (key == "max_pos") c.max_positions = std::stoi(value);
      else if (key == "dropout") c.dropout = std::stod(value);
      else if (key == "seed") seed = std::stoull(value);
      else throw ConfigError("unknown random-encoder option " + key);
    }
    return Encoder::RandomInit(c, WordPieceTokenizer::BuildWordLevel(vocab_texts), seed);
  }
  if (fs::is_directory(id)) return Encoder::Load(id);
  const fs::path cached = fs::path(cache_dir) / id;
  if (fs::is_directory(cached)) return Encoder::Load(cached.string());
  throw ConfigError("encoder '" + id + "' not found as a directory or under " + cache_dir +
                    " (export one with scripts/export_hf_bert.py)");
}

}  // namespace pcm
