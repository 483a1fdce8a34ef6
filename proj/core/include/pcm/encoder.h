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

#ifndef PCM_ENCODER_H_
#define PCM_ENCODER_H_

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/autograd.h"
#include "pcm/csr_types.h"
#include "pcm/tokenizer.h"

namespace pcm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape of a BERT-style encoder. Doubles as the handle the rest of the
// system sees for "which pretrained model is loaded".
struct EncoderConfig {
  int vocab_size = 0;
  int hidden = 128;
  int num_layers = 2;
  int num_heads = 2;
  int intermediate = 512;
  int max_positions = 512;
  int type_vocab = 2;
  double layer_norm_eps = 1e-12;
  double dropout = 0.1;
  double init_std = 0.02;

  void Validate() const;
  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
};

enum class TruncationSide { kLeading, kTrailing };

// Position range inside one row, half-open.
struct Span {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
};

// "[CLS] text [SEP] slot_1 .. slot_K [SEP]" rows padded to a common length.
// Rows without CSR slots use "[CLS] text [SEP]". Padding always trails, so
// row b is unmasked exactly on [0, lengths[b]).
struct EncodedBatch {
  int batch_size = 0;
  int seq_len = 0;
  int num_slots = 0;
  std::vector<int> token_ids;       // batch_size * seq_len
  std::vector<int> attention_mask;  // 1 = real token
  std::vector<int> segment_ids;
  std::vector<int> lengths;
  std::vector<Span> text_spans;
  std::vector<std::vector<int>> csr_slots;  // num_slots positions per row
  std::vector<bool> empty_text;             // rows whose text span is empty
  ag::Mat csr_embeddings;                   // num_slots x hidden
  int csr_version = -1;                     // -1 when the layout has no slots
  std::vector<TokenizedText> texts;         // the truncated text of each row

  int At(int row, int pos) const { return row * seq_len + pos; }
};

int TextBudget(int max_len, int num_slots);
TokenizedText Truncate(const TokenizedText& text, int budget, TruncationSide side);

EncodedBatch EncodeWithCsr(std::span<const TokenizedText> texts, const CsrSet& csr,
                           const WordPieceTokenizer& tokenizer, int max_len, TruncationSide side);
EncodedBatch EncodePlain(std::span<const TokenizedText> texts, const WordPieceTokenizer& tokenizer,
                         int max_len, TruncationSide side);
// "[CLS] text [SEP] second [SEP]" with literal second-segment pieces.
// `second_spans` receives, per row, the position ranges of each group.
EncodedBatch EncodeWithLiteralGroups(const TokenizedText& text, const std::vector<std::vector<int>>& groups,
                                     const WordPieceTokenizer& tokenizer, int max_len, TruncationSide side,
                                     std::vector<Span>* group_spans);

struct ForwardMode {
  ag::Tape* tape = nullptr;
  // Dropout is active iff this is non-null.
  std::mt19937_64* dropout_rng = nullptr;

  static ForwardMode Eval() { return {}; }
};

struct EncoderOutput {
  ag::Var token_features;  // [batch * seq, hidden]
  // Last layer only; batch * heads matrices of seq x seq, index b * heads + h.
  std::vector<ag::Mat> last_attention;
  int batch_size = 0;
  int seq_len = 0;
  int num_heads = 0;

  const ag::Mat& Attention(int row, int head) const {
    return last_attention[static_cast<std::size_t>(row) * num_heads + head];
  }
};

class Encoder {
 public:
  Encoder() = default;

  static Encoder RandomInit(const EncoderConfig& config, WordPieceTokenizer tokenizer, std::uint64_t seed);
  // Directory with config.json, weights.pcmt and vocab.txt.
  static Encoder Load(const std::string& dir);
  void Save(const std::string& dir) const;
  Encoder Clone() const;

  EncoderOutput Forward(const EncodedBatch& batch, ForwardMode mode) const;

  TokenizedText Tokenize(std::string_view text) const { return tokenizer_.Tokenize(text); }
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }
  const EncoderConfig& config() const { return config_; }
  const ag::Mat& word_embeddings() const { return word_emb_->value; }

  // Names follow the Hugging Face BERT layout; matrices are stored [in, out].
  std::vector<std::pair<std::string, ag::Var>> NamedParameters() const;
  std::vector<ag::Var> Parameters() const;
  void LoadParameters(const std::map<std::string, ag::Mat>& tensors);

 private:
  struct Layer {
    ag::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ag::Var ln1_g, ln1_b;
    ag::Var w1, b1, w2, b2;
    ag::Var ln2_g, ln2_b;
  };

  void Allocate();

  EncoderConfig config_;
  WordPieceTokenizer tokenizer_;
  ag::Var word_emb_, pos_emb_, type_emb_, emb_ln_g_, emb_ln_b_;
  std::vector<Layer> layers_;
};

// Mean of token features over each row's text span; [batch, hidden].
// Rows with an empty span get a zero vector and are listed in `empty_rows`.
ag::Var SentenceRepresentation(ag::Tape* tape, const EncoderOutput& output, const EncodedBatch& batch,
                               std::vector<int>* empty_rows = nullptr);

// Resolves an encoder identifier:
//   "random:key=value,..." builds a randomly initialised encoder whose
//       word-level vocabulary comes from `vocab_texts` (keys: layers, hidden,
//       heads, ffn, max_pos, dropout, seed);
//   an existing directory path is loaded directly;
//   anything else is looked up as <cache_dir>/<id>.
Encoder ResolveEncoder(const std::string& id, const std::string& cache_dir,
                       std::span<const std::string> vocab_texts);
// PCM_CACHE_DIR, else $HOME/.cache/pcm.
std::string DefaultCacheDir();

}  // namespace pcm

#endif  // PCM_ENCODER_H_
