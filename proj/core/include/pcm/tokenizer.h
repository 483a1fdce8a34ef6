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

#ifndef PCM_TOKENIZER_H_
#define PCM_TOKENIZER_H_

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pcm {

// A sentence split into words and then into vocabulary pieces. Every piece
// knows which word it came from, which is what lets attention mass on
// pieces be folded back into word-level scores.
struct TokenizedText {
  std::vector<std::string> words;
  std::vector<int> ids;
  std::vector<int> word_of_piece;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

// Lower-cased BERT-style pre-tokenization followed by greedy longest-match
// WordPiece. Continuation pieces carry the "##" prefix in the vocabulary.
class WordPieceTokenizer {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kMask = "[MASK]";

  WordPieceTokenizer() = default;
  explicit WordPieceTokenizer(std::vector<std::string> vocab);

  static WordPieceTokenizer FromFile(const std::string& path);
  // Specials first, then the distinct words of `texts` in sorted order.
  static WordPieceTokenizer BuildWordLevel(std::span<const std::string> texts);

  void Save(const std::string& path) const;

  // Lower-cases and splits on whitespace and ASCII punctuation.
  static std::vector<std::string> BasicTokenize(std::string_view text);

  TokenizedText Tokenize(std::string_view text) const;
  std::vector<int> WordPieces(std::string_view word) const;
  std::string Detokenize(std::span<const int> ids) const;

  int Id(std::string_view token) const;  // -1 when absent
  const std::string& Token(int id) const { return vocab_.at(static_cast<std::size_t>(id)); }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }

  int pad_id() const { return pad_id_; }
  int unk_id() const { return unk_id_; }
  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }
  int mask_id() const { return mask_id_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  int pad_id_ = -1, unk_id_ = -1, cls_id_ = -1, sep_id_ = -1, mask_id_ = -1;
};

}  // namespace pcm

#endif  // PCM_TOKENIZER_H_
