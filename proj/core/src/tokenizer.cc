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

#include "pcm/tokenizer.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace pcm {
namespace {

constexpr std::size_t kMaxWordChars = 100;

bool IsPunct(unsigned char c) { return std::ispunct(c) != 0; }

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
  pad_id_ = Id(kPad);
  unk_id_ = Id(kUnk);
  cls_id_ = Id(kCls);
  sep_id_ = Id(kSep);
  mask_id_ = Id(kMask);
  if (pad_id_ < 0 || unk_id_ < 0 || cls_id_ < 0 || sep_id_ < 0) {
    throw std::invalid_argument("vocabulary lacks one of [PAD] [UNK] [CLS] [SEP]");
  }
  if (mask_id_ < 0) mask_id_ = unk_id_;
}

WordPieceTokenizer WordPieceTokenizer::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path);
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab));
}

WordPieceTokenizer WordPieceTokenizer::BuildWordLevel(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : BasicTokenize(t)) words.insert(std::move(w));
  }
  std::vector<std::string> vocab = {std::string(kPad), std::string(kUnk), std::string(kCls),
                                    std::string(kSep), std::string(kMask)};
  for (const auto& w : words) {
    if (w.front() != '[') vocab.push_back(w);
  }
  return WordPieceTokenizer(std::move(vocab));
}

void WordPieceTokenizer::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path);
  for (const auto& t : vocab_) out << t << '\n';
}

std::vector<std::string> WordPieceTokenizer::BasicTokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (IsPunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::vector<int> WordPieceTokenizer::WordPieces(std::string_view word) const {
  if (word.size() > kMaxWordChars) return {unk_id_};
  std::vector<int> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    int found = -1;
    while (start < end) {
      std::string candidate(word.substr(start, end - start));
      if (start > 0) candidate.insert(0, "##");
      if (auto it = index_.find(candidate); it != index_.end()) {
        found = it->second;
        break;
      }
      --end;
    }
    if (found < 0) return {unk_id_};
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

TokenizedText WordPieceTokenizer::Tokenize(std::string_view text) const {
  TokenizedText out;
  out.words = BasicTokenize(text);
  for (std::size_t w = 0; w < out.words.size(); ++w) {
    for (int id : WordPieces(out.words[w])) {
      out.ids.push_back(id);
      out.word_of_piece.push_back(static_cast<int>(w));
    }
  }
  return out;
}

std::string WordPieceTokenizer::Detokenize(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    const std::string& tok = Token(id);
    if (tok.rfind("##", 0) == 0) {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += tok;
    }
  }
  return out;
}

int WordPieceTokenizer::Id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

}  // namespace pcm
