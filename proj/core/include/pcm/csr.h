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

#ifndef PCM_CSR_H_
#define PCM_CSR_H_

#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/csr_types.h"
#include "pcm/encoder.h"

namespace pcm {

// Stop-word filter for mined class words. Punctuation-only and numeric
// tokens are always rejected as well.
class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  // The list shipped in data/stopwords_en.txt.
  static const StopWords& English();
  static StopWords Parse(std::string_view text);
  static StopWords FromFile(const std::string& path);

  bool Rejects(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

enum class ScoreAccumulation {
  kSum,                // frequency-weighted: scores add across occurrences
  kMeanPerOccurrence,  // accumulated score divided by the occurrence count
};

struct WordStats {
  double score = 0.0;
  int count = 0;
  bool from_labeled = false;
};

struct AttentionScoreTable {
  std::vector<std::map<std::string, WordStats>> classes;

  explicit AttentionScoreTable(int num_classes = 0) : classes(static_cast<std::size_t>(num_classes)) {}
  int num_classes() const { return static_cast<int>(classes.size()); }
};

// Attention each position receives in the last layer, averaged over heads and
// over all unmasked query positions. [batch, seq]; masked positions are 0.
ag::Mat TokenAttentionReceived(const EncoderOutput& output, const EncodedBatch& batch);

// Folds per-piece scores of each row's text span into word scores (mean over
// a word's pieces) and adds them to the table under the row's class.
void AccumulateClassWords(AttentionScoreTable& table, const EncodedBatch& batch, std::span<const int> row_classes,
                          const ag::Mat& scores, const StopWords& stopwords, WordSource source);

// Mean input embedding over all pieces of all words.
Eigen::VectorXd CsrEmbedding(std::span<const CsrWord> words, const Encoder& encoder);

// Top-j words per class by score (descending; ties broken by the word,
// ascending). Throws ConfigError naming any class with no scored word.
CsrSet BuildCsr(const AttentionScoreTable& table, int top_j, const Encoder& encoder,
                ScoreAccumulation accumulation = ScoreAccumulation::kSum, int version = 0);

struct MiningOptions {
  int top_j = 75;
  ScoreAccumulation accumulation = ScoreAccumulation::kSum;
  int max_len = 256;
  TruncationSide side = TruncationSide::kLeading;
  int batch_size = 32;
};

// Runs `encoder` in evaluation mode over the sentences and accumulates their
// received attention. With a non-null `layout_csr` rows use the CSR-slot
// layout; otherwise "[CLS] text [SEP]".
void MineSentences(AttentionScoreTable& table, const Encoder& encoder, const CsrSet* layout_csr,
                   std::span<const TokenizedText> texts, std::span<const int> classes, WordSource source,
                   const StopWords& stopwords, const MiningOptions& options);

// Initial CSR from an encoder already fine-tuned as a plain K-way classifier
// on the labeled set. The result has version 0.
CsrSet InitializeCsr(std::span<const TokenizedText> labeled, std::span<const int> labels, int num_classes,
                     const Encoder& finetuned, const StopWords& stopwords, const MiningOptions& options);

struct CsrUpdateInputs {
  std::span<const TokenizedText> labeled;
  std::span<const int> labels;
  std::span<const TokenizedText> qualifying;
  std::span<const int> pseudo_labels;
};

// Re-mines word lists from scratch over labeled + qualifying sentences with
// the current encoder. Word lists are replaced, not merged. A class with no
// contributing sentence keeps its previous words and embedding.
// `retained` receives the ids of such classes.
CsrSet UpdateCsr(const CsrSet& current, const CsrUpdateInputs& inputs, const Encoder& encoder, bool slot_layout,
                 const StopWords& stopwords, const MiningOptions& options, int qualifying_count,
                 std::vector<int>* retained = nullptr);

// Manual seed-word CSR (exploration only).
CsrSet CsrFromSeedWords(const std::vector<std::vector<std::string>>& words, const Encoder& encoder);

// Fires when the number of qualifying validation samples strictly exceeds
// every count seen before. The running maximum starts at 0.
class CsrUpdateTrigger {
 public:
  struct Decision {
    bool should_update = false;
    int qualifying_count = 0;
  };

  Decision Observe(int qualifying_count);
  int running_max() const { return running_max_; }

 private:
  int running_max_ = 0;
};

struct MatchProbeResult {
  std::vector<std::string> tokens;    // text pieces
  std::vector<int> best_class;        // per text piece
  std::vector<double> attention_value;  // per text piece, attention to best class
  ag::Mat attention;                  // pieces x K
  std::vector<double> cosine;         // per class
  std::vector<std::string> class_words;

  nlohmann::json ToJson() const;
};

// "[CLS] text [SEP] w_1 .. w_K [SEP]" with literal class-word pieces through
// an unmodified encoder. Multi-piece (or multi-word) class entries are
// averaged over their pieces.
MatchProbeResult ProbeInherentMatching(const Encoder& encoder, std::string_view text,
                                       const std::vector<std::string>& class_words, int max_len = 256);

nlohmann::json CsrSetToJson(const CsrSet& csr);
CsrSet CsrSetFromJson(const nlohmann::json& j);
void WriteCsrSnapshot(const std::string& path, const CsrSet& csr);
CsrSet ReadCsrSnapshot(const std::string& path);

}  // namespace pcm

#endif  // PCM_CSR_H_
