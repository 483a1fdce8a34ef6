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

// Corpus ingestion, label subsampling, augmentation pairs and truncation.

#ifndef PCM_DATA_H_
#define PCM_DATA_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/encoder.h"

namespace pcm {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { kTrainLabeled, kTrainUnlabeled, kValidationUnlabeled, kTest };

std::string_view SplitName(Split split);

struct CorpusInfo {
  std::string name;
  int num_classes = 0;
  long unlabeled_size = 0;
  long test_size = 0;
  TruncationSide side = TruncationSide::kLeading;
};

// Known benchmark corpora, matched case-insensitively ("ag_news", "dbpedia",
// "yahoo", "imdb" and a few spellings of each).
std::optional<CorpusInfo> FindCorpusInfo(std::string_view name);

struct Corpus {
  std::string name;
  Split split = Split::kTrainLabeled;
  int num_classes = 0;
  std::vector<std::string> texts;
  std::vector<int> labels;  // empty for unlabeled splits

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return texts.size(); }
};

// Reads a tab-separated file whose header names the columns: "label<TAB>text"
// or "text". Labels must be integers in [0, K); K comes from the known-corpus
// table, then `num_classes` if positive, else max label + 1.
Corpus LoadCorpus(const std::string& path, std::string_view name, Split split, int num_classes = 0);

// Writes the same format LoadCorpus reads.
void SaveCorpus(const Corpus& corpus, const std::string& path);

struct SplitManifest {
  std::uint64_t seed = 0;
  int n_per_class = 0;
  long source_size = 0;
  std::vector<std::vector<int>> labeled;  // per class, indices into the source
  std::vector<int> unlabeled;
  std::vector<int> validation;

  std::vector<int> LabeledIndices() const;
  // Throws DataError unless splits are disjoint, in range and class-balanced.
  void Validate() const;
  nlohmann::json ToJson() const;
  static SplitManifest FromJson(const nlohmann::json& j);
};

struct SubsampleOptions {
  long pool_cap = 0;               // 0 keeps every remaining sample
  double validation_fraction = 0.1;
};

// Seeded, class-balanced draw of n labeled samples per class. The remainder,
// shuffled and optionally capped, forms the unlabeled pool, of which
// `validation_fraction` becomes the unlabeled validation set. Pools for
// increasing caps under one seed are nested.
SplitManifest SubsampleLabels(const Corpus& train, int n_per_class, std::uint64_t seed,
                              const SubsampleOptions& options = {});

struct ManifestSplits {
  Corpus labeled;
  Corpus unlabeled;
  Corpus validation;
};
ManifestSplits ApplyManifest(const Corpus& train, const SplitManifest& manifest);

// IMDB keeps the trailing window, all other corpora the leading one.
TruncationSide TruncationSideFor(std::string_view corpus_name);
TokenizedText TruncateForCorpus(const TokenizedText& text, std::string_view corpus_name, int max_len,
                                int num_slots);

struct AugmentedPair {
  std::string original;
  std::string augmented;
  std::string source;  // pivot language tag or "fallback"
};

// Tab-separated with header "augmented", "original<TAB>augmented" or
// additionally "source". Row i pairs with row i of the source corpus; a count
// mismatch with `expected_rows` throws and reports both lengths.
std::vector<AugmentedPair> LoadAugmentations(const std::string& path, std::size_t expected_rows,
                                             std::string_view default_source = "file");

struct FallbackOptions {
  double dropout = 0.1;  // per-word drop probability, at most 0.1
  int shuffle_window = 3;  // maximum displacement bound, 1..3; 1 keeps order
};

// Deterministic word-level perturbation for fixtures: word dropout followed by
// a local shuffle. Identical text and seed give identical output.
AugmentedPair FallbackAugment(const std::string& text, std::uint64_t seed, const FallbackOptions& options = {});

}  // namespace pcm

#endif  // PCM_DATA_H_
