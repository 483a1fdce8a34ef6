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

#include "pcm/data.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace pcm {
namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string> SplitTabs(const std::string& line, std::size_t max_fields) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (out.size() + 1 < max_fields) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) break;
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

void StripCr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> Words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrainLabeled: return "train-labeled";
    case Split::kTrainUnlabeled: return "train-unlabeled";
    case Split::kValidationUnlabeled: return "validation-unlabeled";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::optional<CorpusInfo> FindCorpusInfo(std::string_view name) {
  std::string key;
  for (char c : Lower(name)) {
    if (std::isalnum(static_cast<unsigned char>(c))) key += c;
  }
  if (key == "agnews" || key == "ag") return CorpusInfo{"ag_news", 4, 20000, 7600, TruncationSide::kLeading};
  if (key == "dbpedia") return CorpusInfo{"dbpedia", 14, 70000, 70000, TruncationSide::kLeading};
  if (key == "yahoo" || key == "yahooanswers") {
    return CorpusInfo{"yahoo", 10, 50000, 60000, TruncationSide::kLeading};
  }
  if (key == "imdb") return CorpusInfo{"imdb", 2, 10000, 25000, TruncationSide::kTrailing};
  return std::nullopt;
}

Corpus LoadCorpus(const std::string& path, std::string_view name, Split split, int num_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("corpus file " + path + " is empty");
  StripCr(header);
  const std::vector<std::string> columns = SplitTabs(header, 2);
  bool labeled = false;
  if (columns.size() == 2 && Lower(columns[0]) == "label" && Lower(columns[1]) == "text") {
    labeled = true;
  } else if (!(columns.size() == 1 && Lower(columns[0]) == "text")) {
    throw DataError("corpus file " + path + ": header must be 'label<TAB>text' or 'text'");
  }

  Corpus corpus;
  corpus.name = std::string(name);
  corpus.split = split;
  std::vector<std::string> bad_rows;
  std::string line;
  long row = 1;
  std::vector<long> raw_labels;
  std::vector<long> label_rows;
  while (std::getline(in, line)) {
    ++row;
    StripCr(line);
    if (line.empty()) continue;
    if (!labeled) {
      corpus.texts.push_back(line);
      continue;
    }
    const std::vector<std::string> fields = SplitTabs(line, 2);
    long label = -1;
    const std::string& f = fields[0];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
    if (fields.size() != 2 || ec != std::errc() || ptr != f.data() + f.size() || label < 0) {
      bad_rows.push_back("row " + std::to_string(row) + " ('" + f + "')");
      continue;
    }
    raw_labels.push_back(label);
    label_rows.push_back(row);
    corpus.texts.push_back(fields[1]);
  }
  if (corpus.texts.empty() && bad_rows.empty()) throw DataError("corpus file " + path + " has no rows");

  const auto info = FindCorpusInfo(name);
  long k = info ? info->num_classes : num_classes;
  if (info && num_classes > 0 && num_classes != info->num_classes) {
    throw DataError("corpus " + corpus.name + " has " + std::to_string(info->num_classes) + " classes, not " +
                    std::to_string(num_classes));
  }
  if (k <= 0 && !raw_labels.empty()) k = *std::max_element(raw_labels.begin(), raw_labels.end()) + 1;
  corpus.num_classes = static_cast<int>(k);

  if (labeled) {
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      if (raw_labels[i] >= k) {
        bad_rows.push_back("row " + std::to_string(label_rows[i]) + " ('" + std::to_string(raw_labels[i]) + "')");
      }
    }
    if (!bad_rows.empty()) {
      std::string msg = "corpus file " + path + ": labels outside [0, " + std::to_string(k) + ") at";
      for (std::size_t j = 0; j < bad_rows.size() && j < 20; ++j) msg += (j ? ", " : " ") + bad_rows[j];
      if (bad_rows.size() > 20) msg += ", ... (" + std::to_string(bad_rows.size()) + " total)";
      throw DataError(msg);
    }
    const bool keep = split == Split::kTrainLabeled || split == Split::kTest;
    if (keep) corpus.labels.assign(raw_labels.begin(), raw_labels.end());
  }
  if ((split == Split::kTrainLabeled || split == Split::kTest) && !corpus.has_labels()) {
    throw DataError("corpus file " + path + " has no label column but split " + std::string(SplitName(split)) +
                    " needs labels");
  }
  return corpus;
}

void SaveCorpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << (corpus.has_labels() ? "label\ttext\n" : "text\n");
  for (std::size_t i = 0; i < corpus.texts.size(); ++i) {
    if (corpus.has_labels()) out << corpus.labels[i] << '\t';
    out << corpus.texts[i] << '\n';
  }
}

std::vector<int> SplitManifest::LabeledIndices() const {
  std::vector<int> out;
  for (const auto& cls : labeled) out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

void SplitManifest::Validate() const {
  std::set<int> seen;
  auto add = [&](int i, const char* part) {
    if (i < 0 || i >= source_size) throw DataError(std::string("manifest ") + part + " index out of range");
    if (!seen.insert(i).second) throw DataError(std::string("manifest index repeated in ") + part);
  };
  for (const auto& cls : labeled) {
    if (static_cast<int>(cls.size()) != n_per_class) throw DataError("manifest class is not balanced");
    for (int i : cls) add(i, "labeled");
  }
  for (int i : unlabeled) add(i, "unlabeled");
  for (int i : validation) add(i, "validation");
}

nlohmann::json SplitManifest::ToJson() const {
  return {{"seed", seed},           {"n_per_class", n_per_class}, {"source_size", source_size},
          {"labeled", labeled},     {"unlabeled", unlabeled},     {"validation", validation}};
}

SplitManifest SplitManifest::FromJson(const nlohmann::json& j) {
  SplitManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_per_class = j.at("n_per_class").get<int>();
  m.source_size = j.at("source_size").get<long>();
  m.labeled = j.at("labeled").get<std::vector<std::vector<int>>>();
  m.unlabeled = j.at("unlabeled").get<std::vector<int>>();
  m.validation = j.at("validation").get<std::vector<int>>();
  m.Validate();
  return m;
}

SplitManifest SubsampleLabels(const Corpus& train, int n_per_class, std::uint64_t seed,
                              const SubsampleOptions& options) {
  if (!train.has_labels()) throw DataError("label subsampling needs a labeled corpus");
  if (n_per_class <= 0) throw DataError("labels per class must be positive");
  if (options.validation_fraction < 0.0 || options.validation_fraction >= 1.0) {
    throw DataError("validation fraction must be in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  SplitManifest m;
  m.seed = seed;
  m.n_per_class = n_per_class;
  m.source_size = static_cast<long>(train.size());
  m.labeled.resize(static_cast<std::size_t>(train.num_classes));

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(train.num_classes));
  for (std::size_t i = 0; i < train.size(); ++i) by_class[static_cast<std::size_t>(train.labels[i])].push_back(static_cast<int>(i));
  std::vector<char> taken(train.size(), 0);
  for (int k = 0; k < train.num_classes; ++k) {
    auto& members = by_class[static_cast<std::size_t>(k)];
    if (static_cast<int>(members.size()) < n_per_class) {
      throw DataError("class " + std::to_string(k) + " has " + std::to_string(members.size()) +
                      " training samples, fewer than " + std::to_string(n_per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(static_cast<std::size_t>(n_per_class));
    std::sort(members.begin(), members.end());
    for (int i : members) taken[static_cast<std::size_t>(i)] = 1;
    m.labeled[static_cast<std::size_t>(k)] = members;
  }

  std::vector<int> rest;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!taken[i]) rest.push_back(static_cast<int>(i));
  }
  // A separate stream keeps the pool order independent of n_per_class.
  std::mt19937_64 pool_rng(seed ^ 0x5bd1e995ULL);
  std::shuffle(rest.begin(), rest.end(), pool_rng);
  if (options.pool_cap > 0 && static_cast<long>(rest.size()) > options.pool_cap) {
    rest.resize(static_cast<std::size_t>(options.pool_cap));
  }
  const auto n_val = static_cast<std::size_t>(std::lround(options.validation_fraction * static_cast<double>(rest.size())));
  m.validation.assign(rest.begin(), rest.begin() + static_cast<long>(n_val));
  m.unlabeled.assign(rest.begin() + static_cast<long>(n_val), rest.end());
  m.Validate();
  return m;
}

ManifestSplits ApplyManifest(const Corpus& train, const SplitManifest& manifest) {
  if (manifest.source_size != static_cast<long>(train.size())) {
    throw DataError("manifest was built for a corpus of " + std::to_string(manifest.source_size) + " rows, got " +
                    std::to_string(train.size()));
  }
  ManifestSplits s;
  for (Corpus* c : {&s.labeled, &s.unlabeled, &s.validation}) {
    c->name = train.name;
    c->num_classes = train.num_classes;
  }
  s.labeled.split = Split::kTrainLabeled;
  s.unlabeled.split = Split::kTrainUnlabeled;
  s.validation.split = Split::kValidationUnlabeled;
  for (int i : manifest.LabeledIndices()) {
    s.labeled.texts.push_back(train.texts[static_cast<std::size_t>(i)]);
    s.labeled.labels.push_back(train.labels[static_cast<std::size_t>(i)]);
  }
  for (int i : manifest.unlabeled) s.unlabeled.texts.push_back(train.texts[static_cast<std::size_t>(i)]);
  for (int i : manifest.validation) s.validation.texts.push_back(train.texts[static_cast<std::size_t>(i)]);
  return s;
}

TruncationSide TruncationSideFor(std::string_view corpus_name) {
  const auto info = FindCorpusInfo(corpus_name);
  return info ? info->side : TruncationSide::kLeading;
}

TokenizedText TruncateForCorpus(const TokenizedText& text, std::string_view corpus_name, int max_len,
                                int num_slots) {
  return Truncate(text, TextBudget(max_len, num_slots), TruncationSideFor(corpus_name));
}

std::vector<AugmentedPair> LoadAugmentations(const std::string& path, std::size_t expected_rows,
                                             std::string_view default_source) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open augmentation file " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("augmentation file " + path + " is empty");
  StripCr(header);
  std::vector<std::string> columns = SplitTabs(header, 3);
  for (auto& c : columns) c = Lower(c);
  int col_original = -1, col_augmented = -1, col_source = -1;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == "original") col_original = static_cast<int>(i);
    if (columns[i] == "augmented") col_augmented = static_cast<int>(i);
    if (columns[i] == "source") col_source = static_cast<int>(i);
  }
  if (col_augmented < 0) throw DataError("augmentation file " + path + " lacks an 'augmented' column");

  std::vector<AugmentedPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    StripCr(line);
    const std::vector<std::string> f = SplitTabs(line, columns.size());
    if (f.size() != columns.size()) {
      throw DataError("augmentation file " + path + ": row " + std::to_string(pairs.size() + 2) + " has " +
                      std::to_string(f.size()) + " fields, expected " + std::to_string(columns.size()));
    }
    AugmentedPair p;
    p.augmented = f[static_cast<std::size_t>(col_augmented)];
    if (col_original >= 0) p.original = f[static_cast<std::size_t>(col_original)];
    p.source = col_source >= 0 ? f[static_cast<std::size_t>(col_source)] : std::string(default_source);
    pairs.push_back(std::move(p));
  }
  if (pairs.size() != expected_rows) {
    throw DataError("augmentation file " + path + " has " + std::to_string(pairs.size()) +
                    " rows but the corpus has " + std::to_string(expected_rows));
  }
  return pairs;
}

AugmentedPair FallbackAugment(const std::string& text, std::uint64_t seed, const FallbackOptions& options) {
  if (options.dropout < 0.0 || options.dropout > 0.1) throw DataError("fallback dropout must be in [0, 0.1]");
  if (options.shuffle_window < 1 || options.shuffle_window > 3) throw DataError("fallback shuffle window must be in [1, 3]");
  if (text.empty()) throw DataError("cannot augment an empty text");
  std::mt19937_64 rng(seed ^ Fnv1a(text));
  const std::vector<std::string> words = Words(text);

  std::bernoulli_distribution drop(options.dropout);
  std::vector<std::string> kept;
  for (const auto& w : words) {
    if (!drop(rng)) kept.push_back(w);
  }
  if (kept.empty()) kept = words;

  // Each word moves to sort key i + u, u ~ U[0, window): displacement < window.
  std::uniform_real_distribution<double> jitter(0.0, static_cast<double>(options.shuffle_window));
  std::vector<std::pair<double, std::size_t>> keys;
  for (std::size_t i = 0; i < kept.size(); ++i) keys.emplace_back(static_cast<double>(i) + jitter(rng), i);
  std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  AugmentedPair p;
  p.original = text;
  p.source = "fallback";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i) p.augmented += ' ';
    p.augmented += kept[keys[i].second];
  }
  return p;
}

}  // namespace pcm
