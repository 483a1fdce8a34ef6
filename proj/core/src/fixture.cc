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

#include "pcm/fixture.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pcm/csr.h"

namespace pcm {
namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};

// Pronounceable pseudo-words, unique across the whole fixture.
std::vector<std::string> MakeWords(int count, std::mt19937_64& rng, std::set<std::string>& used,
                                   const StopWords& stop) {
  std::uniform_int_distribution<int> onset(0, std::size(kOnsets) - 1);
  std::uniform_int_distribution<int> vowel(0, std::size(kVowels) - 1);
  std::uniform_int_distribution<int> syllables(2, 3);
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string w;
    for (int s = syllables(rng); s > 0; --s) w += std::string(kOnsets[onset(rng)]) + kVowels[vowel(rng)];
    if (stop.Rejects(w) || !used.insert(w).second) continue;
    out.push_back(w);
  }
  return out;
}

}  // namespace

Fixture MakeKeywordFixture(const FixtureOptions& options) {
  if (options.num_classes < 2 || options.keywords_per_class < 1 || options.filler_words < 1 ||
      options.min_words < options.keywords_per_sentence || options.max_words < options.min_words) {
    throw DataError("invalid fixture options");
  }
  std::mt19937_64 rng(options.seed);
  const StopWords& stop = StopWords::English();
  std::set<std::string> used;

  Fixture f;
  for (int k = 0; k < options.num_classes; ++k) f.keywords.push_back(MakeWords(options.keywords_per_class, rng, used, stop));
  const std::vector<std::string> filler = MakeWords(options.filler_words, rng, used, stop);
  const std::vector<std::string> stop_pool = {"the", "a", "of", "and", "to", "in", "is", "was", "for", "on", "with", "it"};

  std::vector<double> weights;
  for (int r = 1; r <= options.keywords_per_class; ++r) weights.push_back(1.0 / std::pow(r, options.zipf_exponent));
  std::discrete_distribution<int> keyword_rank(weights.begin(), weights.end());
  std::uniform_int_distribution<int> length(options.min_words, options.max_words);
  std::uniform_int_distribution<std::size_t> filler_pick(0, filler.size() - 1);
  std::uniform_int_distribution<std::size_t> stop_pick(0, stop_pool.size() - 1);
  std::bernoulli_distribution is_stop(options.stopword_rate);

  auto sentence = [&](int cls) {
    const int n = length(rng);
    std::vector<std::string> words;
    for (int i = 0; i < n - options.keywords_per_sentence; ++i) {
      words.push_back(is_stop(rng) ? stop_pool[stop_pick(rng)] : filler[filler_pick(rng)]);
    }
    for (int i = 0; i < options.keywords_per_sentence; ++i) {
      std::uniform_int_distribution<std::size_t> at(0, words.size());
      words.insert(words.begin() + static_cast<long>(at(rng)),
                   f.keywords[static_cast<std::size_t>(cls)][static_cast<std::size_t>(keyword_rank(rng))]);
    }
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) text += (i ? " " : "") + words[i];
    return text;
  };

  auto fill = [&](Corpus& c, int size, Split split) {
    c.name = "fixture";
    c.split = split;
    c.num_classes = options.num_classes;
    std::vector<int> labels;
    for (int i = 0; i < size; ++i) labels.push_back(i % options.num_classes);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (int label : labels) {
      c.texts.push_back(sentence(label));
      c.labels.push_back(label);
    }
  };
  fill(f.train, options.train_size, Split::kTrainLabeled);
  fill(f.test, options.test_size, Split::kTest);
  return f;
}

}  // namespace pcm
