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

// Synthetic keyword-planted topical corpus for desk-scale runs.

#ifndef PCM_FIXTURE_H_
#define PCM_FIXTURE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pcm/data.h"

namespace pcm {

struct FixtureOptions {
  int num_classes = 4;
  int keywords_per_class = 40;
  int filler_words = 400;
  int train_size = 212;  // 12 labels + a 200-sentence pool at 3 per class
  int test_size = 400;
  int min_words = 6;
  int max_words = 10;
  int keywords_per_sentence = 2;
  double zipf_exponent = 1.0;  // keyword rank-frequency exponent
  double stopword_rate = 0.3;  // chance each filler slot is a stop word
  std::uint64_t seed = 7;
};

struct Fixture {
  Corpus train;  // split kTrainLabeled; subsample to get the labeled set
  Corpus test;
  std::vector<std::vector<std::string>> keywords;  // per class, by frequency rank
};

// Every sentence carries `keywords_per_sentence` Zipf-drawn keywords of its
// class among class-neutral filler and stop words. Classes are balanced.
Fixture MakeKeywordFixture(const FixtureOptions& options = {});

}  // namespace pcm

#endif  // PCM_FIXTURE_H_
