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

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pcm/csr.h"

namespace pcm {
namespace internal {
extern const char kEnglishStopWordsText[];
}  // namespace internal

const StopWords& StopWords::English() {
  static const StopWords kEnglish = Parse(internal::kEnglishStopWordsText);
  return kEnglish;
}

StopWords StopWords::Parse(std::string_view text) {
  std::unordered_set<std::string> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    words.insert(line);
  }
  return StopWords(std::move(words));
}

StopWords StopWords::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stop-word file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

bool StopWords::Rejects(std::string_view word) const {
  if (word.empty()) return true;
  bool all_punct = true;
  bool numeric = true;
  for (unsigned char c : word) {
    if (!std::ispunct(c)) all_punct = false;
    if (!std::isdigit(c) && c != '.' && c != ',') numeric = false;
  }
  if (all_punct || numeric) return true;
  return words_.contains(std::string(word));
}

}  // namespace pcm
