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

#ifndef PCM_CSR_TYPES_H_
#define PCM_CSR_TYPES_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcm/autograd.h"

namespace pcm {

enum class WordSource { kLabeled, kUnlabeled };

struct CsrWord {
  std::string word;
  double score = 0.0;
  WordSource source = WordSource::kLabeled;
};

// Class semantic representation: the attention-mined words of one class and
// the mean input embedding of all their pieces.
struct ClassSemanticRepresentation {
  int class_id = 0;
  std::vector<CsrWord> words;
  Eigen::VectorXd embedding;
  int version = 0;
};

// The active representations of all K classes. Immutable once built; an
// update produces a new set with version + 1.
struct CsrSet {
  int version = 0;
  // Validation qualifying count that triggered this version (0 for the
  // initial set).
  int qualifying_count = 0;
  std::vector<ClassSemanticRepresentation> classes;

  int num_classes() const { return static_cast<int>(classes.size()); }
  // K x embedding-dim, row k = classes[k].embedding.
  ag::Mat EmbeddingMatrix() const;
};

}  // namespace pcm

#endif  // PCM_CSR_TYPES_H_
