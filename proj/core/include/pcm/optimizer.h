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

#ifndef PCM_OPTIMIZER_H_
#define PCM_OPTIMIZER_H_

#include <string>
#include <vector>

#include "pcm/autograd.h"

namespace pcm {

struct ParamGroup {
  std::string name;
  std::vector<ag::Var> params;
  double lr = 1e-3;
  double weight_decay = 0.0;
};

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; <= 0 disables.
  double max_grad_norm = 1.0;
};

// Decoupled-weight-decay Adam. Parameters without a gradient on a step are
// left untouched, and their moment estimates are not advanced.
class AdamW {
 public:
  AdamW(std::vector<ParamGroup> groups, AdamWOptions options);

  // Applies one update from the accumulated gradients, then clears them.
  // Returns the pre-clip global gradient norm.
  double Step();
  void ZeroGrad();

  const std::vector<ParamGroup>& groups() const { return groups_; }
  long steps() const { return steps_; }

 private:
  struct Slot {
    ag::Mat m;
    ag::Mat v;
    long t = 0;
  };

  std::vector<ParamGroup> groups_;
  AdamWOptions options_;
  std::vector<std::vector<Slot>> slots_;
  long steps_ = 0;
};

}  // namespace pcm

#endif  // PCM_OPTIMIZER_H_
