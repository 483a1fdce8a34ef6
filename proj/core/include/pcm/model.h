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

#ifndef PCM_MODEL_H_
#define PCM_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcm/autograd.h"
#include "pcm/csr_types.h"
#include "pcm/encoder.h"
#include "pcm/optimizer.h"

namespace pcm {

struct HeadConfig {
  int hidden = 128;
  std::string activation = "tanh";  // "tanh" or "gelu"
};

enum class MatchingHead {
  kNone,
  kCsrSlots,  // shared MLP over [sentence ; CSR-slot feature], one logit per class
  kPooled,    // K sigmoid outputs on the sentence representation alone
};

enum class PredictionHead { kSemantic, kMatching };

struct ModelLayout {
  bool csr_slots = true;
  bool semantic = true;
  MatchingHead matching = MatchingHead::kCsrSlots;

  bool has_matching() const { return matching != MatchingHead::kNone; }
};

// Two-layer MLP: Linear -> activation -> Linear.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(int in, const HeadConfig& config, int out, std::mt19937_64& rng);

  ag::Var Forward(ag::Tape* tape, const ag::Var& x) const;
  std::vector<std::pair<std::string, ag::Var>> NamedParameters(const std::string& prefix) const;
  MlpHead Clone() const;

 private:
  HeadConfig config_;
  ag::Var w1_, b1_, w2_, b2_;
};

// Value snapshot of both heads. Absent heads leave their blocks empty.
struct DualHeadOutputs {
  ag::Mat semantic_logits;
  ag::Mat semantic_probs;
  ag::Mat matching_logits;
  ag::Mat matching_probs;

  bool has_semantic() const { return semantic_logits.size() != 0; }
  bool has_matching() const { return matching_logits.size() != 0; }
  int rows() const {
    return static_cast<int>(has_semantic() ? semantic_logits.rows() : matching_logits.rows());
  }

  static DualHeadOutputs FromLogits(const ag::Mat* semantic, const ag::Mat* matching);
};

struct DualHeadForward {
  EncoderOutput encoder;
  ag::Var sentence;
  ag::Var semantic_logits;  // null when the layout has no semantic head
  ag::Var matching_logits;  // null when the layout has no matching head

  DualHeadOutputs Values() const;
};

ag::Mat SoftmaxRows(const ag::Mat& logits);
ag::Mat Sigmoid(const ag::Mat& logits);
// Row-wise argmax; ties go to the lowest index.
std::vector<int> ArgmaxRows(const ag::Mat& m);

class PcmModel {
 public:
  PcmModel() = default;
  PcmModel(Encoder encoder, int num_classes, ModelLayout layout, HeadConfig head, std::uint64_t seed);

  // Lays out texts the way this model consumes them.
  EncodedBatch Encode(std::span<const TokenizedText> texts, const CsrSet* csr, int max_len,
                      TruncationSide side) const;

  // Throws ConfigError when the batch was built with a different CSR version
  // than `csr`, or when a slot layout is used without CSRs.
  DualHeadForward Forward(const EncodedBatch& batch, const CsrSet* csr, ForwardMode mode) const;
  DualHeadOutputs Evaluate(const EncodedBatch& batch, const CsrSet* csr) const;
  std::vector<int> Predict(const EncodedBatch& batch, const CsrSet* csr,
                           PredictionHead head = PredictionHead::kSemantic) const;

  // Encoder parameters and head parameters as separate optimizer groups;
  // biases and LayerNorm parameters are exempt from weight decay.
  std::vector<ParamGroup> ParamGroups(double encoder_lr, double head_lr, double weight_decay) const;
  std::vector<std::pair<std::string, ag::Var>> NamedParameters() const;

  PcmModel Clone() const;
  // Directory layout: encoder/ (see Encoder::Save) plus heads.pcmt holding
  // the heads, the layout and the bound CSR version.
  void Save(const std::string& dir, int csr_version) const;
  static PcmModel Load(const std::string& dir, int* csr_version = nullptr);

  const Encoder& encoder() const { return encoder_; }
  Encoder& mutable_encoder() { return encoder_; }
  const ModelLayout& layout() const { return layout_; }
  const HeadConfig& head_config() const { return head_config_; }
  int num_classes() const { return num_classes_; }

 private:
  Encoder encoder_;
  int num_classes_ = 0;
  ModelLayout layout_;
  HeadConfig head_config_;
  std::optional<MlpHead> semantic_;
  std::optional<MlpHead> matching_;
};

}  // namespace pcm

#endif  // PCM_MODEL_H_
