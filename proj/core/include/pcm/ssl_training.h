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

#ifndef PCM_SSL_TRAINING_H_
#define PCM_SSL_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/csr.h"
#include "pcm/model.h"
#include "pcm/optimizer.h"

namespace pcm {

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before logs.
inline constexpr double kProbEpsilon = 1e-7;

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GateConfig {
  double confid1 = 0.95;     // semantic confidence threshold
  double confid2 = 0.7;      // matching confidence threshold
  double temperature = 0.5;  // sharpening temperature, in (0, 1]

  void Validate() const;
};

// Which agreement-gate conditions are enforced. Conditions that refer to a
// head the model lacks are skipped.
struct GateConditions {
  bool semantic_confidence = true;
  bool matching_confidence = true;
  bool agreement = true;
};

struct PseudoTarget {
  bool passed = false;
  Eigen::VectorXd sharpened;  // set iff passed and a semantic head exists
  int hard_label = -1;        // set iff passed
  // Individual condition outcomes, for logging.
  bool semantic_confident = false;
  bool matching_confident = false;
  bool heads_agree = false;
};

enum class KlDirection {
  kTargetToPrediction,  // KL(sharpened target || prediction on the augmented view)
  kPredictionToTarget,
};

// Loss value plus its gradient with respect to the head logits.
struct LossTerms {
  double total = 0.0;
  double semantic = 0.0;  // CE (labeled) or KL (unlabeled) part
  double matching = 0.0;  // BCE part
  int rows = 0;           // rows averaged over
  ag::Mat grad_semantic_logits;
  ag::Mat grad_matching_logits;
};

// Mean over rows of CE(p^s, y) + sum_k BCE(p^m_k, [k == y]).
LossTerms LabeledLoss(const DualHeadOutputs& outputs, std::span<const int> labels);

std::vector<PseudoTarget> Gate(const DualHeadOutputs& original, const GateConfig& config,
                               const GateConditions& conditions = {});

// softmax(logits / temperature). Throws ConfigError for temperature <= 0.
Eigen::VectorXd Sharpen(const Eigen::VectorXd& logits, double temperature);

// Mean over gated rows of KL(target, p^s(x^a)) + BCE(p^m(x^a), onehot(y_hat)).
// Rows failing the gate contribute nothing; no gated rows gives 0.
LossTerms UnlabeledLoss(const DualHeadOutputs& augmented, std::span<const PseudoTarget> targets,
                        KlDirection direction = KlDirection::kTargetToPrediction);

struct TrainConfig {
  GateConfig gate;
  GateConditions conditions;
  KlDirection kl_direction = KlDirection::kTargetToPrediction;
  double lambda_u = 1.0;
  int labeled_batch = 4;
  int unlabeled_batch = 8;
  int eval_batch = 64;
  int max_len = 256;
  TruncationSide side = TruncationSide::kLeading;
  double encoder_lr = 5e-6;
  double head_lr = 5e-4;
  double weight_decay = 0.01;
  AdamWOptions adam;
  int epochs = 20;    // over the training unlabeled stream (labeled set if empty)
  long max_steps = 0;  // > 0 overrides epochs
  int check_every = 200;
  int eval_every = 1000;
  bool use_unlabeled = true;
  bool csr_updates = true;
  // Consecutive trigger checks without a new validation maximum before
  // stopping; 0 disables early stopping.
  int early_stop_patience = 0;
  MiningOptions mining;
  PredictionHead predict_with = PredictionHead::kSemantic;
  std::uint64_t seed = 0;
};

struct TrainData {
  int num_classes = 0;
  std::vector<TokenizedText> labeled;
  std::vector<int> labels;
  std::vector<TokenizedText> unlabeled;
  // Augmented views per unlabeled sample (at least one each).
  std::vector<std::vector<TokenizedText>> augmented;
  std::vector<TokenizedText> validation;
  std::vector<TokenizedText> test;
  std::vector<int> test_labels;
};

// Independent random streams so that, e.g., skipping unlabeled work never
// perturbs the labeled trajectory.
struct TrainState {
  long step = 0;
  int active_csr_version = -1;
  std::uint64_t seed = 0;
  std::mt19937_64 labeled_order;
  std::mt19937_64 unlabeled_order;
  std::mt19937_64 labeled_dropout;
  std::mt19937_64 unlabeled_dropout;
  std::mt19937_64 view_choice;

  explicit TrainState(std::uint64_t seed = 0);
};

struct StepStats {
  double loss_total = 0.0;
  double loss_labeled = 0.0;
  double loss_unlabeled = 0.0;
  int unlabeled_rows = 0;
  int gated_rows = 0;
  int semantic_confident = 0;
  int matching_confident = 0;
  int heads_agree = 0;
  double grad_norm = 0.0;
};

struct StepLoss {
  LossTerms labeled;
  LossTerms unlabeled;
  double total = 0.0;
};

// Loss of one step on fixed inputs; with `backward` the gradients are
// accumulated into the model parameters (the optimizer is not touched).
StepLoss ComputeStepLoss(const PcmModel& model, const EncodedBatch& labeled, std::span<const int> labels,
                         const EncodedBatch* augmented, std::span<const PseudoTarget> targets, const CsrSet* csr,
                         const TrainConfig& config, bool backward, std::mt19937_64* labeled_dropout,
                         std::mt19937_64* unlabeled_dropout);

// One optimisation step: labeled loss, gated consistency loss on the
// augmented views (targets from a no-gradient pass over the originals), then
// an optimizer update. Throws TrainingDiverged on a non-finite loss.
StepStats TrainStep(PcmModel& model, AdamW& optimizer, std::span<const TokenizedText> labeled,
                    std::span<const int> labels, std::span<const TokenizedText> unlabeled,
                    std::span<const std::vector<TokenizedText>> augmented_views, const CsrSet* csr,
                    const TrainConfig& config, TrainState& state);

// Outputs for many texts in evaluation mode, batched.
DualHeadOutputs EvaluateTexts(const PcmModel& model, std::span<const TokenizedText> texts, const CsrSet* csr,
                              const TrainConfig& config);
double Accuracy(const PcmModel& model, std::span<const TokenizedText> texts, std::span<const int> labels,
                const CsrSet* csr, const TrainConfig& config, PredictionHead head);

struct QualifyingSet {
  std::vector<int> indices;
  std::vector<int> pseudo_labels;
  int count() const { return static_cast<int>(indices.size()); }
};
QualifyingSet FindQualifying(const PcmModel& model, std::span<const TokenizedText> texts, const CsrSet* csr,
                             const TrainConfig& config);

struct TrainResult {
  std::vector<nlohmann::json> log;
  std::vector<CsrSet> csr_history;
  double final_accuracy = 0.0;
  double final_matching_accuracy = -1.0;  // -1 without a matching head
  double best_accuracy = 0.0;             // at the best validation gate count
  long best_step = 0;
  long steps = 0;
  bool early_stopped = false;
};

using LogSink = std::function<void(const nlohmann::json&)>;
using CsrSink = std::function<void(const CsrSet&, const PcmModel&)>;

// Full joint training. `initial_csr` is required for CSR-slot layouts. The
// log has one "interval" record per evaluation point and one "csr_update"
// record per CSR swap.
TrainResult Train(PcmModel& model, std::optional<CsrSet> initial_csr, const TrainData& data,
                  const TrainConfig& config, const StopWords& stopwords, const LogSink& log_sink = {},
                  const CsrSink& csr_sink = {});

// Plain K-way fine-tune on the labeled set ("[CLS] text [SEP]", semantic head
// only) used to seed CSR mining. Returns the fine-tuned encoder.
Encoder FineTuneForCsr(const Encoder& pretrained, const TrainData& data, const HeadConfig& head, int epochs,
                       const TrainConfig& config);

}  // namespace pcm

#endif  // PCM_SSL_TRAINING_H_
