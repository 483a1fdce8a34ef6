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

// Experiment configuration, method runners, ablations and sweeps.

#ifndef PCM_EXPERIMENTS_H_
#define PCM_EXPERIMENTS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/csr.h"
#include "pcm/data.h"
#include "pcm/fixture.h"
#include "pcm/model.h"
#include "pcm/ssl_training.h"

namespace pcm {

enum class Method { kBertFt, kUda, kPcm, kPcmNoCsrUpdate, kPcmSemanticOnly, kPcmMatchingOnly, kUdaDcdl };

std::string_view MethodName(Method method);
Method ParseMethod(std::string_view name);
const std::vector<Method>& AllMethods();

struct MethodSpec {
  ModelLayout layout;
  bool use_unlabeled = true;
  bool csr_updates = false;
  GateConditions conditions;
  PredictionHead predict_with = PredictionHead::kSemantic;
};
MethodSpec DescribeMethod(Method method);

struct ExperimentConfig {
  // Data. corpus "fixture" generates the synthetic corpus instead of loading.
  std::string corpus = "yahoo";
  std::string train_path;
  std::string test_path;
  std::vector<std::string> augmentation_paths;  // each aligned with train rows
  FixtureOptions fixture;
  int n_per_class = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  long pool_cap = 0;
  double validation_fraction = 0.1;
  FallbackOptions fallback;
  int fallback_views = 2;  // used when no augmentation files are given

  Method method = Method::kPcm;
  GateConfig gate;
  HeadConfig head;
  int top_j = 75;
  ScoreAccumulation accumulation = ScoreAccumulation::kSum;
  int csr_init_epochs = 20;  // labeled-only fine-tuning before the first mining pass

  std::string encoder = "bert-base-uncased";
  std::string cache_dir;  // empty: DefaultCacheDir()
  int max_len = 256;
  double encoder_lr = 5e-6;
  double head_lr = 5e-4;
  double weight_decay = 0.01;
  double lambda_u = 1.0;
  KlDirection kl_direction = KlDirection::kTargetToPrediction;
  int labeled_batch = 4;
  int unlabeled_batch = 8;
  int eval_batch = 64;
  int epochs = 20;
  long max_steps = 0;
  int check_every = 1000;
  int eval_every = 1000;
  int early_stop_patience = 0;

  std::string output_dir;  // empty: nothing written
  bool save_checkpoints = false;

  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys keep their defaults; unknown keys throw.
  static ExperimentConfig FromJson(const nlohmann::json& j);
  // FNV-1a of the canonical JSON, without output locations.
  std::string Hash() const;
  // Hash without the method: equal across methods of one fair comparison.
  std::string ParityHash() const;
  TrainConfig ToTrainConfig(std::uint64_t seed) const;
};

// Dotted JSON paths whose values differ between the two configurations.
std::vector<std::string> ConfigDiff(const ExperimentConfig& a, const ExperimentConfig& b);

struct SeedResult {
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  double accuracy = 0.0;       // last evaluation
  double best_accuracy = 0.0;  // at the best validation gate count
  double matching_accuracy = -1.0;
  long steps = 0;
  int final_csr_version = -1;
  SplitManifest manifest;
  TrainResult training;

  nlohmann::json ToJson() const;
};

struct RunResult {
  std::string method;
  std::string corpus;
  int n_per_class = 0;
  long pool_cap = 0;
  std::string config_hash;
  std::vector<SeedResult> seeds;
  double mean = 0.0;
  std::optional<double> sem;  // needs at least two completed seeds
  double best_mean = 0.0;
  std::optional<double> best_sem;
  bool incomplete = false;

  nlohmann::json ToJson() const;
  static RunResult FromJson(const nlohmann::json& j);
};

double Mean(std::span<const double> values);
// Sample standard deviation over sqrt(n); nullopt for fewer than two values.
std::optional<double> StandardErrorOfMean(std::span<const double> values);

// Loaded corpora and the resolved pretrained encoder, shared by every run on
// the same data.
struct ExperimentData {
  Corpus train;
  Corpus test;
  std::vector<std::vector<AugmentedPair>> augmentations;  // per file, aligned with train
  Encoder encoder;
};
ExperimentData LoadExperimentData(const ExperimentConfig& config);

// Builds the per-seed training data: manifest splits, tokenization and
// augmented views of the unlabeled stream.
TrainData PrepareTrainData(const ExperimentConfig& config, const ExperimentData& data,
                           const SplitManifest& manifest);

// Initial CSR: fine-tune a copy of `pretrained` on the labeled set, mine the
// top words, then embed them with `pretrained`'s input embeddings.
CsrSet BuildInitialCsr(const ExperimentConfig& config, const Encoder& pretrained, const TrainData& data,
                       std::uint64_t seed);

RunResult RunMethod(const ExperimentConfig& config, const ExperimentData& data);
RunResult RunMethod(const ExperimentConfig& config);

// Semantic-only and matching-only variants.
std::pair<RunResult, RunResult> RunAblationStructure(const ExperimentConfig& config, const ExperimentData& data);
// Frozen initial CSR and updated CSR.
std::pair<RunResult, RunResult> RunAblationCsrUpdate(const ExperimentConfig& config, const ExperimentData& data);
// Two pooled heads without CSR slots; throws if its configuration differs
// from the PCM one in anything but the method.
RunResult RunAblationDcdl(const ExperimentConfig& config, const ExperimentData& data);
std::vector<RunResult> RunUnlabeledSweep(const ExperimentConfig& config, const ExperimentData& data,
                                         const std::vector<long>& pool_sizes);

}  // namespace pcm

#endif  // PCM_EXPERIMENTS_H_
