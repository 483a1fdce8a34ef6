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

#include "pcm/experiments.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace pcm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string AccumulationName(ScoreAccumulation a) { return a == ScoreAccumulation::kSum ? "sum" : "mean"; }
ScoreAccumulation ParseAccumulation(const std::string& s) {
  if (s == "sum") return ScoreAccumulation::kSum;
  if (s == "mean") return ScoreAccumulation::kMeanPerOccurrence;
  throw ConfigError("accumulation must be 'sum' or 'mean', got '" + s + "'");
}

std::string KlName(KlDirection d) {
  return d == KlDirection::kTargetToPrediction ? "target_to_prediction" : "prediction_to_target";
}
KlDirection ParseKl(const std::string& s) {
  if (s == "target_to_prediction") return KlDirection::kTargetToPrediction;
  if (s == "prediction_to_target") return KlDirection::kPredictionToTarget;
  throw ConfigError("kl_direction must be 'target_to_prediction' or 'prediction_to_target'");
}

void Flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) Flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else {
    out[prefix] = j;
  }
}

void CheckKnownKeys(const json& given, const json& defaults, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown configuration key '" + path + "'");
    if (value.is_object() && defaults.at(key).is_object()) CheckKnownKeys(value, defaults.at(key), path);
  }
}

std::string Fnv1aHex(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

json HashableJson(const ExperimentConfig& c) {
  json j = c.ToJson();
  j.erase("output_dir");
  j.erase("cache_dir");
  j.erase("save_checkpoints");
  return j;
}

void WriteJson(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kBertFt: return "bert-ft";
    case Method::kUda: return "uda";
    case Method::kPcm: return "pcm";
    case Method::kPcmNoCsrUpdate: return "pcm-no-csr-update";
    case Method::kPcmSemanticOnly: return "pcm-semantic-only";
    case Method::kPcmMatchingOnly: return "pcm-matching-only";
    case Method::kUdaDcdl: return "uda-dcdl";
  }
  return "unknown";
}

const std::vector<Method>& AllMethods() {
  static const std::vector<Method> kAll = {Method::kBertFt,          Method::kUda,
                                           Method::kPcm,             Method::kPcmNoCsrUpdate,
                                           Method::kPcmSemanticOnly, Method::kPcmMatchingOnly,
                                           Method::kUdaDcdl};
  return kAll;
}

Method ParseMethod(std::string_view name) {
  for (Method m : AllMethods()) {
    if (MethodName(m) == name) return m;
  }
  std::string known;
  for (Method m : AllMethods()) known += (known.empty() ? "" : ", ") + std::string(MethodName(m));
  throw ConfigError("unknown method '" + std::string(name) + "' (known: " + known + ")");
}

MethodSpec DescribeMethod(Method method) {
  MethodSpec s;
  const GateConditions all{true, true, true};
  const GateConditions semantic_only{true, false, false};
  const GateConditions matching_only{false, true, false};
  switch (method) {
    case Method::kBertFt:
      s.layout = {false, true, MatchingHead::kNone};
      s.use_unlabeled = false;
      s.conditions = semantic_only;
      break;
    case Method::kUda:
      s.layout = {false, true, MatchingHead::kNone};
      s.conditions = semantic_only;
      break;
    case Method::kPcm:
      s.layout = {true, true, MatchingHead::kCsrSlots};
      s.csr_updates = true;
      s.conditions = all;
      break;
    case Method::kPcmNoCsrUpdate:
      s.layout = {true, true, MatchingHead::kCsrSlots};
      s.conditions = all;
      break;
    case Method::kPcmSemanticOnly:
      s.layout = {true, true, MatchingHead::kNone};
      s.csr_updates = true;
      s.conditions = semantic_only;
      break;
    case Method::kPcmMatchingOnly:
      s.layout = {true, false, MatchingHead::kCsrSlots};
      s.csr_updates = true;
      s.conditions = matching_only;
      s.predict_with = PredictionHead::kMatching;
      break;
    case Method::kUdaDcdl:
      s.layout = {false, true, MatchingHead::kPooled};
      s.conditions = all;
      break;
  }
  return s;
}

void ExperimentConfig::Validate() const {
  gate.Validate();
  if (n_per_class <= 0) throw ConfigError("n_per_class must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (top_j <= 0) throw ConfigError("top_j must be positive");
  if (head.hidden <= 0) throw ConfigError("head hidden size must be positive");
  if (head.activation != "tanh" && head.activation != "gelu") throw ConfigError("head activation must be tanh or gelu");
  if (encoder_lr < 0 || head_lr < 0 || weight_decay < 0) throw ConfigError("learning rates and decay must be >= 0");
  if (lambda_u < 0) throw ConfigError("lambda_u must be >= 0");
  if (labeled_batch <= 0 || unlabeled_batch <= 0 || eval_batch <= 0) throw ConfigError("batch sizes must be positive");
  if (epochs <= 0 && max_steps <= 0) throw ConfigError("epochs or max_steps must be positive");
  if (max_len < 8) throw ConfigError("max_len is too small");
  if (fallback_views <= 0) throw ConfigError("fallback_views must be positive");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) throw ConfigError("validation_fraction must be in [0, 1)");
  if (csr_init_epochs <= 0) throw ConfigError("csr_init_epochs must be positive");
  if (corpus != "fixture" && (train_path.empty() || test_path.empty())) {
    throw ConfigError("train_path and test_path are required for corpus " + corpus);
  }
}

json ExperimentConfig::ToJson() const {
  return {
      {"corpus", corpus},
      {"train_path", train_path},
      {"test_path", test_path},
      {"augmentation_paths", augmentation_paths},
      {"fixture",
       {{"num_classes", fixture.num_classes},
        {"keywords_per_class", fixture.keywords_per_class},
        {"filler_words", fixture.filler_words},
        {"train_size", fixture.train_size},
        {"test_size", fixture.test_size},
        {"min_words", fixture.min_words},
        {"max_words", fixture.max_words},
        {"keywords_per_sentence", fixture.keywords_per_sentence},
        {"zipf_exponent", fixture.zipf_exponent},
        {"stopword_rate", fixture.stopword_rate},
        {"seed", fixture.seed}}},
      {"n_per_class", n_per_class},
      {"seeds", seeds},
      {"pool_cap", pool_cap},
      {"validation_fraction", validation_fraction},
      {"fallback", {{"dropout", fallback.dropout}, {"shuffle_window", fallback.shuffle_window}}},
      {"fallback_views", fallback_views},
      {"method", MethodName(method)},
      {"gate", {{"confid1", gate.confid1}, {"confid2", gate.confid2}, {"temperature", gate.temperature}}},
      {"head", {{"hidden", head.hidden}, {"activation", head.activation}}},
      {"top_j", top_j},
      {"accumulation", AccumulationName(accumulation)},
      {"csr_init_epochs", csr_init_epochs},
      {"encoder", encoder},
      {"cache_dir", cache_dir},
      {"max_len", max_len},
      {"encoder_lr", encoder_lr},
      {"head_lr", head_lr},
      {"weight_decay", weight_decay},
      {"lambda_u", lambda_u},
      {"kl_direction", KlName(kl_direction)},
      {"labeled_batch", labeled_batch},
      {"unlabeled_batch", unlabeled_batch},
      {"eval_batch", eval_batch},
      {"epochs", epochs},
      {"max_steps", max_steps},
      {"check_every", check_every},
      {"eval_every", eval_every},
      {"early_stop_patience", early_stop_patience},
      {"output_dir", output_dir},
      {"save_checkpoints", save_checkpoints},
  };
}

ExperimentConfig ExperimentConfig::FromJson(const json& given) {
  const ExperimentConfig defaults;
  json j = defaults.ToJson();
  CheckKnownKeys(given, j, "");
  j.merge_patch(given);

  ExperimentConfig c;
  c.corpus = j.at("corpus");
  c.train_path = j.at("train_path");
  c.test_path = j.at("test_path");
  c.augmentation_paths = j.at("augmentation_paths").get<std::vector<std::string>>();
  const json& f = j.at("fixture");
  c.fixture.num_classes = f.at("num_classes");
  c.fixture.keywords_per_class = f.at("keywords_per_class");
  c.fixture.filler_words = f.at("filler_words");
  c.fixture.train_size = f.at("train_size");
  c.fixture.test_size = f.at("test_size");
  c.fixture.min_words = f.at("min_words");
  c.fixture.max_words = f.at("max_words");
  c.fixture.keywords_per_sentence = f.at("keywords_per_sentence");
  c.fixture.zipf_exponent = f.at("zipf_exponent");
  c.fixture.stopword_rate = f.at("stopword_rate");
  c.fixture.seed = f.at("seed");
  c.n_per_class = j.at("n_per_class");
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.pool_cap = j.at("pool_cap");
  c.validation_fraction = j.at("validation_fraction");
  c.fallback.dropout = j.at("fallback").at("dropout");
  c.fallback.shuffle_window = j.at("fallback").at("shuffle_window");
  c.fallback_views = j.at("fallback_views");
  c.method = ParseMethod(j.at("method").get<std::string>());
  c.gate.confid1 = j.at("gate").at("confid1");
  c.gate.confid2 = j.at("gate").at("confid2");
  c.gate.temperature = j.at("gate").at("temperature");
  c.head.hidden = j.at("head").at("hidden");
  c.head.activation = j.at("head").at("activation");
  c.top_j = j.at("top_j");
  c.accumulation = ParseAccumulation(j.at("accumulation"));
  c.csr_init_epochs = j.at("csr_init_epochs");
  c.encoder = j.at("encoder");
  c.cache_dir = j.at("cache_dir");
  c.max_len = j.at("max_len");
  c.encoder_lr = j.at("encoder_lr");
  c.head_lr = j.at("head_lr");
  c.weight_decay = j.at("weight_decay");
  c.lambda_u = j.at("lambda_u");
  c.kl_direction = ParseKl(j.at("kl_direction"));
  c.labeled_batch = j.at("labeled_batch");
  c.unlabeled_batch = j.at("unlabeled_batch");
  c.eval_batch = j.at("eval_batch");
  c.epochs = j.at("epochs");
  c.max_steps = j.at("max_steps");
  c.check_every = j.at("check_every");
  c.eval_every = j.at("eval_every");
  c.early_stop_patience = j.at("early_stop_patience");
  c.output_dir = j.at("output_dir");
  c.save_checkpoints = j.at("save_checkpoints");
  return c;
}

std::string ExperimentConfig::Hash() const { return Fnv1aHex(HashableJson(*this).dump()); }

std::string ExperimentConfig::ParityHash() const {
  json j = HashableJson(*this);
  j.erase("method");
  return Fnv1aHex(j.dump());
}

TrainConfig ExperimentConfig::ToTrainConfig(std::uint64_t seed) const {
  const MethodSpec spec = DescribeMethod(method);
  TrainConfig t;
  t.gate = gate;
  t.conditions = spec.conditions;
  t.kl_direction = kl_direction;
  t.lambda_u = lambda_u;
  t.labeled_batch = labeled_batch;
  t.unlabeled_batch = unlabeled_batch;
  t.eval_batch = eval_batch;
  t.max_len = max_len;
  t.side = TruncationSideFor(corpus);
  t.encoder_lr = encoder_lr;
  t.head_lr = head_lr;
  t.weight_decay = weight_decay;
  t.epochs = epochs;
  t.max_steps = max_steps;
  t.check_every = check_every;
  t.eval_every = eval_every;
  t.use_unlabeled = spec.use_unlabeled;
  t.csr_updates = spec.csr_updates;
  t.early_stop_patience = early_stop_patience;
  t.mining.top_j = top_j;
  t.mining.accumulation = accumulation;
  t.mining.max_len = max_len;
  t.mining.side = t.side;
  t.mining.batch_size = eval_batch;
  t.predict_with = spec.predict_with;
  t.seed = seed;
  return t;
}

std::vector<std::string> ConfigDiff(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::map<std::string, json> fa, fb;
  Flatten(HashableJson(a), "", fa);
  Flatten(HashableJson(b), "", fb);
  std::vector<std::string> diff;
  for (const auto& [key, value] : fa) {
    auto it = fb.find(key);
    if (it == fb.end() || it->second != value) diff.push_back(key);
  }
  for (const auto& [key, value] : fb) {
    if (!fa.count(key)) diff.push_back(key);
  }
  return diff;
}

double Mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::optional<double> StandardErrorOfMean(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double mean = Mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

json SeedResult::ToJson() const {
  return {{"seed", seed},
          {"completed", completed},
          {"error", error},
          {"accuracy", accuracy},
          {"best_accuracy", best_accuracy},
          {"matching_accuracy", matching_accuracy},
          {"steps", steps},
          {"final_csr_version", final_csr_version}};
}

json RunResult::ToJson() const {
  json seed_list = json::array();
  for (const auto& s : seeds) seed_list.push_back(s.ToJson());
  return {{"method", method},
          {"corpus", corpus},
          {"n_per_class", n_per_class},
          {"pool_cap", pool_cap},
          {"config_hash", config_hash},
          {"seeds", seed_list},
          {"mean", mean},
          {"sem", sem ? json(*sem) : json(nullptr)},
          {"best_mean", best_mean},
          {"best_sem", best_sem ? json(*best_sem) : json(nullptr)},
          {"incomplete", incomplete}};
}

RunResult RunResult::FromJson(const json& j) {
  RunResult r;
  r.method = j.at("method");
  r.corpus = j.at("corpus");
  r.n_per_class = j.at("n_per_class");
  r.pool_cap = j.at("pool_cap");
  r.config_hash = j.at("config_hash");
  for (const auto& s : j.at("seeds")) {
    SeedResult sr;
    sr.seed = s.at("seed");
    sr.completed = s.at("completed");
    sr.error = s.at("error");
    sr.accuracy = s.at("accuracy");
    sr.best_accuracy = s.at("best_accuracy");
    sr.matching_accuracy = s.at("matching_accuracy");
    sr.steps = s.at("steps");
    sr.final_csr_version = s.at("final_csr_version");
    r.seeds.push_back(std::move(sr));
  }
  r.mean = j.at("mean");
  if (!j.at("sem").is_null()) r.sem = j.at("sem").get<double>();
  r.best_mean = j.at("best_mean");
  if (!j.at("best_sem").is_null()) r.best_sem = j.at("best_sem").get<double>();
  r.incomplete = j.at("incomplete");
  return r;
}

ExperimentData LoadExperimentData(const ExperimentConfig& config) {
  config.Validate();
  ExperimentData d;
  if (config.corpus == "fixture") {
    Fixture f = MakeKeywordFixture(config.fixture);
    d.train = std::move(f.train);
    d.test = std::move(f.test);
  } else {
    d.train = LoadCorpus(config.train_path, config.corpus, Split::kTrainLabeled);
    d.test = LoadCorpus(config.test_path, config.corpus, Split::kTest, d.train.num_classes);
  }
  if (d.test.num_classes != d.train.num_classes) throw ConfigError("train and test class counts differ");
  for (const auto& path : config.augmentation_paths) {
    d.augmentations.push_back(LoadAugmentations(path, d.train.size(), fs::path(path).stem().string()));
  }
  std::vector<std::string> vocab_texts = d.train.texts;
  vocab_texts.insert(vocab_texts.end(), d.test.texts.begin(), d.test.texts.end());
  d.encoder = ResolveEncoder(config.encoder, config.cache_dir.empty() ? DefaultCacheDir() : config.cache_dir,
                             vocab_texts);
  return d;
}

TrainData PrepareTrainData(const ExperimentConfig& config, const ExperimentData& data,
                           const SplitManifest& manifest) {
  const ManifestSplits splits = ApplyManifest(data.train, manifest);
  const Encoder& enc = data.encoder;
  TrainData t;
  t.num_classes = data.train.num_classes;
  for (const auto& text : splits.labeled.texts) t.labeled.push_back(enc.Tokenize(text));
  t.labels = splits.labeled.labels;
  for (const auto& text : splits.validation.texts) t.validation.push_back(enc.Tokenize(text));
  for (std::size_t u = 0; u < manifest.unlabeled.size(); ++u) {
    const auto row = static_cast<std::size_t>(manifest.unlabeled[u]);
    const std::string& text = data.train.texts[row];
    t.unlabeled.push_back(enc.Tokenize(text));
    std::vector<TokenizedText> views;
    for (const auto& file : data.augmentations) views.push_back(enc.Tokenize(file[row].augmented));
    if (data.augmentations.empty()) {
      for (int v = 0; v < config.fallback_views; ++v) {
        const std::uint64_t view_seed = manifest.seed * 1000003ULL + static_cast<std::uint64_t>(v);
        views.push_back(enc.Tokenize(FallbackAugment(text, view_seed, config.fallback).augmented));
      }
    }
    t.augmented.push_back(std::move(views));
  }
  for (const auto& text : data.test.texts) t.test.push_back(enc.Tokenize(text));
  t.test_labels = data.test.labels;
  return t;
}

CsrSet BuildInitialCsr(const ExperimentConfig& config, const Encoder& pretrained, const TrainData& data,
                       std::uint64_t seed) {
  const TrainConfig tc = config.ToTrainConfig(seed);
  const Encoder finetuned = FineTuneForCsr(pretrained, data, config.head, config.csr_init_epochs, tc);
  CsrSet csr = InitializeCsr(data.labeled, data.labels, data.num_classes, finetuned, StopWords::English(), tc.mining);
  for (auto& cls : csr.classes) cls.embedding = CsrEmbedding(cls.words, pretrained);
  return csr;
}

RunResult RunMethod(const ExperimentConfig& config, const ExperimentData& data) {
  config.Validate();
  const MethodSpec spec = DescribeMethod(config.method);
  const int k = data.train.num_classes;
  std::vector<int> per_class(static_cast<std::size_t>(k), 0);
  for (int label : data.train.labels) ++per_class[static_cast<std::size_t>(label)];
  for (int c = 0; c < k; ++c) {
    if (per_class[static_cast<std::size_t>(c)] < config.n_per_class) {
      throw ConfigError("n_per_class " + std::to_string(config.n_per_class) + " exceeds the " +
                        std::to_string(per_class[static_cast<std::size_t>(c)]) + " training samples of class " +
                        std::to_string(c));
    }
  }

  RunResult r;
  r.method = std::string(MethodName(config.method));
  r.corpus = config.corpus;
  r.n_per_class = config.n_per_class;
  r.pool_cap = config.pool_cap;
  r.config_hash = config.Hash();
  const fs::path method_dir = config.output_dir.empty()
                                  ? fs::path()
                                  : fs::path(config.output_dir) / (r.method + "_n" + std::to_string(config.n_per_class) +
                                                                   "_pool" + std::to_string(config.pool_cap));
  if (!method_dir.empty()) {
    fs::create_directories(method_dir);
    WriteJson(method_dir / "config.json", config.ToJson());
  }

  for (std::uint64_t seed : config.seeds) {
    SeedResult s;
    s.seed = seed;
    try {
      s.manifest = SubsampleLabels(data.train, config.n_per_class, seed,
                                   {config.pool_cap, config.validation_fraction});
      const TrainData td = PrepareTrainData(config, data, s.manifest);
      const TrainConfig tc = config.ToTrainConfig(seed);

      fs::path seed_dir;
      std::ofstream log_file;
      if (!method_dir.empty()) {
        seed_dir = method_dir / ("seed_" + std::to_string(seed));
        fs::create_directories(seed_dir);
        WriteJson(seed_dir / "manifest.json", s.manifest.ToJson());
        log_file.open(seed_dir / "log.jsonl");
      }
      LogSink log_sink = [&](const json& record) {
        if (log_file) log_file << record.dump() << '\n';
      };
      CsrSink csr_sink = [&](const CsrSet& csr, const PcmModel& model) {
        if (seed_dir.empty()) return;
        WriteCsrSnapshot((seed_dir / ("csr_v" + std::to_string(csr.version) + ".json")).string(), csr);
        if (config.save_checkpoints) model.Save((seed_dir / ("checkpoint_v" + std::to_string(csr.version))).string(), csr.version);
      };

      std::optional<CsrSet> csr;
      if (spec.layout.csr_slots) {
        csr = BuildInitialCsr(config, data.encoder, td, seed);
        if (!seed_dir.empty()) WriteCsrSnapshot((seed_dir / "csr_v0.json").string(), *csr);
      }
      PcmModel model(data.encoder.Clone(), k, spec.layout, config.head, seed);
      s.training = Train(model, csr, td, tc, StopWords::English(), log_sink, csr_sink);
      s.accuracy = s.training.final_accuracy;
      s.best_accuracy = s.training.best_accuracy;
      s.matching_accuracy = s.training.final_matching_accuracy;
      s.steps = s.training.steps;
      s.final_csr_version = s.training.csr_history.empty() ? -1 : s.training.csr_history.back().version;
      if (!seed_dir.empty() && config.save_checkpoints) model.Save((seed_dir / "checkpoint_final").string(), s.final_csr_version);
      s.completed = true;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      s.error = e.what();
      r.incomplete = true;
      std::clog << r.method << " seed " << seed << " aborted: " << e.what() << '\n';
    }
    r.seeds.push_back(std::move(s));
  }

  std::vector<double> last, best;
  for (const auto& s : r.seeds) {
    if (!s.completed) continue;
    last.push_back(s.accuracy);
    best.push_back(s.best_accuracy);
  }
  r.mean = Mean(last);
  r.sem = StandardErrorOfMean(last);
  r.best_mean = Mean(best);
  r.best_sem = StandardErrorOfMean(best);
  if (!method_dir.empty()) WriteJson(method_dir / "result.json", r.ToJson());
  return r;
}

RunResult RunMethod(const ExperimentConfig& config) { return RunMethod(config, LoadExperimentData(config)); }

std::pair<RunResult, RunResult> RunAblationStructure(const ExperimentConfig& config, const ExperimentData& data) {
  ExperimentConfig semantic = config;
  semantic.method = Method::kPcmSemanticOnly;
  ExperimentConfig matching = config;
  matching.method = Method::kPcmMatchingOnly;
  return {RunMethod(semantic, data), RunMethod(matching, data)};
}

std::pair<RunResult, RunResult> RunAblationCsrUpdate(const ExperimentConfig& config, const ExperimentData& data) {
  ExperimentConfig frozen = config;
  frozen.method = Method::kPcmNoCsrUpdate;
  ExperimentConfig updated = config;
  updated.method = Method::kPcm;
  return {RunMethod(frozen, data), RunMethod(updated, data)};
}

RunResult RunAblationDcdl(const ExperimentConfig& config, const ExperimentData& data) {
  ExperimentConfig pcm = config;
  pcm.method = Method::kPcm;
  ExperimentConfig dcdl = config;
  dcdl.method = Method::kUdaDcdl;
  const std::vector<std::string> diff = ConfigDiff(pcm, dcdl);
  if (diff != std::vector<std::string>{"method"}) throw ConfigError("DCDL configuration differs from PCM beyond the method");
  return RunMethod(dcdl, data);
}

std::vector<RunResult> RunUnlabeledSweep(const ExperimentConfig& config, const ExperimentData& data,
                                         const std::vector<long>& pool_sizes) {
  std::vector<RunResult> out;
  for (long size : pool_sizes) {
    ExperimentConfig c = config;
    c.pool_cap = size;
    out.push_back(RunMethod(c, data));
  }
  return out;
}

}  // namespace pcm
