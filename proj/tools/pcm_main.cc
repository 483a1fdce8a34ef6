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

// pcm: command-line front end for probing, CSR initialisation, training,
// ablations, sweeps and reports.

#include <CLI11.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/csr.h"
#include "pcm/data.h"
#include "pcm/experiments.h"
#include "pcm/fixture.h"
#include "pcm/report.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitIncomplete = 1;
constexpr int kExitConfig = 2;

// Flags override values from --config; the file is therefore read before
// CLI11 binds the remaining options.
pcm::ExperimentConfig InitialConfig(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0) {
      std::ifstream in(argv[i + 1]);
      if (!in) throw pcm::ConfigError(std::string("cannot open config ") + argv[i + 1]);
      return pcm::ExperimentConfig::FromJson(json::parse(in));
    }
  }
  return {};
}

void AddConfigOptions(CLI::App* app, pcm::ExperimentConfig& c, std::string& method, std::string& accumulation,
                      std::string& kl) {
  app->add_option("--config", "JSON experiment configuration; flags override it");
  app->add_option("--corpus", c.corpus, "Corpus name (ag_news, dbpedia, yahoo, imdb, fixture)")->capture_default_str();
  app->add_option("--train", c.train_path, "Training TSV (label<TAB>text)");
  app->add_option("--test", c.test_path, "Test TSV (label<TAB>text)");
  app->add_option("--augmentations", c.augmentation_paths, "Augmentation TSVs aligned with the training rows");
  app->add_option("--n-per-class", c.n_per_class, "Labeled samples per class")->capture_default_str();
  app->add_option("--seeds", c.seeds, "Label-set seeds")->delimiter(',')->capture_default_str();
  app->add_option("--pool-cap", c.pool_cap, "Unlabeled pool cap (0: all)")->capture_default_str();
  app->add_option("--validation-fraction", c.validation_fraction, "Pool fraction held out for the CSR trigger")
      ->capture_default_str();
  app->add_option("--fallback-views", c.fallback_views, "Fallback augmentations per unlabeled text")
      ->capture_default_str();
  app->add_option("--method", method, "bert-ft, uda, pcm, pcm-no-csr-update, pcm-semantic-only, "
                                      "pcm-matching-only or uda-dcdl")
      ->capture_default_str();
  app->add_option("--confid1", c.gate.confid1, "Semantic confidence threshold")->capture_default_str();
  app->add_option("--confid2", c.gate.confid2, "Matching confidence threshold")->capture_default_str();
  app->add_option("--temperature", c.gate.temperature, "Sharpening temperature")->capture_default_str();
  app->add_option("--head-hidden", c.head.hidden, "Head hidden width")->capture_default_str();
  app->add_option("--head-activation", c.head.activation, "tanh or gelu")->capture_default_str();
  app->add_option("--top-j", c.top_j, "Words kept per class")->capture_default_str();
  app->add_option("--accumulation", accumulation, "Word score accumulation: sum or mean")->capture_default_str();
  app->add_option("--csr-init-epochs", c.csr_init_epochs, "Labeled fine-tuning epochs before mining")
      ->capture_default_str();
  app->add_option("--encoder", c.encoder, "Encoder directory, cache id or random:key=value,...")
      ->capture_default_str();
  app->add_option("--cache-dir", c.cache_dir, "Encoder cache (default $PCM_CACHE_DIR or ~/.cache/pcm)");
  app->add_option("--max-len", c.max_len, "Maximum sequence length")->capture_default_str();
  app->add_option("--encoder-lr", c.encoder_lr, "Encoder learning rate")->capture_default_str();
  app->add_option("--head-lr", c.head_lr, "Head learning rate")->capture_default_str();
  app->add_option("--weight-decay", c.weight_decay, "AdamW weight decay")->capture_default_str();
  app->add_option("--lambda-u", c.lambda_u, "Unlabeled loss weight")->capture_default_str();
  app->add_option("--kl-direction", kl, "target_to_prediction or prediction_to_target")->capture_default_str();
  app->add_option("--labeled-batch", c.labeled_batch, "Labeled batch size")->capture_default_str();
  app->add_option("--unlabeled-batch", c.unlabeled_batch, "Unlabeled batch size")->capture_default_str();
  app->add_option("--eval-batch", c.eval_batch, "Evaluation batch size")->capture_default_str();
  app->add_option("--epochs", c.epochs, "Epochs over the unlabeled stream")->capture_default_str();
  app->add_option("--max-steps", c.max_steps, "Step budget (overrides epochs when > 0)")->capture_default_str();
  app->add_option("--check-every", c.check_every, "Steps between CSR trigger checks")->capture_default_str();
  app->add_option("--eval-every", c.eval_every, "Steps between test evaluations")->capture_default_str();
  app->add_option("--early-stop-patience", c.early_stop_patience, "Trigger checks without gain before stopping")
      ->capture_default_str();
  app->add_option("--output", c.output_dir, "Output directory for logs, CSRs and results");
  app->add_flag("--save-checkpoints", c.save_checkpoints, "Save a checkpoint at every CSR update");
}

void FinishConfig(pcm::ExperimentConfig& c, const std::string& method, const std::string& accumulation,
                  const std::string& kl) {
  json patch = {{"method", method}, {"accumulation", accumulation}, {"kl_direction", kl}};
  json j = c.ToJson();
  j.merge_patch(patch);
  c = pcm::ExperimentConfig::FromJson(j);
}

void PrintResult(const pcm::RunResult& r) {
  std::cout << r.method << " n=" << r.n_per_class << " pool=" << r.pool_cap << ": " << pcm::FormatCell(r)
            << " (best-by-validation " << r.best_mean << ") config " << r.config_hash << '\n';
  for (const auto& s : r.seeds) {
    std::cout << "  seed " << s.seed << ": ";
    if (s.completed) {
      std::cout << "last " << s.accuracy << " best " << s.best_accuracy << " steps " << s.steps << " csr v"
                << s.final_csr_version << '\n';
    } else {
      std::cout << "aborted: " << s.error << '\n';
    }
  }
}

int Status(const std::vector<pcm::RunResult>& results) {
  for (const auto& r : results) {
    if (r.incomplete) return kExitIncomplete;
  }
  return 0;
}

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pcm::ConfigError("cannot open " + path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised text classification with progressive class-semantic matching"};
  app.require_subcommand(1);

  pcm::ExperimentConfig config;
  try {
    config = InitialConfig(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::string method(pcm::MethodName(config.method));
  std::string accumulation = config.accumulation == pcm::ScoreAccumulation::kSum ? "sum" : "mean";
  std::string kl = config.kl_direction == pcm::KlDirection::kTargetToPrediction ? "target_to_prediction"
                                                                                  : "prediction_to_target";

  auto* train = app.add_subcommand("train", "Train and evaluate one method over all seeds");
  auto* init_csr = app.add_subcommand("init-csr", "Build and write the initial CSR for each seed");
  auto* ablate = app.add_subcommand("ablate", "Run the structure, CSR-update or DCDL ablation");
  auto* sweep = app.add_subcommand("sweep", "Vary the unlabeled pool size");
  for (auto* sub : {train, init_csr, ablate, sweep}) AddConfigOptions(sub, config, method, accumulation, kl);

  std::string which = "all";
  ablate->add_option("--which", which, "structure, csr-update, dcdl or all")->capture_default_str();
  std::vector<long> pools = {10000, 25000, 50000, 100000};
  sweep->add_option("--pools", pools, "Unlabeled pool sizes")->delimiter(',')->capture_default_str();

  auto* probe = app.add_subcommand("probe", "Inherent class-sentence matching probe with literal class words");
  std::string probe_encoder = "bert-base-uncased", probe_examples = "data/probe_examples.tsv",
              probe_classes = "data/probe_classes.txt", probe_out = "probe.json", probe_cache;
  probe->add_option("--encoder", probe_encoder, "Encoder directory or cache id")->capture_default_str();
  probe->add_option("--cache-dir", probe_cache, "Encoder cache directory");
  probe->add_option("--examples", probe_examples, "TSV with label<TAB>text")->capture_default_str();
  probe->add_option("--classes", probe_classes, "One class word per line")->capture_default_str();
  probe->add_option("--out", probe_out, "Result JSON")->capture_default_str();

  auto* report = app.add_subcommand("report", "Tables, plots and CSR lists from result directories");
  std::vector<std::string> report_inputs;
  std::string report_out = "report";
  report->add_option("inputs", report_inputs, "Directories searched for result.json")->required();
  report->add_option("--out", report_out, "Report directory")->capture_default_str();

  auto* make_fixture = app.add_subcommand("make-fixture", "Write the synthetic keyword corpus as TSV files");
  pcm::FixtureOptions fixture_options;
  std::string fixture_out = "fixture";
  make_fixture->add_option("--out", fixture_out, "Output directory")->capture_default_str();
  make_fixture->add_option("--seed", fixture_options.seed, "Generator seed")->capture_default_str();
  make_fixture->add_option("--train-size", fixture_options.train_size, "Training sentences")->capture_default_str();
  make_fixture->add_option("--test-size", fixture_options.test_size, "Test sentences")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*probe) {
      const std::vector<std::string> classes = ReadLines(probe_classes);
      const pcm::Corpus examples = pcm::LoadCorpus(probe_examples, "probe", pcm::Split::kTest,
                                                   static_cast<int>(classes.size()));
      std::vector<std::string> vocab_texts = examples.texts;
      vocab_texts.insert(vocab_texts.end(), classes.begin(), classes.end());
      const pcm::Encoder encoder = pcm::ResolveEncoder(
          probe_encoder, probe_cache.empty() ? pcm::DefaultCacheDir() : probe_cache, vocab_texts);
      json out = json::array();
      for (std::size_t i = 0; i < examples.size(); ++i) {
        const pcm::MatchProbeResult r = pcm::ProbeInherentMatching(encoder, examples.texts[i], classes);
        json item = r.ToJson();
        item["text"] = examples.texts[i];
        item["label"] = examples.labels[i];
        out.push_back(item);
        std::cout << "example " << i << " (label " << examples.labels[i] << "): top cosine class "
                  << std::distance(r.cosine.begin(), std::max_element(r.cosine.begin(), r.cosine.end())) << '\n';
      }
      std::ofstream(probe_out) << out.dump(2) << '\n';
      return 0;
    }
    if (*make_fixture) {
      const pcm::Fixture f = pcm::MakeKeywordFixture(fixture_options);
      fs::create_directories(fixture_out);
      pcm::SaveCorpus(f.train, (fs::path(fixture_out) / "train.tsv").string());
      pcm::SaveCorpus(f.test, (fs::path(fixture_out) / "test.tsv").string());
      std::cout << "wrote " << f.train.size() << " training and " << f.test.size() << " test sentences to "
                << fixture_out << '\n';
      return 0;
    }
    if (*report) {
      std::vector<pcm::RunResult> results;
      std::vector<std::pair<std::string, std::pair<pcm::CsrSet, pcm::CsrSet>>> csr_pairs;
      for (const auto& input : report_inputs) {
        for (const auto& entry : fs::recursive_directory_iterator(input)) {
          if (entry.path().filename() == "result.json") {
            std::ifstream in(entry.path());
            results.push_back(pcm::RunResult::FromJson(json::parse(in)));
          }
          if (entry.path().filename() == "csr_v0.json") {
            // Pair the initial CSR with the newest snapshot of the same run.
            int newest = 0;
            for (const auto& sib : fs::directory_iterator(entry.path().parent_path())) {
              const std::string name = sib.path().filename().string();
              if (name.rfind("csr_v", 0) == 0 && sib.path().extension() == ".json") {
                newest = std::max(newest, std::stoi(name.substr(5)));
              }
            }
            const fs::path last = entry.path().parent_path() / ("csr_v" + std::to_string(newest) + ".json");
            const std::string name = entry.path().parent_path().parent_path().filename().string() + "_" +
                                     entry.path().parent_path().filename().string();
            csr_pairs.push_back({name, {pcm::ReadCsrSnapshot(entry.path().string()), pcm::ReadCsrSnapshot(last.string())}});
          }
        }
      }
      pcm::WriteReport(report_out, results, csr_pairs);
      std::cout << pcm::RenderResultGrid(results);
      return 0;
    }

    FinishConfig(config, method, accumulation, kl);
    const pcm::ExperimentData data = pcm::LoadExperimentData(config);
    if (*train) {
      const pcm::RunResult r = pcm::RunMethod(config, data);
      PrintResult(r);
      return Status({r});
    }
    if (*init_csr) {
      for (std::uint64_t seed : config.seeds) {
        const pcm::SplitManifest m = pcm::SubsampleLabels(data.train, config.n_per_class, seed,
                                                          {config.pool_cap, config.validation_fraction});
        const pcm::TrainData td = pcm::PrepareTrainData(config, data, m);
        const pcm::CsrSet csr = pcm::BuildInitialCsr(config, data.encoder, td, seed);
        const fs::path dir = config.output_dir.empty() ? fs::path(".") : fs::path(config.output_dir);
        fs::create_directories(dir);
        const fs::path path = dir / ("csr_seed" + std::to_string(seed) + "_v0.json");
        pcm::WriteCsrSnapshot(path.string(), csr);
        std::cout << "seed " << seed << ": wrote " << path.string() << '\n';
        for (const auto& cls : csr.classes) {
          std::cout << "  class " << cls.class_id << ":";
          for (std::size_t i = 0; i < cls.words.size() && i < 10; ++i) std::cout << ' ' << cls.words[i].word;
          std::cout << '\n';
        }
      }
      return 0;
    }
    if (*ablate) {
      std::vector<pcm::RunResult> results;
      if (which == "structure" || which == "all") {
        auto [semantic, matching] = pcm::RunAblationStructure(config, data);
        results.push_back(semantic);
        results.push_back(matching);
      }
      if (which == "csr-update" || which == "all") {
        auto [frozen, updated] = pcm::RunAblationCsrUpdate(config, data);
        results.push_back(frozen);
        results.push_back(updated);
      }
      if (which == "dcdl" || which == "all") results.push_back(pcm::RunAblationDcdl(config, data));
      if (results.empty()) throw pcm::ConfigError("--which must be structure, csr-update, dcdl or all");
      for (const auto& r : results) PrintResult(r);
      return Status(results);
    }
    if (*sweep) {
      const std::vector<pcm::RunResult> results = pcm::RunUnlabeledSweep(config, data, pools);
      for (const auto& r : results) PrintResult(r);
      return Status(results);
    }
  } catch (const pcm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIncomplete;
  }
  return 0;
}
