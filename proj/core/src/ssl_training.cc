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

#include "pcm/ssl_training.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pcm {
namespace {

double Clamp(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }
bool Unclamped(double p) { return p >= kProbEpsilon && p <= 1.0 - kProbEpsilon; }

// Sum over classes of BCE(sigmoid probs, onehot(label)); adds d/dlogits.
double BceRow(const ag::Mat& probs, Eigen::Index row, int label, ag::Mat& grad, double weight) {
  double loss = 0.0;
  for (Eigen::Index k = 0; k < probs.cols(); ++k) {
    const double p = probs(row, k);
    const double y = k == label ? 1.0 : 0.0;
    loss += -y * std::log(Clamp(p)) - (1.0 - y) * std::log(1.0 - Clamp(p));
    if (Unclamped(p)) grad(row, k) += weight * (p - y);
  }
  return loss;
}

// Cycles through a shuffled index set, reshuffling at each epoch boundary.
class Sampler {
 public:
  Sampler(std::size_t n, std::mt19937_64* rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
    Shuffle();
  }

  std::vector<int> Next(int count) {
    std::vector<int> out;
    if (order_.empty()) return out;
    for (int i = 0; i < count; ++i) {
      if (pos_ == order_.size()) {
        Shuffle();
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void Shuffle() { std::shuffle(order_.begin(), order_.end(), *rng_); }

  std::vector<int> order_;
  std::size_t pos_ = 0;
  std::mt19937_64* rng_;
};

template <typename T>
std::vector<T> Pick(const std::vector<T>& from, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(from[static_cast<std::size_t>(i)]);
  return out;
}

std::mt19937_64 Stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

void AppendRows(ag::Mat& into, const ag::Mat& rows) {
  if (rows.size() == 0) return;
  const Eigen::Index old = into.rows();
  into.conservativeResize(old + rows.rows(), rows.cols());
  into.bottomRows(rows.rows()) = rows;
}

}  // namespace

void GateConfig::Validate() const {
  if (!(confid1 > 0.0 && confid1 <= 1.0)) throw ConfigError("confid1 must be in (0, 1]");
  if (!(confid2 > 0.0 && confid2 <= 1.0)) throw ConfigError("confid2 must be in (0, 1]");
  if (!(temperature > 0.0 && temperature <= 1.0)) throw ConfigError("temperature must be in (0, 1]");
}

LossTerms LabeledLoss(const DualHeadOutputs& outputs, std::span<const int> labels) {
  LossTerms t;
  t.rows = static_cast<int>(labels.size());
  if (t.rows != outputs.rows()) throw std::invalid_argument("LabeledLoss: label count != rows");
  const double w = t.rows > 0 ? 1.0 / t.rows : 0.0;
  if (outputs.has_semantic()) {
    const ag::Mat& p = outputs.semantic_probs;
    t.grad_semantic_logits = ag::Mat::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= p.cols()) throw std::out_of_range("LabeledLoss: label out of range");
      t.semantic += -std::log(Clamp(p(i, y))) * w;
      if (Unclamped(p(i, y))) {
        t.grad_semantic_logits.row(i) += w * p.row(i);
        t.grad_semantic_logits(i, y) -= w;
      }
    }
  }
  if (outputs.has_matching()) {
    const ag::Mat& p = outputs.matching_probs;
    t.grad_matching_logits = ag::Mat::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= p.cols()) throw std::out_of_range("LabeledLoss: label out of range");
      t.matching += BceRow(p, i, y, t.grad_matching_logits, w) * w;
    }
  }
  t.total = t.semantic + t.matching;
  return t;
}

Eigen::VectorXd Sharpen(const Eigen::VectorXd& logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("sharpening temperature must be positive");
  const Eigen::VectorXd z = logits / temperature;
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

std::vector<PseudoTarget> Gate(const DualHeadOutputs& original, const GateConfig& config,
                               const GateConditions& conditions) {
  const bool sem = original.has_semantic();
  const bool mat = original.has_matching();
  std::vector<PseudoTarget> out(static_cast<std::size_t>(original.rows()));
  for (int i = 0; i < original.rows(); ++i) {
    PseudoTarget& t = out[static_cast<std::size_t>(i)];
    Eigen::Index sem_arg = -1;
    Eigen::Index mat_arg = -1;
    if (sem) {
      // maxCoeff returns the first maximum, i.e. the lowest index on ties.
      t.semantic_confident = original.semantic_probs.row(i).maxCoeff(&sem_arg) >= config.confid1;
    }
    if (mat) t.matching_confident = original.matching_probs.row(i).maxCoeff(&mat_arg) >= config.confid2;
    t.heads_agree = sem && mat && sem_arg == mat_arg;

    bool pass = true;
    if (sem && conditions.semantic_confidence) pass = pass && t.semantic_confident;
    if (mat && conditions.matching_confidence) pass = pass && t.matching_confident;
    if (sem && mat && conditions.agreement) pass = pass && t.heads_agree;
    t.passed = pass;
    if (!pass) continue;
    t.hard_label = static_cast<int>(mat ? mat_arg : sem_arg);
    if (sem) t.sharpened = Sharpen(original.semantic_logits.row(i).transpose(), config.temperature);
  }
  return out;
}

LossTerms UnlabeledLoss(const DualHeadOutputs& augmented, std::span<const PseudoTarget> targets,
                        KlDirection direction) {
  LossTerms t;
  if (static_cast<int>(targets.size()) != augmented.rows()) {
    throw std::invalid_argument("UnlabeledLoss: target count != rows");
  }
  for (const auto& target : targets) t.rows += target.passed ? 1 : 0;
  if (augmented.has_semantic()) t.grad_semantic_logits = ag::Mat::Zero(augmented.rows(), augmented.semantic_probs.cols());
  if (augmented.has_matching()) t.grad_matching_logits = ag::Mat::Zero(augmented.rows(), augmented.matching_probs.cols());
  if (t.rows == 0) return t;
  const double w = 1.0 / t.rows;

  for (Eigen::Index i = 0; i < augmented.rows(); ++i) {
    const PseudoTarget& target = targets[static_cast<std::size_t>(i)];
    if (!target.passed) continue;
    if (augmented.has_semantic() && target.sharpened.size() > 0) {
      const auto p = augmented.semantic_probs.row(i);
      const Eigen::VectorXd& q = target.sharpened;
      double kl = 0.0;
      if (direction == KlDirection::kTargetToPrediction) {
        double mass = 0.0;
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          if (q(k) > 0.0) kl += q(k) * (std::log(q(k)) - std::log(Clamp(p(k))));
          if (Unclamped(p(k))) mass += q(k);
        }
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          t.grad_semantic_logits(i, k) += w * (p(k) * mass - (Unclamped(p(k)) ? q(k) : 0.0));
        }
      } else {
        Eigen::VectorXd g(p.size());
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          kl += p(k) * (std::log(Clamp(p(k))) - std::log(Clamp(q(k))));
          g(k) = std::log(Clamp(p(k))) - std::log(Clamp(q(k))) + (Unclamped(p(k)) ? 1.0 : 0.0);
        }
        const double mean_g = p.dot(g.transpose());
        for (Eigen::Index k = 0; k < p.size(); ++k) t.grad_semantic_logits(i, k) += w * p(k) * (g(k) - mean_g);
      }
      t.semantic += w * kl;
    }
    if (augmented.has_matching()) {
      t.matching += w * BceRow(augmented.matching_probs, i, target.hard_label, t.grad_matching_logits, w);
    }
  }
  t.total = t.semantic + t.matching;
  return t;
}

TrainState::TrainState(std::uint64_t s)
    : seed(s),
      labeled_order(Stream(s, 1)),
      unlabeled_order(Stream(s, 2)),
      labeled_dropout(Stream(s, 3)),
      unlabeled_dropout(Stream(s, 4)),
      view_choice(Stream(s, 5)) {}

StepLoss ComputeStepLoss(const PcmModel& model, const EncodedBatch& labeled, std::span<const int> labels,
                         const EncodedBatch* augmented, std::span<const PseudoTarget> targets, const CsrSet* csr,
                         const TrainConfig& config, bool backward, std::mt19937_64* labeled_dropout,
                         std::mt19937_64* unlabeled_dropout) {
  StepLoss out;
  auto run_backward = [](ag::Tape& tape, const DualHeadForward& f, const LossTerms& loss, double scale) {
    std::vector<std::pair<ag::Var, ag::Mat>> seeds;
    if (f.semantic_logits) seeds.emplace_back(f.semantic_logits, loss.grad_semantic_logits * scale);
    if (f.matching_logits) seeds.emplace_back(f.matching_logits, loss.grad_matching_logits * scale);
    tape.Backward(seeds);
  };

  if (labeled.batch_size > 0) {
    ag::Tape tape;
    const DualHeadForward f = model.Forward(labeled, csr, {backward ? &tape : nullptr, labeled_dropout});
    out.labeled = LabeledLoss(f.Values(), labels);
    if (backward) run_backward(tape, f, out.labeled, 1.0);
  }
  if (augmented != nullptr && augmented->batch_size > 0 && config.lambda_u != 0.0) {
    ag::Tape tape;
    const DualHeadForward f = model.Forward(*augmented, csr, {backward ? &tape : nullptr, unlabeled_dropout});
    out.unlabeled = UnlabeledLoss(f.Values(), targets, config.kl_direction);
    if (backward && out.unlabeled.rows > 0) run_backward(tape, f, out.unlabeled, config.lambda_u);
  }
  out.total = out.labeled.total + config.lambda_u * out.unlabeled.total;
  return out;
}

StepStats TrainStep(PcmModel& model, AdamW& optimizer, std::span<const TokenizedText> labeled,
                    std::span<const int> labels, std::span<const TokenizedText> unlabeled,
                    std::span<const std::vector<TokenizedText>> augmented_views, const CsrSet* csr,
                    const TrainConfig& config, TrainState& state) {
  StepStats stats;
  const EncodedBatch labeled_batch = model.Encode(labeled, csr, config.max_len, config.side);

  std::vector<PseudoTarget> gated;
  std::optional<EncodedBatch> augmented_batch;
  if (config.use_unlabeled && !unlabeled.empty()) {
    const EncodedBatch original = model.Encode(unlabeled, csr, config.max_len, config.side);
    const std::vector<PseudoTarget> targets = Gate(model.Evaluate(original, csr), config.gate, config.conditions);
    std::vector<TokenizedText> views;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const PseudoTarget& t = targets[i];
      stats.semantic_confident += t.semantic_confident ? 1 : 0;
      stats.matching_confident += t.matching_confident ? 1 : 0;
      stats.heads_agree += t.heads_agree ? 1 : 0;
      if (!t.passed) continue;
      const auto& options = augmented_views[i];
      std::size_t pick = 0;
      if (options.size() > 1) pick = std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(state.view_choice);
      views.push_back(options[pick]);
      gated.push_back(t);
    }
    stats.unlabeled_rows = static_cast<int>(targets.size());
    stats.gated_rows = static_cast<int>(gated.size());
    if (!views.empty() && config.lambda_u != 0.0) {
      augmented_batch = model.Encode(views, csr, config.max_len, config.side);
    }
  }

  const StepLoss loss = ComputeStepLoss(model, labeled_batch, labels, augmented_batch ? &*augmented_batch : nullptr,
                                        gated, csr, config, true, &state.labeled_dropout, &state.unlabeled_dropout);
  if (!std::isfinite(loss.total)) {
    optimizer.ZeroGrad();
    throw TrainingDiverged("non-finite loss at step " + std::to_string(state.step + 1));
  }
  stats.loss_labeled = loss.labeled.total;
  stats.loss_unlabeled = loss.unlabeled.total;
  stats.loss_total = loss.total;
  stats.grad_norm = optimizer.Step();
  ++state.step;
  return stats;
}

DualHeadOutputs EvaluateTexts(const PcmModel& model, std::span<const TokenizedText> texts, const CsrSet* csr,
                              const TrainConfig& config) {
  DualHeadOutputs all;
  const std::size_t step = static_cast<std::size_t>(std::max(1, config.eval_batch));
  for (std::size_t begin = 0; begin < texts.size(); begin += step) {
    const auto chunk = texts.subspan(begin, std::min(step, texts.size() - begin));
    const DualHeadOutputs o = model.Evaluate(model.Encode(chunk, csr, config.max_len, config.side), csr);
    AppendRows(all.semantic_logits, o.semantic_logits);
    AppendRows(all.semantic_probs, o.semantic_probs);
    AppendRows(all.matching_logits, o.matching_logits);
    AppendRows(all.matching_probs, o.matching_probs);
  }
  return all;
}

double Accuracy(const PcmModel& model, std::span<const TokenizedText> texts, std::span<const int> labels,
                const CsrSet* csr, const TrainConfig& config, PredictionHead head) {
  if (texts.empty()) return 0.0;
  const DualHeadOutputs o = EvaluateTexts(model, texts, csr, config);
  const ag::Mat& probs = head == PredictionHead::kMatching ? o.matching_probs : o.semantic_probs;
  if (probs.size() == 0) throw ConfigError("model lacks the head requested for prediction");
  const std::vector<int> pred = ArgmaxRows(probs);
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return 100.0 * correct / static_cast<double>(pred.size());
}

QualifyingSet FindQualifying(const PcmModel& model, std::span<const TokenizedText> texts, const CsrSet* csr,
                             const TrainConfig& config) {
  QualifyingSet q;
  if (texts.empty()) return q;
  const std::vector<PseudoTarget> targets = Gate(EvaluateTexts(model, texts, csr, config), config.gate, config.conditions);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!targets[i].passed) continue;
    q.indices.push_back(static_cast<int>(i));
    q.pseudo_labels.push_back(targets[i].hard_label);
  }
  return q;
}

TrainResult Train(PcmModel& model, std::optional<CsrSet> initial_csr, const TrainData& data,
                  const TrainConfig& config, const StopWords& stopwords, const LogSink& log_sink,
                  const CsrSink& csr_sink) {
  config.gate.Validate();
  if (data.labeled.empty()) throw ConfigError("training needs at least one labeled sample");
  if (data.augmented.size() != data.unlabeled.size()) throw ConfigError("augmented views misaligned with unlabeled set");
  const bool slots = model.layout().csr_slots;
  if (slots && !initial_csr) throw ConfigError("CSR-slot model needs an initial CSR");

  TrainResult result;
  std::optional<CsrSet> active;
  if (slots) {
    active = std::move(initial_csr);
    result.csr_history.push_back(*active);
  }
  auto csr_ptr = [&]() -> const CsrSet* { return active ? &*active : nullptr; };
  auto emit = [&](nlohmann::json record) {
    if (log_sink) log_sink(record);
    result.log.push_back(std::move(record));
  };

  MiningOptions mining = config.mining;
  mining.max_len = config.max_len;
  mining.side = config.side;

  AdamW optimizer(model.ParamGroups(config.encoder_lr, config.head_lr, config.weight_decay), config.adam);
  TrainState state(config.seed);
  Sampler labeled_sampler(data.labeled.size(), &state.labeled_order);
  Sampler unlabeled_sampler(data.unlabeled.size(), &state.unlabeled_order);

  const bool has_pool = !data.unlabeled.empty();
  auto ceil_div = [](std::size_t a, int b) { return static_cast<long>((a + static_cast<std::size_t>(b) - 1) / static_cast<std::size_t>(b)); };
  const long per_epoch = has_pool ? ceil_div(data.unlabeled.size(), config.unlabeled_batch)
                                  : ceil_div(data.labeled.size(), config.labeled_batch);
  const long total = config.max_steps > 0 ? config.max_steps : config.epochs * per_epoch;

  CsrUpdateTrigger trigger;
  int last_val_count = -1;
  int best_val_count = -1;
  int checks_without_gain = 0;

  StepStats sum;
  long interval_steps = 0;
  for (long step = 1; step <= total; ++step) {
    const std::vector<int> li = labeled_sampler.Next(config.labeled_batch);
    const std::vector<TokenizedText> lt = Pick(data.labeled, li);
    const std::vector<int> ll = Pick(data.labels, li);
    std::vector<TokenizedText> ut;
    std::vector<std::vector<TokenizedText>> uv;
    if (config.use_unlabeled && has_pool) {
      const std::vector<int> ui = unlabeled_sampler.Next(config.unlabeled_batch);
      ut = Pick(data.unlabeled, ui);
      uv = Pick(data.augmented, ui);
    }
    const StepStats s = TrainStep(model, optimizer, lt, ll, ut, uv, csr_ptr(), config, state);
    sum.loss_total += s.loss_total;
    sum.loss_labeled += s.loss_labeled;
    sum.loss_unlabeled += s.loss_unlabeled;
    sum.unlabeled_rows += s.unlabeled_rows;
    sum.gated_rows += s.gated_rows;
    sum.semantic_confident += s.semantic_confident;
    sum.matching_confident += s.matching_confident;
    sum.heads_agree += s.heads_agree;
    ++interval_steps;

    bool stop = false;
    if (config.check_every > 0 && step % config.check_every == 0 && !data.validation.empty()) {
      last_val_count = FindQualifying(model, data.validation, csr_ptr(), config).count();
      const CsrUpdateTrigger::Decision d = trigger.Observe(last_val_count);
      checks_without_gain = d.should_update ? 0 : checks_without_gain + 1;
      if (slots && config.csr_updates && d.should_update) {
        const QualifyingSet pool = FindQualifying(model, data.unlabeled, csr_ptr(), config);
        const std::vector<TokenizedText> texts = Pick(data.unlabeled, pool.indices);
        std::vector<int> retained;
        CsrSet next = UpdateCsr(*active, {data.labeled, data.labels, texts, pool.pseudo_labels}, model.encoder(), true,
                                stopwords, mining, d.qualifying_count, &retained);
        active = std::move(next);
        state.active_csr_version = active->version;
        result.csr_history.push_back(*active);
        emit({{"event", "csr_update"}, {"step", step}, {"csr_version", active->version},
              {"validation_qualifying", d.qualifying_count}, {"pool_qualifying", pool.count()},
              {"retained_classes", retained}});
        if (csr_sink) csr_sink(*active, model);
      }
      stop = config.early_stop_patience > 0 && checks_without_gain >= config.early_stop_patience;
    }

    const bool eval_now = (config.eval_every > 0 && step % config.eval_every == 0) || step == total || stop;
    if (eval_now) {
      if (last_val_count < 0 && !data.validation.empty()) {
        last_val_count = FindQualifying(model, data.validation, csr_ptr(), config).count();
      }
      const double acc = Accuracy(model, data.test, data.test_labels, csr_ptr(), config, config.predict_with);
      double matching_acc = -1.0;
      if (model.layout().has_matching() && !data.test.empty()) {
        matching_acc = Accuracy(model, data.test, data.test_labels, csr_ptr(), config, PredictionHead::kMatching);
      }
      if (last_val_count >= best_val_count) {
        best_val_count = last_val_count;
        result.best_accuracy = acc;
        result.best_step = step;
      }
      result.final_accuracy = acc;
      result.final_matching_accuracy = matching_acc;
      const double n = static_cast<double>(interval_steps);
      const double rows = std::max(1, sum.unlabeled_rows);
      emit({{"event", "interval"},
            {"step", step},
            {"loss_total", sum.loss_total / n},
            {"loss_labeled", sum.loss_labeled / n},
            {"loss_unlabeled", sum.loss_unlabeled / n},
            {"gate_pass_rate", sum.gated_rows / rows},
            {"semantic_confidence_rate", sum.semantic_confident / rows},
            {"matching_confidence_rate", sum.matching_confident / rows},
            {"agreement_rate", sum.heads_agree / rows},
            {"validation_qualifying", last_val_count},
            {"csr_version", active ? active->version : -1},
            {"test_accuracy", acc},
            {"test_accuracy_matching", matching_acc}});
      sum = StepStats{};
      interval_steps = 0;
    }
    result.steps = step;
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

Encoder FineTuneForCsr(const Encoder& pretrained, const TrainData& data, const HeadConfig& head, int epochs,
                       const TrainConfig& config) {
  PcmModel model(pretrained.Clone(), data.num_classes, {false, true, MatchingHead::kNone}, head, config.seed ^ 0x9e3779b9ULL);
  TrainData labeled_only;
  labeled_only.num_classes = data.num_classes;
  labeled_only.labeled = data.labeled;
  labeled_only.labels = data.labels;
  TrainConfig c = config;
  c.use_unlabeled = false;
  c.csr_updates = false;
  c.check_every = 0;
  c.eval_every = 0;
  c.early_stop_patience = 0;
  c.predict_with = PredictionHead::kSemantic;
  const long per_epoch = static_cast<long>((data.labeled.size() + static_cast<std::size_t>(c.labeled_batch) - 1) /
                                           static_cast<std::size_t>(c.labeled_batch));
  c.max_steps = std::max(1L, epochs * per_epoch);
  Train(model, std::nullopt, labeled_only, c, StopWords::English());
  return model.encoder().Clone();
}

}  // namespace pcm
