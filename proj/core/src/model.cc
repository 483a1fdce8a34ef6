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

#include "pcm/model.h"

#include <cmath>
#include <filesystem>

#include "pcm/tensor_io.h"

namespace pcm {
namespace {

ag::Var UniformParam(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  ag::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return ag::Parameter(std::move(m));
}

ag::Var CloneVar(const ag::Var& v) { return ag::Parameter(v->value); }

std::string MatchingName(MatchingHead m) {
  switch (m) {
    case MatchingHead::kNone: return "none";
    case MatchingHead::kCsrSlots: return "csr_slots";
    case MatchingHead::kPooled: return "pooled";
  }
  return "none";
}

MatchingHead MatchingFromName(const std::string& s) {
  if (s == "csr_slots") return MatchingHead::kCsrSlots;
  if (s == "pooled") return MatchingHead::kPooled;
  if (s == "none") return MatchingHead::kNone;
  throw ConfigError("unknown matching head kind " + s);
}

}  // namespace

MlpHead::MlpHead(int in, const HeadConfig& config, int out, std::mt19937_64& rng) : config_(config) {
  if (config.hidden <= 0) throw ConfigError("head hidden size must be positive");
  if (config.activation != "tanh" && config.activation != "gelu") {
    throw ConfigError("unsupported head activation " + config.activation);
  }
  const double b_in = 1.0 / std::sqrt(static_cast<double>(in));
  const double b_hidden = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  w1_ = UniformParam(in, config.hidden, b_in, rng);
  b1_ = UniformParam(1, config.hidden, b_in, rng);
  w2_ = UniformParam(config.hidden, out, b_hidden, rng);
  b2_ = UniformParam(1, out, b_hidden, rng);
}

ag::Var MlpHead::Forward(ag::Tape* tape, const ag::Var& x) const {
  ag::Var h = ag::Linear(tape, x, w1_, b1_);
  h = config_.activation == "gelu" ? ag::Gelu(tape, h) : ag::Tanh(tape, h);
  return ag::Linear(tape, h, w2_, b2_);
}

std::vector<std::pair<std::string, ag::Var>> MlpHead::NamedParameters(const std::string& prefix) const {
  return {{prefix + ".dense1.weight", w1_}, {prefix + ".dense1.bias", b1_},
          {prefix + ".dense2.weight", w2_}, {prefix + ".dense2.bias", b2_}};
}

MlpHead MlpHead::Clone() const {
  MlpHead h;
  h.config_ = config_;
  h.w1_ = CloneVar(w1_);
  h.b1_ = CloneVar(b1_);
  h.w2_ = CloneVar(w2_);
  h.b2_ = CloneVar(b2_);
  return h;
}

ag::Mat SoftmaxRows(const ag::Mat& logits) {
  ag::Mat p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

ag::Mat Sigmoid(const ag::Mat& logits) {
  return logits.unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

std::vector<int> ArgmaxRows(const ag::Mat& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

DualHeadOutputs DualHeadOutputs::FromLogits(const ag::Mat* semantic, const ag::Mat* matching) {
  DualHeadOutputs o;
  if (semantic != nullptr) {
    o.semantic_logits = *semantic;
    o.semantic_probs = SoftmaxRows(*semantic);
  }
  if (matching != nullptr) {
    o.matching_logits = *matching;
    o.matching_probs = Sigmoid(*matching);
  }
  return o;
}

DualHeadOutputs DualHeadForward::Values() const {
  return DualHeadOutputs::FromLogits(semantic_logits ? &semantic_logits->value : nullptr,
                                     matching_logits ? &matching_logits->value : nullptr);
}

PcmModel::PcmModel(Encoder encoder, int num_classes, ModelLayout layout, HeadConfig head, std::uint64_t seed)
    : encoder_(std::move(encoder)), num_classes_(num_classes), layout_(layout), head_config_(std::move(head)) {
  if (num_classes < 1) throw ConfigError("model needs at least one class");
  if (!layout_.semantic && !layout_.has_matching()) throw ConfigError("model needs at least one head");
  if (layout_.matching == MatchingHead::kCsrSlots && !layout_.csr_slots) {
    throw ConfigError("the CSR matching head requires the CSR-slot layout");
  }
  std::mt19937_64 rng(seed);
  const int hidden = encoder_.config().hidden;
  if (layout_.semantic) semantic_ = MlpHead(hidden, head_config_, num_classes, rng);
  if (layout_.matching == MatchingHead::kCsrSlots) matching_ = MlpHead(2 * hidden, head_config_, 1, rng);
  if (layout_.matching == MatchingHead::kPooled) matching_ = MlpHead(hidden, head_config_, num_classes, rng);
}

EncodedBatch PcmModel::Encode(std::span<const TokenizedText> texts, const CsrSet* csr, int max_len,
                              TruncationSide side) const {
  if (layout_.csr_slots) {
    if (csr == nullptr) throw ConfigError("CSR-slot layout needs an active CSR set");
    return EncodeWithCsr(texts, *csr, encoder_.tokenizer(), max_len, side);
  }
  return EncodePlain(texts, encoder_.tokenizer(), max_len, side);
}

DualHeadForward PcmModel::Forward(const EncodedBatch& batch, const CsrSet* csr, ForwardMode mode) const {
  if (layout_.csr_slots) {
    if (csr == nullptr || batch.num_slots == 0) throw ConfigError("CSR-slot model got a batch without CSR slots");
    if (batch.csr_version != csr->version) {
      throw ConfigError("stale batch: encoded with CSR version " + std::to_string(batch.csr_version) +
                        " but the active CSR is version " + std::to_string(csr->version));
    }
    if (batch.num_slots != num_classes_) throw ConfigError("batch has a CSR slot count different from K");
  }
  DualHeadForward f;
  f.encoder = encoder_.Forward(batch, mode);
  f.sentence = SentenceRepresentation(mode.tape, f.encoder, batch);
  if (semantic_) f.semantic_logits = semantic_->Forward(mode.tape, f.sentence);
  if (layout_.matching == MatchingHead::kPooled) f.matching_logits = matching_->Forward(mode.tape, f.sentence);
  if (layout_.matching == MatchingHead::kCsrSlots) {
    std::vector<int> sentence_rows;
    std::vector<int> slot_rows;
    for (int b = 0; b < batch.batch_size; ++b) {
      for (int k = 0; k < num_classes_; ++k) {
        sentence_rows.push_back(b);
        slot_rows.push_back(batch.At(b, batch.csr_slots[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)]));
      }
    }
    ag::Var pairs = ag::ConcatCols(mode.tape, ag::GatherRows(mode.tape, f.sentence, sentence_rows),
                                   ag::GatherRows(mode.tape, f.encoder.token_features, slot_rows));
    f.matching_logits = ag::Reshape(mode.tape, matching_->Forward(mode.tape, pairs), batch.batch_size, num_classes_);
  }
  return f;
}

DualHeadOutputs PcmModel::Evaluate(const EncodedBatch& batch, const CsrSet* csr) const {
  return Forward(batch, csr, ForwardMode::Eval()).Values();
}

std::vector<int> PcmModel::Predict(const EncodedBatch& batch, const CsrSet* csr, PredictionHead head) const {
  const DualHeadOutputs o = Evaluate(batch, csr);
  if (head == PredictionHead::kMatching) {
    if (!o.has_matching()) throw ConfigError("model has no matching head to predict with");
    return ArgmaxRows(o.matching_probs);
  }
  if (!o.has_semantic()) throw ConfigError("model has no semantic head to predict with");
  return ArgmaxRows(o.semantic_probs);
}

std::vector<std::pair<std::string, ag::Var>> PcmModel::NamedParameters() const {
  std::vector<std::pair<std::string, ag::Var>> out;
  for (auto& np : encoder_.NamedParameters()) out.push_back(np);
  if (semantic_) {
    for (auto& np : semantic_->NamedParameters("semantic_head")) out.push_back(np);
  }
  if (matching_) {
    for (auto& np : matching_->NamedParameters("matching_head")) out.push_back(np);
  }
  return out;
}

std::vector<ParamGroup> PcmModel::ParamGroups(double encoder_lr, double head_lr, double weight_decay) const {
  ParamGroup enc_decay{"encoder", {}, encoder_lr, weight_decay};
  ParamGroup enc_plain{"encoder_no_decay", {}, encoder_lr, 0.0};
  ParamGroup head_decay{"heads", {}, head_lr, weight_decay};
  ParamGroup head_plain{"heads_no_decay", {}, head_lr, 0.0};
  auto exempt = [](const std::string& name) {
    return name.find("bias") != std::string::npos || name.find("LayerNorm") != std::string::npos;
  };
  for (auto& [name, p] : encoder_.NamedParameters()) (exempt(name) ? enc_plain : enc_decay).params.push_back(p);
  std::vector<std::pair<std::string, ag::Var>> heads;
  if (semantic_) heads = semantic_->NamedParameters("semantic_head");
  if (matching_) {
    auto m = matching_->NamedParameters("matching_head");
    heads.insert(heads.end(), m.begin(), m.end());
  }
  for (auto& [name, p] : heads) (exempt(name) ? head_plain : head_decay).params.push_back(p);
  return {enc_decay, enc_plain, head_decay, head_plain};
}

PcmModel PcmModel::Clone() const {
  PcmModel m;
  m.encoder_ = encoder_.Clone();
  m.num_classes_ = num_classes_;
  m.layout_ = layout_;
  m.head_config_ = head_config_;
  if (semantic_) m.semantic_ = semantic_->Clone();
  if (matching_) m.matching_ = matching_->Clone();
  return m;
}

void PcmModel::Save(const std::string& dir, int csr_version) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  encoder_.Save((fs::path(dir) / "encoder").string());
  nlohmann::json meta = {{"num_classes", num_classes_},
                         {"csr_slots", layout_.csr_slots},
                         {"semantic", layout_.semantic},
                         {"matching", MatchingName(layout_.matching)},
                         {"head_hidden", head_config_.hidden},
                         {"head_activation", head_config_.activation},
                         {"csr_version", csr_version}};
  std::vector<std::pair<std::string, const ag::Mat*>> tensors;
  std::vector<std::pair<std::string, ag::Var>> heads;
  if (semantic_) heads = semantic_->NamedParameters("semantic_head");
  if (matching_) {
    auto m = matching_->NamedParameters("matching_head");
    heads.insert(heads.end(), m.begin(), m.end());
  }
  for (const auto& [name, p] : heads) tensors.emplace_back(name, &p->value);
  WriteTensorFile((fs::path(dir) / "heads.pcmt").string(), meta, tensors);
}

PcmModel PcmModel::Load(const std::string& dir, int* csr_version) {
  namespace fs = std::filesystem;
  const TensorFile heads = ReadTensorFile((fs::path(dir) / "heads.pcmt").string());
  const auto& meta = heads.meta;
  ModelLayout layout;
  layout.csr_slots = meta.at("csr_slots").get<bool>();
  layout.semantic = meta.at("semantic").get<bool>();
  layout.matching = MatchingFromName(meta.at("matching").get<std::string>());
  HeadConfig hc{meta.at("head_hidden").get<int>(), meta.at("head_activation").get<std::string>()};
  PcmModel m(Encoder::Load((fs::path(dir) / "encoder").string()), meta.at("num_classes").get<int>(), layout, hc, 0);
  std::vector<std::pair<std::string, ag::Var>> named;
  if (m.semantic_) named = m.semantic_->NamedParameters("semantic_head");
  if (m.matching_) {
    auto mm = m.matching_->NamedParameters("matching_head");
    named.insert(named.end(), mm.begin(), mm.end());
  }
  for (auto& [name, p] : named) {
    auto it = heads.tensors.find(name);
    if (it == heads.tensors.end()) throw ConfigError("head checkpoint is missing " + name);
    p->value = it->second;
  }
  if (csr_version != nullptr) *csr_version = meta.at("csr_version").get<int>();
  return m;
}

}  // namespace pcm
