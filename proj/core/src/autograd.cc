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

#include "pcm/autograd.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcm::ag {
namespace {

Var MakeOutput(Mat value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

bool Tracks(Tape* tape, std::initializer_list<const Var*> inputs) {
  if (tape == nullptr) return false;
  for (const Var* in : inputs) {
    if ((*in)->requires_grad) return true;
  }
  return false;
}

void CheckSameShape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var Constant(Mat value) { return MakeOutput(std::move(value), false); }

Var Parameter(Mat value) { return MakeOutput(std::move(value), true); }

void Tape::Backward(const std::vector<std::pair<Var, Mat>>& seeds) {
  for (const auto& [var, g] : seeds) {
    CheckSameShape(var->value, g, "Backward seed");
    var->GradBuffer() += g;
  }
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  steps_.clear();
}

Var MatMul(Tape* tape, const Var& a, const Var& b) {
  if (a->value.cols() != b->value.rows()) throw std::invalid_argument("MatMul: inner dims");
  const bool track = Tracks(tape, {&a, &b});
  Var out = MakeOutput(a->value * b->value, track);
  if (track) {
    tape->Record([a, b, o = out] {
      if (!o->HasGrad()) return;
      if (a->requires_grad) a->GradBuffer().noalias() += o->grad * b->value.transpose();
      if (b->requires_grad) b->GradBuffer().noalias() += a->value.transpose() * o->grad;
    });
  }
  return out;
}

Var Linear(Tape* tape, const Var& x, const Var& w, const Var& b) {
  if (x->value.cols() != w->value.rows() || b->value.rows() != 1 ||
      b->value.cols() != w->value.cols()) {
    throw std::invalid_argument("Linear: shape mismatch");
  }
  const bool track = Tracks(tape, {&x, &w, &b});
  Mat y = x->value * w->value;
  y.rowwise() += b->value.row(0);
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([x, w, b, o = out] {
      if (!o->HasGrad()) return;
      if (x->requires_grad) x->GradBuffer().noalias() += o->grad * w->value.transpose();
      if (w->requires_grad) w->GradBuffer().noalias() += x->value.transpose() * o->grad;
      if (b->requires_grad) b->GradBuffer() += o->grad.colwise().sum();
    });
  }
  return out;
}

Var Add(Tape* tape, const Var& a, const Var& b) {
  CheckSameShape(a->value, b->value, "Add");
  const bool track = Tracks(tape, {&a, &b});
  Var out = MakeOutput(a->value + b->value, track);
  if (track) {
    tape->Record([a, b, o = out] {
      if (!o->HasGrad()) return;
      if (a->requires_grad) a->GradBuffer() += o->grad;
      if (b->requires_grad) b->GradBuffer() += o->grad;
    });
  }
  return out;
}

Var Scale(Tape* tape, const Var& x, double factor) {
  const bool track = Tracks(tape, {&x});
  Var out = MakeOutput(x->value * factor, track);
  if (track) {
    tape->Record([x, factor, o = out] {
      if (o->HasGrad()) x->GradBuffer() += o->grad * factor;
    });
  }
  return out;
}

Var Tanh(Tape* tape, const Var& x) {
  const bool track = Tracks(tape, {&x});
  Var out = MakeOutput(x->value.array().tanh().matrix(), track);
  if (track) {
    tape->Record([x, o = out] {
      if (!o->HasGrad()) return;
      x->GradBuffer().array() += o->grad.array() * (1.0 - o->value.array().square());
    });
  }
  return out;
}

Var Gelu(Tape* tape, const Var& x) {
  const bool track = Tracks(tape, {&x});
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Mat y = x->value.unaryExpr([inv_sqrt2](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([x, inv_sqrt2, o = out] {
      if (!o->HasGrad()) return;
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
      Mat d = x->value.unaryExpr([&](double v) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * std::exp(-0.5 * v * v) * inv_sqrt_2pi;
      });
      x->GradBuffer().array() += o->grad.array() * d.array();
    });
  }
  return out;
}

Var LayerNorm(Tape* tape, const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x->value.rows();
  const Eigen::Index d = x->value.cols();
  if (gamma->value.cols() != d || beta->value.cols() != d) {
    throw std::invalid_argument("LayerNorm: parameter width");
  }
  Mat xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x->value.row(i).mean();
    const double var = (x->value.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x->value.row(i).array() - mean) * inv_std(i);
  }
  Mat y = (xhat.array().rowwise() * gamma->value.row(0).array()).matrix();
  y.rowwise() += beta->value.row(0);
  const bool track = Tracks(tape, {&x, &gamma, &beta});
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), o = out] {
      if (!o->HasGrad()) return;
      const Mat& dy = o->grad;
      if (gamma->requires_grad) gamma->GradBuffer() += (dy.array() * xhat.array()).colwise().sum().matrix();
      if (beta->requires_grad) beta->GradBuffer() += dy.colwise().sum();
      if (!x->requires_grad) return;
      const double width = static_cast<double>(xhat.cols());
      Mat dxhat = (dy.array().rowwise() * gamma->value.row(0).array()).matrix();
      Mat& dx = x->GradBuffer();
      for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
        const double sum_d = dxhat.row(i).sum();
        const double sum_dx = dxhat.row(i).dot(xhat.row(i));
        dx.row(i).array() += (inv_std(i) / width) *
            (width * dxhat.row(i).array() - sum_d - xhat.row(i).array() * sum_dx);
      }
    });
  }
  return out;
}

Var Dropout(Tape* tape, const Var& x, double p, std::mt19937_64* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("Dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Mat mask(x->value.rows(), x->value.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : 0.0;
  const bool track = Tracks(tape, {&x});
  Var out = MakeOutput((x->value.array() * mask.array()).matrix(), track);
  if (track) {
    tape->Record([x, mask = std::move(mask), o = out] {
      if (o->HasGrad()) x->GradBuffer().array() += o->grad.array() * mask.array();
    });
  }
  return out;
}

Var GatherRows(Tape* tape, const Var& table, std::span<const int> indices) {
  const Eigen::Index rows = table->value.rows();
  Mat y(static_cast<Eigen::Index>(indices.size()), table->value.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= rows) throw std::out_of_range("GatherRows: index out of range");
    y.row(static_cast<Eigen::Index>(i)) = table->value.row(indices[i]);
  }
  const bool track = Tracks(tape, {&table});
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([table, idx = std::vector<int>(indices.begin(), indices.end()), o = out] {
      if (!o->HasGrad()) return;
      Mat& g = table->GradBuffer();
      for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += o->grad.row(static_cast<Eigen::Index>(i));
    });
  }
  return out;
}

Var OverrideRows(Tape* tape, const Var& x, std::span<const int> rows, const Mat& values) {
  if (static_cast<Eigen::Index>(rows.size()) != values.rows() || values.cols() != x->value.cols()) {
    throw std::invalid_argument("OverrideRows: shape mismatch");
  }
  Mat y = x->value;
  for (std::size_t i = 0; i < rows.size(); ++i) y.row(rows[i]) = values.row(static_cast<Eigen::Index>(i));
  const bool track = Tracks(tape, {&x});
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([x, r = std::vector<int>(rows.begin(), rows.end()), o = out] {
      if (!o->HasGrad()) return;
      Mat g = o->grad;
      for (int row : r) g.row(row).setZero();
      x->GradBuffer() += g;
    });
  }
  return out;
}

Var RangeMean(Tape* tape, const Var& x, std::span<const RowRange> ranges) {
  Mat y = Mat::Zero(static_cast<Eigen::Index>(ranges.size()), x->value.cols());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const RowRange r = ranges[i];
    if (r.begin < 0 || r.end > x->value.rows() || r.begin > r.end) throw std::out_of_range("RangeMean: range");
    if (r.size() == 0) continue;
    y.row(static_cast<Eigen::Index>(i)) = x->value.middleRows(r.begin, r.size()).colwise().sum() / r.size();
  }
  const bool track = Tracks(tape, {&x});
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([x, rs = std::vector<RowRange>(ranges.begin(), ranges.end()), o = out] {
      if (!o->HasGrad()) return;
      Mat& g = x->GradBuffer();
      for (std::size_t i = 0; i < rs.size(); ++i) {
        if (rs[i].size() == 0) continue;
        const RowVec share = o->grad.row(static_cast<Eigen::Index>(i)) / rs[i].size();
        for (int row = rs[i].begin; row < rs[i].end; ++row) g.row(row) += share;
      }
    });
  }
  return out;
}

Var ConcatCols(Tape* tape, const Var& a, const Var& b) {
  if (a->value.rows() != b->value.rows()) throw std::invalid_argument("ConcatCols: row mismatch");
  Mat y(a->value.rows(), a->value.cols() + b->value.cols());
  y << a->value, b->value;
  const bool track = Tracks(tape, {&a, &b});
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([a, b, o = out] {
      if (!o->HasGrad()) return;
      if (a->requires_grad) a->GradBuffer() += o->grad.leftCols(a->value.cols());
      if (b->requires_grad) b->GradBuffer() += o->grad.rightCols(b->value.cols());
    });
  }
  return out;
}

Var Reshape(Tape* tape, const Var& x, int rows, int cols) {
  if (static_cast<Eigen::Index>(rows) * cols != x->value.size()) throw std::invalid_argument("Reshape: size");
  Mat y = Eigen::Map<const Mat>(x->value.data(), rows, cols);
  const bool track = Tracks(tape, {&x});
  Var out = MakeOutput(std::move(y), track);
  if (track) {
    tape->Record([x, o = out] {
      if (!o->HasGrad()) return;
      x->GradBuffer() += Eigen::Map<const Mat>(o->grad.data(), x->value.rows(), x->value.cols());
    });
  }
  return out;
}

Var MultiHeadAttention(Tape* tape, const Var& q, const Var& k, const Var& v,
                       std::span<const int> lengths, int seq_len, int num_heads,
                       std::vector<Mat>* probs_out) {
  const Eigen::Index hidden = q->value.cols();
  const int batch = static_cast<int>(lengths.size());
  if (hidden % num_heads != 0) throw std::invalid_argument("MultiHeadAttention: heads must divide hidden");
  if (q->value.rows() != static_cast<Eigen::Index>(batch) * seq_len) {
    throw std::invalid_argument("MultiHeadAttention: rows != batch * seq");
  }
  CheckSameShape(q->value, k->value, "MultiHeadAttention");
  CheckSameShape(q->value, v->value, "MultiHeadAttention");
  const int head_dim = static_cast<int>(hidden / num_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Mat ctx = Mat::Zero(q->value.rows(), hidden);
  // Probabilities per (row, head), L x L over the valid square.
  std::vector<Mat> probs(static_cast<std::size_t>(batch) * num_heads);
  for (int b = 0; b < batch; ++b) {
    const int len = lengths[b];
    if (len <= 0 || len > seq_len) throw std::invalid_argument("MultiHeadAttention: bad length");
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * seq_len;
    for (int h = 0; h < num_heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
      Mat scores = (q->value.block(r0, c0, len, head_dim) * k->value.block(r0, c0, len, head_dim).transpose()) * scale;
      for (Eigen::Index i = 0; i < len; ++i) {
        const double m = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - m).exp();
        scores.row(i) /= scores.row(i).sum();
      }
      ctx.block(r0, c0, len, head_dim).noalias() = scores * v->value.block(r0, c0, len, head_dim);
      probs[static_cast<std::size_t>(b) * num_heads + h] = std::move(scores);
    }
  }
  if (probs_out != nullptr) {
    probs_out->assign(probs.size(), Mat());
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < num_heads; ++h) {
        const std::size_t idx = static_cast<std::size_t>(b) * num_heads + h;
        Mat& full = (*probs_out)[idx];
        full = Mat::Zero(seq_len, seq_len);
        full.topLeftCorner(lengths[b], lengths[b]) = probs[idx];
      }
    }
  }

  const bool track = Tracks(tape, {&q, &k, &v});
  Var out = MakeOutput(std::move(ctx), track);
  if (track) {
    tape->Record([q, k, v, lens = std::vector<int>(lengths.begin(), lengths.end()), probs = std::move(probs),
                  seq_len, num_heads, head_dim, scale, o = out] {
      if (!o->HasGrad()) return;
      Mat& dq = q->GradBuffer();
      Mat& dk = k->GradBuffer();
      Mat& dv = v->GradBuffer();
      for (std::size_t b = 0; b < lens.size(); ++b) {
        const int len = lens[b];
        const Eigen::Index r0 = static_cast<Eigen::Index>(b) * seq_len;
        for (int h = 0; h < num_heads; ++h) {
          const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
          const Mat& p = probs[b * num_heads + h];
          const auto dctx = o->grad.block(r0, c0, len, head_dim);
          dv.block(r0, c0, len, head_dim).noalias() += p.transpose() * dctx;
          Mat dp = dctx * v->value.block(r0, c0, len, head_dim).transpose();
          const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
          Mat ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
          dq.block(r0, c0, len, head_dim).noalias() += ds * k->value.block(r0, c0, len, head_dim);
          dk.block(r0, c0, len, head_dim).noalias() += ds.transpose() * q->value.block(r0, c0, len, head_dim);
        }
      }
    });
  }
  return out;
}

}  // namespace pcm::ag
