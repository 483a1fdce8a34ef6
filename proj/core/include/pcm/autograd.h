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

#ifndef PCM_AUTOGRAD_H_
#define PCM_AUTOGRAD_H_

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// Every op takes a `Tape*`. With a null tape the op only computes its value,
// which is how evaluation-mode forwards run. With a tape, the op records a
// closure that pushes the output gradient back into its inputs; `Backward`
// replays the closures in reverse creation order, which is a valid
// topological order because ops can only consume already-built values.
namespace pcm::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node {
  Mat value;
  Mat grad;  // empty until a gradient flows in
  bool requires_grad = false;

  Mat& GradBuffer() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    return grad;
  }
  bool HasGrad() const { return grad.size() != 0; }
  void ZeroGrad() { grad.resize(0, 0); }
};

using Var = std::shared_ptr<Node>;

Var Constant(Mat value);
Var Parameter(Mat value);

class Tape {
 public:
  void Record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  // Seeds the given outputs with their upstream gradients and replays the
  // tape. The tape is empty afterwards.
  void Backward(const std::vector<std::pair<Var, Mat>>& seeds);
  void Clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

// Half-open row range [begin, end) into a stacked matrix.
struct RowRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

Var MatMul(Tape* tape, const Var& a, const Var& b);
// x * w + b, with `b` a 1 x out row broadcast over rows.
Var Linear(Tape* tape, const Var& x, const Var& w, const Var& b);
Var Add(Tape* tape, const Var& a, const Var& b);
Var Scale(Tape* tape, const Var& x, double factor);
Var Tanh(Tape* tape, const Var& x);
// Exact (erf) GELU, as used by BERT.
Var Gelu(Tape* tape, const Var& x);
Var LayerNorm(Tape* tape, const Var& x, const Var& gamma, const Var& beta, double eps);
// Inverted dropout. Identity when `rng` is null or `p` is 0.
Var Dropout(Tape* tape, const Var& x, double p, std::mt19937_64* rng);

// out[i] = table[indices[i]]; backward scatter-adds into the table gradient.
Var GatherRows(Tape* tape, const Var& table, std::span<const int> indices);
// Copy of `x` whose rows at `rows` are replaced by the rows of `values`.
// The replaced rows receive no gradient; `values` is treated as a constant.
Var OverrideRows(Tape* tape, const Var& x, std::span<const int> rows, const Mat& values);
// One output row per range: the mean of the covered input rows, or zeros for
// an empty range.
Var RangeMean(Tape* tape, const Var& x, std::span<const RowRange> ranges);
Var ConcatCols(Tape* tape, const Var& a, const Var& b);
Var Reshape(Tape* tape, const Var& x, int rows, int cols);

// Multi-head scaled dot-product attention over a padded batch stacked as
// [batch * seq, hidden]. Row b attends over its first lengths[b] keys only;
// query rows past lengths[b] produce zeros. When `probs_out` is non-null it
// receives batch * heads matrices of shape seq x seq (zero outside the valid
// square), indexed b * heads + h.
Var MultiHeadAttention(Tape* tape, const Var& q, const Var& k, const Var& v,
                       std::span<const int> lengths, int seq_len, int num_heads,
                       std::vector<Mat>* probs_out);

}  // namespace pcm::ag

#endif  // PCM_AUTOGRAD_H_
