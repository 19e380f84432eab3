// Copyright 2026 Orthros Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ORTHROS_TAPE_H_
#define ORTHROS_TAPE_H_

#include <functional>
#include <vector>

#include "orthros/common.h"
#include "orthros/tensor.h"

namespace orthros {

// Reverse-mode autodiff over a linear tape of tensor nodes. Forward calls
// record one node per op; backward() replays the tape in reverse. Node
// handles are plain indices into the tape, valid for the tape's lifetime.
// The tape must not be moved once ops are recorded (closures capture `this`).
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant input node; receives no gradient of its own.
  int leaf(Tensor<S> v);
  // Parameter input node: after backward(), d loss/d value is added into
  // p->grad. The value is snapshotted at record time.
  int param(Parameter<S>* p);

  const Tensor<S>& val(int id) const { return vals_[id]; }
  Tensor<S>& grad(int id);
  int size() const { return static_cast<int>(vals_.size()); }

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, S c);
  int add_bias(int x, int b);          // x: [n,d], b: [d]
  int matmul(int a, int b);            // [n,k] x [k,m]
  int matmul_nt(int a, int b);         // [n,k] x [m,k]^T
  int relu(int x);
  int softmax_rows(int x);
  int slice_rows(int x, int r0, int r1);
  int slice_cols(int x, int c0, int c1);
  int concat_cols(const std::vector<int>& xs);
  int zero_rows_from(int x, int r);    // rows >= r forced to 0
  int embed_rows(int table, const std::vector<int>& ids);
  int layer_norm(int x, int gain, int bias, S eps);
  // 1-D convolution over rows: kernel 3, stride 2, same padding.
  // x: [U, c_in], w: [3*c_in, c_out], b: [c_out] -> [ceil(U/2), c_out].
  int conv1d_k3s2(int x, int w, int b);
  int mean_rows(int x, int n_valid);   // mean of rows [0, n_valid) -> [1,d]
  int dropout(int x, double rate, Rng& rng);
  int sum_all(int x);                  // -> scalar [1]

  // Mean label-smoothed cross entropy over rows whose target is not
  // ignore_index. logits: [n,V]; -> scalar [1].
  int cross_entropy(int logits, const std::vector<int>& targets,
                    int ignore_index, double smoothing);
  // CTC negative log-likelihood of `labels` under per-frame logits [T,V]
  // with the given blank id; forward DP in log space. -> scalar [1].
  int ctc(int logits, const std::vector<int>& labels, int blank);

  // Accumulates d loss/d p into every recorded parameter's grad. `loss`
  // must be a scalar node. Node-local grads are reset on each call, so
  // repeated calls keep accumulating into the parameters.
  void backward(int loss);

 private:
  int push(Tensor<S> v, std::function<void()> backfn);

  std::vector<Tensor<S>> vals_;
  std::vector<Tensor<S>> grads_;
  std::vector<std::function<void()>> backfns_;
  std::vector<std::pair<int, Parameter<S>*>> params_;
  bool in_backward_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace orthros

#endif  // ORTHROS_TAPE_H_
