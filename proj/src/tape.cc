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

#include "orthros/tape.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

namespace orthros {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

template <typename S>
int Tape<S>::push(Tensor<S> v, std::function<void()> backfn) {
  vals_.push_back(std::move(v));
  backfns_.push_back(std::move(backfn));
  return static_cast<int>(vals_.size()) - 1;
}

template <typename S>
int Tape<S>::leaf(Tensor<S> v) {
  return push(std::move(v), nullptr);
}

template <typename S>
int Tape<S>::param(Parameter<S>* p) {
  check(p != nullptr, "tape: null parameter");
  int id = push(p->value, nullptr);
  params_.emplace_back(id, p);
  return id;
}

template <typename S>
Tensor<S>& Tape<S>::grad(int id) {
  check(grads_.size() == vals_.size(), "tape: no backward pass recorded");
  return grads_[id];
}

template <typename S>
int Tape<S>::add(int a, int b) {
  check(vals_[a].same_shape(vals_[b]), "add: shape mismatch");
  Tensor<S> out = vals_[a];
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += vals_[b][i];
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, a, b, id]() {
    const Tensor<S>& g = grads_[id];
    for (int64_t i = 0; i < g.numel(); ++i) {
      grads_[a][i] += g[i];
      grads_[b][i] += g[i];
    }
  };
  return id;
}

template <typename S>
int Tape<S>::sub(int a, int b) {
  check(vals_[a].same_shape(vals_[b]), "sub: shape mismatch");
  Tensor<S> out = vals_[a];
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= vals_[b][i];
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, a, b, id]() {
    const Tensor<S>& g = grads_[id];
    for (int64_t i = 0; i < g.numel(); ++i) {
      grads_[a][i] += g[i];
      grads_[b][i] -= g[i];
    }
  };
  return id;
}

template <typename S>
int Tape<S>::mul(int a, int b) {
  check(vals_[a].same_shape(vals_[b]), "mul: shape mismatch");
  Tensor<S> out = vals_[a];
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= vals_[b][i];
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, a, b, id]() {
    const Tensor<S>& g = grads_[id];
    for (int64_t i = 0; i < g.numel(); ++i) {
      grads_[a][i] += g[i] * vals_[b][i];
      grads_[b][i] += g[i] * vals_[a][i];
    }
  };
  return id;
}

template <typename S>
int Tape<S>::scale(int a, S c) {
  Tensor<S> out = vals_[a];
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, a, c, id]() {
    const Tensor<S>& g = grads_[id];
    for (int64_t i = 0; i < g.numel(); ++i) grads_[a][i] += c * g[i];
  };
  return id;
}

template <typename S>
int Tape<S>::add_bias(int x, int b) {
  const Tensor<S>& xv = vals_[x];
  const Tensor<S>& bv = vals_[b];
  check(xv.rank() == 2 && bv.rank() == 1 && bv.shape[0] == xv.cols(),
        "add_bias: shape mismatch");
  Tensor<S> out = xv;
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out.at(i, j) += bv[j];
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, b, id]() {
    const Tensor<S>& g = grads_[id];
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) {
        grads_[x].at(i, j) += g.at(i, j);
        grads_[b][j] += g.at(i, j);
      }
  };
  return id;
}

template <typename S>
int Tape<S>::matmul(int a, int b) {
  const Tensor<S>& av = vals_[a];
  const Tensor<S>& bv = vals_[b];
  check(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.rows(),
        "matmul: shape mismatch");
  const int n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor<S> out(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t)
        acc += static_cast<double>(av.at(i, t)) * bv.at(t, j);
      out.at(i, j) = static_cast<S>(acc);
    }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, a, b, id, n, k, m]() {
    const Tensor<S>& g = grads_[id];
    const Tensor<S>& av2 = vals_[a];
    const Tensor<S>& bv2 = vals_[b];
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < k; ++t) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
          acc += static_cast<double>(g.at(i, j)) * bv2.at(t, j);
        grads_[a].at(i, t) += static_cast<S>(acc);
      }
    for (int t = 0; t < k; ++t)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += static_cast<double>(av2.at(i, t)) * g.at(i, j);
        grads_[b].at(t, j) += static_cast<S>(acc);
      }
  };
  return id;
}

template <typename S>
int Tape<S>::matmul_nt(int a, int b) {
  const Tensor<S>& av = vals_[a];
  const Tensor<S>& bv = vals_[b];
  check(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
        "matmul_nt: shape mismatch");
  const int n = av.rows(), k = av.cols(), m = bv.rows();
  Tensor<S> out(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t)
        acc += static_cast<double>(av.at(i, t)) * bv.at(j, t);
      out.at(i, j) = static_cast<S>(acc);
    }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, a, b, id, n, k, m]() {
    const Tensor<S>& g = grads_[id];
    const Tensor<S>& av2 = vals_[a];
    const Tensor<S>& bv2 = vals_[b];
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < k; ++t) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
          acc += static_cast<double>(g.at(i, j)) * bv2.at(j, t);
        grads_[a].at(i, t) += static_cast<S>(acc);
      }
    for (int j = 0; j < m; ++j)
      for (int t = 0; t < k; ++t) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += static_cast<double>(g.at(i, j)) * av2.at(i, t);
        grads_[b].at(j, t) += static_cast<S>(acc);
      }
  };
  return id;
}

template <typename S>
int Tape<S>::relu(int x) {
  Tensor<S> out = vals_[x];
  for (int64_t i = 0; i < out.numel(); ++i)
    if (out[i] < S(0)) out[i] = S(0);
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, id]() {
    const Tensor<S>& g = grads_[id];
    for (int64_t i = 0; i < g.numel(); ++i)
      if (vals_[x][i] > S(0)) grads_[x][i] += g[i];
  };
  return id;
}

template <typename S>
int Tape<S>::softmax_rows(int x) {
  const Tensor<S>& xv = vals_[x];
  check(xv.rank() == 2, "softmax_rows: rank-2 input required");
  Tensor<S> out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i) {
    double m = kNegInf;
    for (int j = 0; j < xv.cols(); ++j)
      m = std::max(m, static_cast<double>(xv.at(i, j)));
    double z = 0.0;
    for (int j = 0; j < xv.cols(); ++j)
      z += std::exp(static_cast<double>(xv.at(i, j)) - m);
    for (int j = 0; j < xv.cols(); ++j)
      out.at(i, j) =
          static_cast<S>(std::exp(static_cast<double>(xv.at(i, j)) - m) / z);
  }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, id]() {
    const Tensor<S>& g = grads_[id];
    const Tensor<S>& y = vals_[id];
    for (int i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j)
        dot += static_cast<double>(y.at(i, j)) * g.at(i, j);
      for (int j = 0; j < g.cols(); ++j)
        grads_[x].at(i, j) += static_cast<S>(
            static_cast<double>(y.at(i, j)) * (g.at(i, j) - dot));
    }
  };
  return id;
}

template <typename S>
int Tape<S>::slice_rows(int x, int r0, int r1) {
  const Tensor<S>& xv = vals_[x];
  check(xv.rank() == 2 && 0 <= r0 && r0 < r1 && r1 <= xv.rows(),
        "slice_rows: bad range");
  Tensor<S> out(r1 - r0, xv.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < xv.cols(); ++j) out.at(i - r0, j) = xv.at(i, j);
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, r0, id]() {
    const Tensor<S>& g = grads_[id];
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        grads_[x].at(r0 + i, j) += g.at(i, j);
  };
  return id;
}

template <typename S>
int Tape<S>::slice_cols(int x, int c0, int c1) {
  const Tensor<S>& xv = vals_[x];
  check(xv.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= xv.cols(),
        "slice_cols: bad range");
  Tensor<S> out(xv.rows(), c1 - c0);
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = xv.at(i, j);
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, c0, id]() {
    const Tensor<S>& g = grads_[id];
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        grads_[x].at(i, c0 + j) += g.at(i, j);
  };
  return id;
}

template <typename S>
int Tape<S>::concat_cols(const std::vector<int>& xs) {
  check(!xs.empty(), "concat_cols: empty input list");
  const int n = vals_[xs[0]].rows();
  int width = 0;
  for (int x : xs) {
    check(vals_[x].rank() == 2 && vals_[x].rows() == n,
          "concat_cols: row mismatch");
    width += vals_[x].cols();
  }
  Tensor<S> out(n, width);
  int ofs = 0;
  for (int x : xs) {
    const Tensor<S>& xv = vals_[x];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < xv.cols(); ++j) out.at(i, ofs + j) = xv.at(i, j);
    ofs += xv.cols();
  }
  int id = push(std::move(out), nullptr);
  std::vector<int> parts = xs;
  backfns_[id] = [this, parts, id]() {
    const Tensor<S>& g = grads_[id];
    int o = 0;
    for (int x : parts) {
      Tensor<S>& gx = grads_[x];
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < gx.cols(); ++j) gx.at(i, j) += g.at(i, o + j);
      o += gx.cols();
    }
  };
  return id;
}

template <typename S>
int Tape<S>::zero_rows_from(int x, int r) {
  const Tensor<S>& xv = vals_[x];
  check(xv.rank() == 2 && r >= 0 && r <= xv.rows(),
        "zero_rows_from: bad row index");
  Tensor<S> out = xv;
  for (int i = r; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out.at(i, j) = S(0);
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, r, id]() {
    const Tensor<S>& g = grads_[id];
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < g.cols(); ++j) grads_[x].at(i, j) += g.at(i, j);
  };
  return id;
}

template <typename S>
int Tape<S>::embed_rows(int table, const std::vector<int>& ids) {
  const Tensor<S>& tv = vals_[table];
  check(tv.rank() == 2, "embed_rows: table must be rank 2");
  check(!ids.empty(), "embed_rows: empty id list");
  for (int v : ids)
    check(v >= 0 && v < tv.rows(), "embed_rows: id out of range");
  Tensor<S> out(static_cast<int>(ids.size()), tv.cols());
  for (size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < tv.cols(); ++j)
      out.at(static_cast<int>(i), j) = tv.at(ids[i], j);
  int id = push(std::move(out), nullptr);
  std::vector<int> ids_copy = ids;
  backfns_[id] = [this, table, ids_copy, id]() {
    const Tensor<S>& g = grads_[id];
    for (size_t i = 0; i < ids_copy.size(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        grads_[table].at(ids_copy[i], j) += g.at(static_cast<int>(i), j);
  };
  return id;
}

template <typename S>
int Tape<S>::layer_norm(int x, int gain, int bias, S eps) {
  const Tensor<S>& xv = vals_[x];
  const Tensor<S>& gv = vals_[gain];
  const Tensor<S>& bv = vals_[bias];
  check(xv.rank() == 2, "layer_norm: rank-2 input required");
  const int n = xv.rows(), d = xv.cols();
  check(gv.rank() == 1 && gv.shape[0] == d && bv.rank() == 1 &&
            bv.shape[0] == d,
        "layer_norm: gain/bias shape mismatch");
  Tensor<S> out(n, d);
  auto xhat = std::make_shared<std::vector<double>>(
      static_cast<size_t>(n) * d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xv.at(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = xv.at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[i] = inv;
    for (int j = 0; j < d; ++j) {
      double h = (xv.at(i, j) - mu) * inv;
      (*xhat)[static_cast<size_t>(i) * d + j] = h;
      out.at(i, j) = static_cast<S>(h * gv[j] + bv[j]);
    }
  }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, gain, bias, id, n, d, xhat, inv_std]() {
    const Tensor<S>& g = grads_[id];
    const Tensor<S>& gv2 = vals_[gain];
    for (int i = 0; i < n; ++i) {
      double mh = 0.0, mhx = 0.0;
      for (int j = 0; j < d; ++j) {
        double h = static_cast<double>(gv2[j]) * g.at(i, j);
        mh += h;
        mhx += h * (*xhat)[static_cast<size_t>(i) * d + j];
      }
      mh /= d;
      mhx /= d;
      for (int j = 0; j < d; ++j) {
        double h = static_cast<double>(gv2[j]) * g.at(i, j);
        double xh = (*xhat)[static_cast<size_t>(i) * d + j];
        grads_[x].at(i, j) +=
            static_cast<S>((*inv_std)[i] * (h - mh - xh * mhx));
        grads_[gain][j] += static_cast<S>(g.at(i, j) * xh);
        grads_[bias][j] += g.at(i, j);
      }
    }
  };
  return id;
}

template <typename S>
int Tape<S>::conv1d_k3s2(int x, int w, int b) {
  const Tensor<S>& xv = vals_[x];
  const Tensor<S>& wv = vals_[w];
  const Tensor<S>& bv = vals_[b];
  check(xv.rank() == 2, "conv1d: rank-2 input required");
  const int u = xv.rows(), cin = xv.cols();
  check(wv.rank() == 2 && wv.rows() == 3 * cin, "conv1d: kernel shape mismatch");
  const int cout = wv.cols();
  check(bv.rank() == 1 && bv.shape[0] == cout, "conv1d: bias shape mismatch");
  const int tout = (u + 1) / 2;
  Tensor<S> out(tout, cout);
  for (int t = 0; t < tout; ++t)
    for (int o = 0; o < cout; ++o) {
      double acc = bv[o];
      for (int kk = 0; kk < 3; ++kk) {
        int src = 2 * t + kk - 1;
        if (src < 0 || src >= u) continue;
        for (int c = 0; c < cin; ++c)
          acc += static_cast<double>(xv.at(src, c)) * wv.at(kk * cin + c, o);
      }
      out.at(t, o) = static_cast<S>(acc);
    }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, w, b, id, u, cin, cout, tout]() {
    const Tensor<S>& g = grads_[id];
    const Tensor<S>& xv2 = vals_[x];
    const Tensor<S>& wv2 = vals_[w];
    for (int t = 0; t < tout; ++t)
      for (int kk = 0; kk < 3; ++kk) {
        int src = 2 * t + kk - 1;
        if (src < 0 || src >= u) continue;
        for (int o = 0; o < cout; ++o) {
          const S go = g.at(t, o);
          for (int c = 0; c < cin; ++c) {
            grads_[x].at(src, c) += go * wv2.at(kk * cin + c, o);
            grads_[w].at(kk * cin + c, o) += xv2.at(src, c) * go;
          }
        }
      }
    for (int t = 0; t < tout; ++t)
      for (int o = 0; o < cout; ++o) grads_[b][o] += g.at(t, o);
  };
  return id;
}

template <typename S>
int Tape<S>::mean_rows(int x, int n_valid) {
  const Tensor<S>& xv = vals_[x];
  check(xv.rank() == 2, "mean_rows: rank-2 input required");
  check(n_valid >= 1, "mean_rows: no valid rows");
  check(n_valid <= xv.rows(), "mean_rows: valid count exceeds rows");
  Tensor<S> out(1, xv.cols());
  for (int j = 0; j < xv.cols(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < n_valid; ++i) acc += xv.at(i, j);
    out.at(0, j) = static_cast<S>(acc / n_valid);
  }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, n_valid, id]() {
    const Tensor<S>& g = grads_[id];
    for (int i = 0; i < n_valid; ++i)
      for (int j = 0; j < g.cols(); ++j)
        grads_[x].at(i, j) += g.at(0, j) / static_cast<S>(n_valid);
  };
  return id;
}

template <typename S>
int Tape<S>::dropout(int x, double rate, Rng& rng) {
  check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const Tensor<S>& xv = vals_[x];
  auto mask = std::make_shared<Tensor<S>>(xv.shape);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  Tensor<S> out = xv;
  for (int64_t i = 0; i < xv.numel(); ++i) {
    S m = rng.uniform() < rate ? S(0) : keep_scale;
    (*mask)[i] = m;
    out[i] *= m;
  }
  int id = push(std::move(out), nullptr);
  backfns_[id] = [this, x, mask, id]() {
    const Tensor<S>& g = grads_[id];
    for (int64_t i = 0; i < g.numel(); ++i)
      grads_[x][i] += g[i] * (*mask)[i];
  };
  return id;
}

template <typename S>
int Tape<S>::sum_all(int x) {
  double acc = 0.0;
  for (int64_t i = 0; i < vals_[x].numel(); ++i) acc += vals_[x][i];
  int id = push(Tensor<S>::scalar(static_cast<S>(acc)), nullptr);
  backfns_[id] = [this, x, id]() {
    const S g = grads_[id][0];
    for (int64_t i = 0; i < grads_[x].numel(); ++i) grads_[x][i] += g;
  };
  return id;
}

template <typename S>
int Tape<S>::cross_entropy(int logits, const std::vector<int>& targets,
                           int ignore_index, double smoothing) {
  const Tensor<S>& lv = vals_[logits];
  check(lv.rank() == 2, "cross_entropy: rank-2 logits required");
  const int n = lv.rows(), v = lv.cols();
  check(static_cast<int>(targets.size()) == n,
        "cross_entropy: target count mismatch");
  check(smoothing >= 0.0 && smoothing < 1.0,
        "cross_entropy: smoothing must be in [0, 1)");
  for (int t : targets)
    check(t == ignore_index || (t >= 0 && t < v),
          "cross_entropy: target out of range");

  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(n) * v);
  int n_used = 0;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double m = kNegInf;
    for (int j = 0; j < v; ++j)
      m = std::max(m, static_cast<double>(lv.at(i, j)));
    double z = 0.0;
    for (int j = 0; j < v; ++j)
      z += std::exp(static_cast<double>(lv.at(i, j)) - m);
    const double lse = m + std::log(z);
    double logp_sum = 0.0;
    for (int j = 0; j < v; ++j) {
      double lp = static_cast<double>(lv.at(i, j)) - lse;
      (*probs)[static_cast<size_t>(i) * v + j] = std::exp(lp);
      logp_sum += lp;
    }
    if (targets[i] == ignore_index) continue;
    ++n_used;
    const double logp_t = static_cast<double>(lv.at(i, targets[i])) - lse;
    loss -= (1.0 - smoothing) * logp_t + smoothing / v * logp_sum;
  }
  check(n_used > 0, "empty loss");
  loss /= n_used;

  int id = push(Tensor<S>::scalar(static_cast<S>(loss)), nullptr);
  std::vector<int> tg = targets;
  backfns_[id] = [this, logits, tg, ignore_index, smoothing, probs, id, n, v,
                  n_used]() {
    const double g = grads_[id][0];
    for (int i = 0; i < n; ++i) {
      if (tg[i] == ignore_index) continue;
      for (int j = 0; j < v; ++j) {
        double q = smoothing / v + (j == tg[i] ? 1.0 - smoothing : 0.0);
        grads_[logits].at(i, j) += static_cast<S>(
            g * ((*probs)[static_cast<size_t>(i) * v + j] - q) / n_used);
      }
    }
  };
  return id;
}

template <typename S>
int Tape<S>::ctc(int logits, const std::vector<int>& labels, int blank) {
  const Tensor<S>& lv = vals_[logits];
  check(lv.rank() == 2, "ctc: rank-2 logits required");
  const int t_len = lv.rows(), v = lv.cols();
  check(blank >= 0 && blank < v, "ctc: blank id out of range");
  for (int l : labels)
    check(l >= 0 && l < v && l != blank, "ctc: label out of range");
  const int n_lab = static_cast<int>(labels.size());
  int repeats = 0;
  for (int i = 1; i < n_lab; ++i)
    if (labels[i] == labels[i - 1]) ++repeats;
  check(t_len >= n_lab + repeats, "target longer than input");

  // Blank-augmented label row: blank at even states, labels at odd states.
  const int ns = 2 * n_lab + 1;
  std::vector<int> ext(ns, blank);
  for (int i = 0; i < n_lab; ++i) ext[2 * i + 1] = labels[i];
  auto can_skip = [ext, blank](int s) {
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  auto lp = std::make_shared<std::vector<double>>(
      static_cast<size_t>(t_len) * v);
  for (int t = 0; t < t_len; ++t) {
    double m = kNegInf;
    for (int j = 0; j < v; ++j)
      m = std::max(m, static_cast<double>(lv.at(t, j)));
    double z = 0.0;
    for (int j = 0; j < v; ++j)
      z += std::exp(static_cast<double>(lv.at(t, j)) - m);
    const double lse = m + std::log(z);
    for (int j = 0; j < v; ++j)
      (*lp)[static_cast<size_t>(t) * v + j] =
          static_cast<double>(lv.at(t, j)) - lse;
  }
  auto lpat = [lp, v](int t, int j) -> double {
    return (*lp)[static_cast<size_t>(t) * v + j];
  };

  auto alpha = std::make_shared<std::vector<double>>(
      static_cast<size_t>(t_len) * ns, kNegInf);
  auto a_at = [alpha, ns](int t, int s) -> double& {
    return (*alpha)[static_cast<size_t>(t) * ns + s];
  };
  a_at(0, 0) = lpat(0, ext[0]);
  if (ns > 1) a_at(0, 1) = lpat(0, ext[1]);
  for (int t = 1; t < t_len; ++t)
    for (int s = 0; s < ns; ++s) {
      double acc = a_at(t - 1, s);
      if (s >= 1) acc = logadd(acc, a_at(t - 1, s - 1));
      if (can_skip(s)) acc = logadd(acc, a_at(t - 1, s - 2));
      a_at(t, s) = acc + lpat(t, ext[s]);
    }
  double logp = a_at(t_len - 1, ns - 1);
  if (ns > 1) logp = logadd(logp, a_at(t_len - 1, ns - 2));
  check(logp != kNegInf, "ctc: zero-probability target");

  int id = push(Tensor<S>::scalar(static_cast<S>(-logp)), nullptr);
  backfns_[id] = [this, logits, ext, can_skip, lp, lpat, alpha, a_at, id,
                  t_len, v, ns, logp]() {
    const double g = grads_[id][0];
    // Suffix DP: beta[t][s] covers emissions t+1..T-1 completing from s.
    std::vector<double> beta(static_cast<size_t>(t_len) * ns, kNegInf);
    auto b_at = [&](int t, int s) -> double& {
      return beta[static_cast<size_t>(t) * ns + s];
    };
    b_at(t_len - 1, ns - 1) = 0.0;
    if (ns > 1) b_at(t_len - 1, ns - 2) = 0.0;
    for (int t = t_len - 2; t >= 0; --t)
      for (int s = 0; s < ns; ++s) {
        double acc = lpat(t + 1, ext[s]) + b_at(t + 1, s);
        if (s + 1 < ns)
          acc = logadd(acc, lpat(t + 1, ext[s + 1]) + b_at(t + 1, s + 1));
        if (s + 2 < ns && can_skip(s + 2))
          acc = logadd(acc, lpat(t + 1, ext[s + 2]) + b_at(t + 1, s + 2));
        b_at(t, s) = acc;
      }
    for (int t = 0; t < t_len; ++t) {
      std::vector<double> occ(v, kNegInf);
      for (int s = 0; s < ns; ++s)
        occ[ext[s]] = logadd(occ[ext[s]], a_at(t, s) + b_at(t, s));
      for (int j = 0; j < v; ++j) {
        double post = occ[j] == kNegInf ? 0.0 : std::exp(occ[j] - logp);
        grads_[logits].at(t, j) +=
            static_cast<S>(g * (std::exp(lpat(t, j)) - post));
      }
    }
  };
  return id;
}

template <typename S>
void Tape<S>::backward(int loss) {
  check(loss >= 0 && loss < size(), "backward: bad node id");
  check(vals_[loss].numel() == 1, "backward: loss must be a scalar");
  grads_.clear();
  grads_.reserve(vals_.size());
  for (const Tensor<S>& vref : vals_) grads_.emplace_back(vref.shape);
  grads_[loss][0] = S(1);
  for (int i = size() - 1; i >= 0; --i)
    if (backfns_[i]) backfns_[i]();
  for (auto& [id, p] : params_) {
    check(p->grad.same_shape(grads_[id]), "backward: parameter shape changed");
    for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] += grads_[id][i];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace orthros
