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

#include "orthros/optim.h"

#include <cmath>

namespace orthros {

double noam_lr(int64_t step, int d_model, int warmup_steps, double constant) {
  check(step >= 1, "noam_lr: step must be positive");
  check(d_model >= 1 && warmup_steps >= 1, "noam_lr: bad schedule constants");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return constant * std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

template <typename S>
void adam_step(std::vector<Parameter<S>>& params, OptimizerState<S>& state,
               double lr) {
  if (state.m.empty()) {
    for (const Parameter<S>& p : params) {
      state.m.emplace_back(p.value.shape);
      state.v.emplace_back(p.value.shape);
    }
  }
  check(state.m.size() == params.size(), "adam_step: shape mismatch");
  const int64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter<S>& p = params[i];
    check(state.m[i].same_shape(p.value) && p.grad.same_shape(p.value),
          "adam_step: shape mismatch");
    for (int64_t j = 0; j < p.value.numel(); ++j) {
      const double g = static_cast<double>(p.grad[j]);
      double m = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * g;
      double v = state.beta2 * state.v[i][j] + (1.0 - state.beta2) * g * g;
      state.m[i][j] = static_cast<S>(m);
      state.v[i][j] = static_cast<S>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p.value[j] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  state.step = t;
}

template void adam_step<float>(std::vector<Parameter<float>>&,
                               OptimizerState<float>&, double);
template void adam_step<double>(std::vector<Parameter<double>>&,
                                OptimizerState<double>&, double);

}  // namespace orthros
