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

#ifndef ORTHROS_OPTIM_H_
#define ORTHROS_OPTIM_H_

#include <cstdint>
#include <vector>

#include "orthros/tensor.h"

namespace orthros {

// Adam moments plus the Noam schedule constants. Moment tensors are laid
// out by parameter index and sized lazily on the first step.
template <typename S>
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  int64_t step = 0;
  int warmup_steps = 25000;
  double lr_constant = 5.0;
  int d_model = 256;
  std::vector<Tensor<S>> m;
  std::vector<Tensor<S>> v;
};

// lr = constant * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
double noam_lr(int64_t step, int d_model, int warmup_steps, double constant);

// One bias-corrected Adam update from pre-summed gradients. Gradients are
// left untouched; the caller zeroes them.
template <typename S>
void adam_step(std::vector<Parameter<S>>& params, OptimizerState<S>& state,
               double lr);

extern template void adam_step<float>(std::vector<Parameter<float>>&,
                                      OptimizerState<float>&, double);
extern template void adam_step<double>(std::vector<Parameter<double>>&,
                                       OptimizerState<double>&, double);

}  // namespace orthros

#endif  // ORTHROS_OPTIM_H_
