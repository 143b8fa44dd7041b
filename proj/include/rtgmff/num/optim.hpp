// Copyright 2026 The RTGMFF Authors
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

#pragma once

#include <vector>

#include "rtgmff/num/tensor.hpp"

namespace rtgmff::num {

/// Per-parameter AdamW state. One instance per parameter group so groups
/// can run at different base learning rates.
struct OptimState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  long step = 0;
  // Indexed like the parameter list handed to adamw_step.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One decoupled-weight-decay Adam step over `params` with gradients
/// `grads` (same order/shapes). Allocates moment buffers on first use.
/// Bit-deterministic: identical inputs give identical updates.
void adamw_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, OptimState& state,
                double lr);

/// Cosine annealing with linear warm-up, evaluated per epoch:
/// epochs [0, warmup] ramp linearly 0 -> base, afterwards
/// base * 0.5*(1 + cos(pi * t / T)) with t = epoch - warmup and
/// T = max_epochs - warmup, reaching 0 at max_epochs.
double lr_at(int epoch, int warmup_epochs, int max_epochs, double base_lr);

}  // namespace rtgmff::num
