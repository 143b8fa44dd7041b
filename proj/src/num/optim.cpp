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

#include "rtgmff/num/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rtgmff::num {

void adamw_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, OptimState& state,
                double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: params/grads count mismatch");
  if (lr < 0.0) throw std::invalid_argument("adamw_step: negative learning rate");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
      state.v[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& g = grads[i];
    if (g.size() != static_cast<std::size_t>(p.numel()) || state.m[i].size() != g.size()) {
      throw std::invalid_argument("adamw_step: gradient/moment shape mismatch at parameter " + std::to_string(i));
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    double* pd = p.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      pd[k] -= lr * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * pd[k]);
    }
  }
}

double lr_at(int epoch, int warmup_epochs, int max_epochs, double base_lr) {
  if (warmup_epochs < 0 || max_epochs <= warmup_epochs) {
    throw std::invalid_argument("lr_at: need 0 <= warmup_epochs < max_epochs");
  }
  if (epoch < 0 || epoch > max_epochs) {
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " outside [0," +
                                std::to_string(max_epochs) + "]");
  }
  if (epoch < warmup_epochs) {
    return base_lr * static_cast<double>(epoch) / static_cast<double>(warmup_epochs);
  }
  const double t = static_cast<double>(epoch - warmup_epochs);
  const double total = static_cast<double>(max_epochs - warmup_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * t / total));
}

}  // namespace rtgmff::num
