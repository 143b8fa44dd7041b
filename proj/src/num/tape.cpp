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

#include "rtgmff/num/tape.hpp"

#include <stdexcept>

namespace rtgmff::num {

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs, std::shared_ptr<TensorImpl> output,
                  std::function<void()> backward) {
  output->requires_grad = true;
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be a scalar tensor");
  }
  if (nodes_.empty()) throw std::logic_error("Tape::backward: tape is empty");
  grad_buffer(loss.impl())[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient contribute nothing.
    if (!it->output->grad.empty()) it->backward();
  }
  clear();
}

Tape::NoGradGuard::NoGradGuard() : prev_(Tape::active().enabled_) { Tape::active().enabled_ = false; }

Tape::NoGradGuard::~NoGradGuard() { Tape::active().enabled_ = prev_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active().enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

std::vector<double>& grad_buffer(const std::shared_ptr<TensorImpl>& impl) {
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  return impl->grad;
}

}  // namespace rtgmff::num
