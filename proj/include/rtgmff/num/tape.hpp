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

#include <functional>
#include <memory>
#include <vector>

#include "rtgmff/num/tensor.hpp"

namespace rtgmff::num {

/// Wengert list for reverse-mode differentiation. Ops append nodes in
/// execution order, which is a topological order by construction, so the
/// backward sweep is a single reverse pass that visits each node once.
/// One tape per thread; training confines a tape to its own thread.
class Tape {
 public:
  struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward;
  };

  /// The calling thread's tape.
  static Tape& active();

  bool enabled() const { return enabled_; }
  std::size_t size() const { return nodes_.size(); }

  void record(std::vector<std::shared_ptr<TensorImpl>> inputs, std::shared_ptr<TensorImpl> output,
              std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1, runs the recorded backward rules in
  /// reverse order (gradients accumulate with +=), then clears the tape.
  /// `loss` must be a scalar produced on this tape.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

  /// Suspends recording for the enclosing scope (evaluation passes).
  class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool prev_;
  };

 private:
  std::vector<Node> nodes_;
  bool enabled_ = true;
};

/// True when recording is on and any input participates in the graph.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Ensures a grad buffer exists (zero-filled) and returns it.
std::vector<double>& grad_buffer(const std::shared_ptr<TensorImpl>& impl);

}  // namespace rtgmff::num
