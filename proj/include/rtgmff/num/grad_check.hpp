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
#include <string>
#include <vector>

#include "rtgmff/num/tensor.hpp"

namespace rtgmff::num {

struct GradCheckReport {
  struct Leaf {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<Leaf> leaves;

  double max_rel_err() const;
  bool pass(double tol) const { return max_rel_err() < tol; }
};

/// Compares reverse-mode gradients against central finite differences.
///
/// `builder` must be a pure function of the leaf values: it is invoked
/// once under the tape for the analytic gradients and then repeatedly
/// with perturbed leaves (recording off) for the numeric reference. Leaves
/// are named for the report; relative error per element is
/// |ad - fd| / max(|ad|, |fd|, 1e-6). Throws if any forward value is
/// non-finite. Note relu is checked at its subgradient convention, so
/// builders should avoid placing inputs exactly on the kink.
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& builder,
                           std::vector<Tensor> leaves, const std::vector<std::string>& names,
                           double step = 1e-5);

}  // namespace rtgmff::num
