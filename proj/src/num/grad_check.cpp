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

#include "rtgmff/num/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtgmff/num/tape.hpp"

namespace rtgmff::num {

double GradCheckReport::max_rel_err() const {
  double mx = 0.0;
  for (const auto& l : leaves) mx = std::max(mx, l.max_rel_err);
  return mx;
}

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& builder,
                           std::vector<Tensor> leaves, const std::vector<std::string>& names, double step) {
  if (names.size() != leaves.size()) throw std::invalid_argument("grad_check: one name per leaf required");
  for (auto& l : leaves) l.set_requires_grad(true);

  // Analytic pass.
  for (auto& l : leaves) l.zero_grad();
  Tape::active().clear();
  Tensor loss = builder(leaves);
  if (loss.numel() != 1) throw std::invalid_argument("grad_check: builder must return a scalar loss");
  if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite loss");
  Tape::active().backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& l : leaves) analytic.push_back(l.grad());

  // Numeric pass, recording off.
  GradCheckReport report;
  Tape::NoGradGuard guard;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    GradCheckReport::Leaf entry;
    entry.name = names[li];
    double* vals = leaves[li].data();
    for (std::int64_t k = 0; k < leaves[li].numel(); ++k) {
      const double orig = vals[k];
      vals[k] = orig + step;
      const double fp = builder(leaves).item();
      vals[k] = orig - step;
      const double fm = builder(leaves).item();
      vals[k] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) throw std::runtime_error("grad_check: non-finite loss");
      const double fd = (fp - fm) / (2.0 * step);
      const double ad = analytic[li][static_cast<std::size_t>(k)];
      const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-6});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.leaves.push_back(std::move(entry));
  }
  return report;
}

}  // namespace rtgmff::num
