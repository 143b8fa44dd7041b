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

#include "rtgmff/num/tensor.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rtgmff::num {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: nonpositive extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match value count " +
                                std::to_string(values.size()));
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("Tensor::item on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

static std::size_t flat_index(const Shape& shape, std::initializer_list<std::int64_t> idx) {
  if (idx.size() != shape.size()) throw std::logic_error("Tensor index rank mismatch");
  std::size_t flat = 0;
  std::size_t k = 0;
  for (auto i : idx) {
    if (i < 0 || i >= shape[k]) throw std::out_of_range("Tensor index out of range");
    flat = flat * static_cast<std::size_t>(shape[k]) + static_cast<std::size_t>(i);
    ++k;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const { return impl_->data[flat_index(shape(), idx)]; }

double& Tensor::at_ref(std::initializer_list<std::int64_t> idx) { return impl_->data[flat_index(shape(), idx)]; }

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::detach() const {
  Tensor t(shape(), values(), false);
  return t;
}

Tensor Tensor::clone() const {
  Tensor t(shape(), values(), requires_grad());
  return t;
}

void Tensor::to_csv(std::ostream& os) const {
  if (rank() == 2) {
    const auto rows = dim(0), cols = dim(1);
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        if (c) os << ',';
        os << impl_->data[static_cast<std::size_t>(r * cols + c)];
      }
      os << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < impl_->data.size(); ++i) {
    if (i) os << ',';
    os << impl_->data[i];
  }
  os << '\n';
}

void check_finite(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(what) + ": non-finite value in output of shape " + shape_str(t.shape()));
    }
  }
}

}  // namespace rtgmff::num
