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

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace rtgmff::num {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Shared storage behind a Tensor handle. `grad` stays empty until the
/// first backward accumulation touches it.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
};

/// Dense row-major f64 tensor. Handles have value semantics over shared
/// storage; `clone()` gives an independent copy. All values are required
/// to be finite; ops check their outputs and throw on NaN/Inf.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& values() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  /// Value of a single-element tensor.
  double item() const;
  double at(std::initializer_list<std::int64_t> idx) const;
  double& at_ref(std::initializer_list<std::int64_t> idx);

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer, zeros if backward never reached this tensor.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy with grad tracking stripped.
  Tensor detach() const;
  /// Deep copy (values only).
  Tensor clone() const;

  /// Debug dump: matrices as rows of comma-separated values, other ranks
  /// flattened to one row.
  void to_csv(std::ostream& os) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Throws if any element of `t` is NaN or infinite. `what` names the
/// producing operation in the error message.
void check_finite(const Tensor& t, const char* what);

}  // namespace rtgmff::num
