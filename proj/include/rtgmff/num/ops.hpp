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

#include "rtgmff/num/tape.hpp"
#include "rtgmff/num/tensor.hpp"

namespace rtgmff::num {

// Elementwise binary ops. `b` may have the same shape as `a`, be a single
// element, or be a 1-D tensor matching a's last extent (row broadcast);
// gradients reduce over the broadcast positions.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Unary ops.
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Softmax along `axis`; rows are shifted by their max before
/// exponentiation and renormalized, so outputs sum to 1 exactly up to
/// the final division.
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);

/// Normalizes over the last axis: gamma * (x - mu)/sqrt(var + eps) + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

enum class PadMode { kZero, kReflect };

/// 2-D convolution on an [H,W,Cin] image with an [kh,kw,Cin,Cout] kernel.
/// Output extent per axis is floor((n + 2*pad - k)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad,
              PadMode mode = PadMode::kZero);
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad, PadMode mode = PadMode::kZero);

/// Depthwise 2-D convolution: [H,W,C] with [kh,kw,C], one filter per channel.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad,
                        PadMode mode = PadMode::kZero);

/// Average pooling on [H,W,C]; zero padding counts toward the mean.
Tensor avg_pool2d(const Tensor& x, int k, int stride, int pad = 0);

/// Nearest-neighbour 2x upsampling of an [h,w,C] grid.
Tensor upsample_nearest2(const Tensor& x);

/// Per-channel normalization of [H,W,C] over the spatial positions.
/// Training mode uses the batch statistics and folds them into the running
/// buffers with the given momentum; eval mode reads the running buffers.
/// The running buffers are plain value tensors, never differentiated.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum = 0.1, double eps = 1e-5);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len);
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor transpose(const Tensor& x, const std::vector<int>& perm);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduction over one axis; the axis is dropped from the result shape.
Tensor sum_axis(const Tensor& x, int axis);
Tensor mean_axis(const Tensor& x, int axis);

/// Cosine similarity of two equal-length vectors; throws when either norm
/// is zero. Built from primitive ops, so it differentiates through.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

/// Mean softmax cross-entropy of one [C] logit vector against an integer
/// label in [0, C).
Tensor cross_entropy(const Tensor& logits, int label);

}  // namespace rtgmff::num
