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

#include "rtgmff/num/tensor.hpp"

namespace rtgmff::num {

/// Input-dependent diagonal state-space recurrence over a token sequence,
/// fused into one tape node with a hand-written backward pass (a per-step
/// graph would dominate the tape at this sequence length).
///
/// Per token t and channel d, with state size n:
///   delta[t,d] = softplus(x[t]·W_dt + b_dt)[d]
///   B[t] = x[t]·W_B + b_B,  C[t] = x[t]·W_C + b_C           (n-vectors)
///   A[d] = -exp(A_log[d])                                   (n-vector)
///   s = exp(delta*A[d]) ⊙ s + (delta*B[t]) * x[t,d]
///   y[t,d] = C[t]·s + D_skip[d]*x[t,d]
///   out[t,d] = sigmoid(x[t]·W_g + b_g)[d] * y[t,d]
///
/// The sigmoid gate performs the token suppression: gates near zero mute a
/// token's contribution. Causal by construction. Throws when the state
/// becomes non-finite (a delta blow-up).
Tensor selective_scan(const Tensor& x, const Tensor& a_log, const Tensor& w_dt, const Tensor& b_dt,
                      const Tensor& w_b, const Tensor& b_b, const Tensor& w_c, const Tensor& b_c,
                      const Tensor& d_skip, const Tensor& w_g, const Tensor& b_g);

}  // namespace rtgmff::num
