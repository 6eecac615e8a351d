// Copyright 2026 The Zhyper Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "zhyper/tensor.hpp"

namespace zhyper {

// Differentiable primitives. Every op records itself on the tape when any
// input requires grad. "Broadcast" below means the second operand's shape
// equals a trailing suffix of the first's (bias rows, per-column scales).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);  // broadcasts b
Tensor scale(const Tensor& a, double s);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, broadcasts b
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Concatenation along the last axis; leading extents must agree.
Tensor concat(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);

Tensor softmax(const Tensor& a);  // last axis
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor gelu(const Tensor& a);  // exact erf form

/// Row gather: out[i] = table[ids[i]].
Tensor embedding(const Tensor& table, std::span<const int> ids);

/// Adds -inf above the diagonal of square score matrices.
Tensor causal_mask(const Tensor& scores);

/// Label-smoothed cross-entropy, (1-s)*NLL(target) + s*mean_k NLL(k), summed
/// over rows whose target is not `ignore`. Rows of logits are positions.
Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets,
                         double smoothing, int ignore = -1);
/// Same, averaged over the non-ignored rows.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     double smoothing, int ignore = -1);

/// Central-difference gradient estimate of a scalar function.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps);

}  // namespace zhyper
