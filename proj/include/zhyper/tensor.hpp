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

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace zhyper {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the gradient tape. Leaves have no backward function.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major array of doubles with optional gradient tracking.
///
/// A Tensor is a cheap handle; copies share storage. Values produced by
/// operations are never modified afterwards. Leaves that require grad are
/// the trainable parameters: the optimizer updates them in place through
/// mutable_data().
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor eye(std::size_t n);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t dim(std::size_t axis) const;
  // Leading extent of a 2-D view (1 for vectors) and the last axis extent.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; all zeros when no backward pass has touched the leaf.
  std::vector<double> grad() const;
  void zero_grad();

  /// A fresh leaf holding a copy of the values, with no tape history.
  Tensor detach(bool requires_grad = false) const;
  Tensor clone() const { return detach(requires_grad()); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Internal: used by the op layer to build tape nodes.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode pass from a scalar. Leaf gradients accumulate across calls
/// until zero_grad(); disconnected leaves are left untouched.
void backward(const Tensor& loss);

/// Largest absolute elementwise difference; throws on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace zhyper
