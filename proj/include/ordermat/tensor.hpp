// Copyright 2026 The ordermat Authors
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

#ifndef ORDERMAT_TENSOR_HPP
#define ORDERMAT_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ordermat/errors.hpp"

namespace ordermat {

using Shape = std::vector< std::size_t >;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

/// One vertex of the computation graph. Leaves are tensors created by the
/// user; interior nodes carry the closure that pushes their gradient into
/// their parents.
struct Node {
   Shape shape;
   std::vector< double > data;
   std::vector< double > grad;  // empty until first touched
   bool requires_grad = false;
   bool is_leaf = true;
   std::vector< std::shared_ptr< Node > > parents;
   std::function< void(Node&) > backward;
   const char* op = "leaf";

   std::vector< double >& grad_buffer() {
      if(grad.empty()) {
         grad.assign(data.size(), 0.0);
      }
      return grad;
   }
};

}  // namespace detail

/**
 * Dense row-major tensor of doubles with reverse-mode differentiation.
 *
 * A Tensor is a shared handle: copies alias the same storage and graph node.
 * Every operation checks its output for NaN/Inf and throws NumericError, so a
 * non-finite value never silently enters a graph.
 *
 * backward() accumulates into leaf gradients; call zero_grad() on the leaves
 * between independent backward passes.
 */
class Tensor {
  public:
   Tensor() = default;
   Tensor(Shape shape, std::vector< double > data, bool requires_grad = false);

   static Tensor zeros(Shape shape, bool requires_grad = false);
   static Tensor full(Shape shape, double value, bool requires_grad = false);
   static Tensor scalar(double value, bool requires_grad = false);

   [[nodiscard]] bool defined() const { return node_ != nullptr; }
   [[nodiscard]] const Shape& shape() const { return node_->shape; }
   [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
   /// Size of `axis`; negative axes count from the end.
   [[nodiscard]] std::size_t dim(int axis) const;
   [[nodiscard]] std::size_t numel() const { return node_->data.size(); }

   [[nodiscard]] std::span< const double > data() const { return node_->data; }
   /// Writable view of a leaf's storage (parameter updates, finite
   /// differences). Throws InvalidState on interior nodes.
   [[nodiscard]] std::span< double > mutable_data();
   [[nodiscard]] double item() const;
   [[nodiscard]] double value(std::size_t flat_index) const { return node_->data[flat_index]; }

   [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
   [[nodiscard]] bool is_leaf() const { return node_->is_leaf; }
   [[nodiscard]] bool has_grad() const { return ! node_->grad.empty(); }
   /// Gradient buffer; zeros when nothing has been accumulated yet.
   [[nodiscard]] std::vector< double > grad() const;
   [[nodiscard]] std::span< double > mutable_grad() { return node_->grad_buffer(); }
   void zero_grad();

   /// Reverse pass from a scalar. Interior gradients are transient and freed
   /// during the pass; leaf gradients accumulate.
   void backward() const;

   /// Same values, no graph history, no gradient requirement.
   [[nodiscard]] Tensor detach() const;

   [[nodiscard]] const std::shared_ptr< detail::Node >& node() const { return node_; }
   explicit Tensor(std::shared_ptr< detail::Node > node) : node_(std::move(node)) {}

  private:
   std::shared_ptr< detail::Node > node_;
};

/// Whether new operations record graph nodes on this thread.
bool grad_enabled();

/// Scoped switch that disables graph recording (rollouts, evaluation,
/// finite differences).
class NoGradGuard {
  public:
   NoGradGuard();
   ~NoGradGuard();
   NoGradGuard(const NoGradGuard&) = delete;
   NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
   bool previous_;
};

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS after every step. Call once at program start; no-op off glibc.
void retain_heap_memory();

// ---- linear algebra -------------------------------------------------------

/// a[..., K] x b[K, N] -> [..., N]
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[B, M, K] x b[B, K, N] -> [B, M, N]
Tensor bmm(const Tensor& a, const Tensor& b);
/// Swap the last two axes of a rank-2 or rank-3 tensor.
Tensor transpose(const Tensor& a);

// ---- elementwise ----------------------------------------------------------
// Binary ops accept b whose shape is a suffix of a's shape (b is repeated over
// the leading axes of a).

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
/// Entries with mask != 0 are replaced by `value` and receive no gradient.
Tensor mask_fill(const Tensor& a, std::span< const std::uint8_t > mask, double value);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return subtract(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return multiply(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

// ---- reductions and normalization -----------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over the last axis; drops it.
Tensor sum_last(const Tensor& a);
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// Normalize over the last axis, then apply gain and bias (both [D]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// ---- indexing and layout --------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
/// out[r] = a[r, index[r]] over rows of the last axis.
Tensor gather_last(const Tensor& a, std::span< const int > index);
/// a[B, n, d], index[B * k] -> out[b, j, :] = a[b, index[b * k + j], :].
Tensor gather_rows(const Tensor& a, std::span< const int > index, std::size_t k);
Tensor concat(const std::vector< Tensor >& parts, int axis);
/// Sub-range [start, start + length) of `axis`.
Tensor narrow(const Tensor& a, int axis, std::size_t start, std::size_t length);

}  // namespace ordermat

#endif  // ORDERMAT_TENSOR_HPP
