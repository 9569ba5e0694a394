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

#include "ordermat/tensor.hpp"

#include <Eigen/Core>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace ordermat {

using detail::Node;
using NodePtr = std::shared_ptr< Node >;

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix< double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor >;
using ConstMap = Eigen::Map< const RowMat >;
using MutMap = Eigen::Map< RowMat >;

void check_finite(std::span< const double > values, const char* op) {
   // exponent all ones <=> Inf or NaN; integer form vectorizes
   constexpr std::uint64_t kExp = 0x7ff0000000000000ULL;
   std::uint64_t bad = 0;
   for(double v : values) {
      bad |= static_cast< std::uint64_t >((std::bit_cast< std::uint64_t >(v) & kExp) == kExp);
   }
   if(bad != 0) {
      throw NumericError(std::string("non-finite value in ") + op);
   }
}

Tensor make_result(
   Shape shape,
   std::vector< double > data,
   std::vector< Tensor > inputs,
   const char* op,
   std::function< void(Node&) > backward
) {
   check_finite(data, op);
   auto node = std::make_shared< Node >();
   node->shape = std::move(shape);
   node->data = std::move(data);
   node->op = op;
   bool needs_grad = false;
   if(g_grad_enabled) {
      for(const auto& t : inputs) {
         needs_grad = needs_grad || t.requires_grad();
      }
   }
   if(needs_grad) {
      node->requires_grad = true;
      node->is_leaf = false;
      node->parents.reserve(inputs.size());
      for(const auto& t : inputs) {
         node->parents.push_back(t.node());
      }
      node->backward = std::move(backward);
   }
   return Tensor(std::move(node));
}

void require(bool cond, const std::string& message) {
   if(! cond) {
      throw InvalidArgument(message);
   }
}

std::size_t resolve_axis(int axis, std::size_t rank) {
   int r = static_cast< int >(rank);
   int a = axis < 0 ? axis + r : axis;
   require(a >= 0 && a < r, "axis out of range");
   return static_cast< std::size_t >(a);
}

/// b broadcasts against a when b's shape equals a trailing slice of a's shape.
std::size_t broadcast_inner(const Tensor& a, const Tensor& b, const char* op) {
   const auto& sa = a.shape();
   const auto& sb = b.shape();
   bool ok = sb.size() <= sa.size()
             && std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
   require(
      ok, std::string(op) + ": shape " + shape_string(sb) + " does not broadcast against "
             + shape_string(sa)
   );
   return b.numel();
}

/// c[m, n] = a[m, k] * b[k, n], row-major, for the small per-head blocks.
void small_gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
   for(std::size_t r = 0; r < m; ++r) {
      double* cr = c + r * n;
      for(std::size_t e = 0; e < k; ++e) {
         const double av = a[r * k + e];
         const double* br = b + e * n;
         for(std::size_t j = 0; j < n; ++j) {
            cr[j] += av * br[j];
         }
      }
   }
}

template < typename F >
void broadcast_loop(std::size_t total, std::size_t inner, F f) {
   for(std::size_t base = 0; base < total; base += inner) {
      for(std::size_t j = 0; j < inner; ++j) {
         f(base + j, j);
      }
   }
}

std::size_t last_dim(const Tensor& a, const char* op) {
   require(a.rank() >= 1, std::string(op) + ": rank-0 input");
   return a.shape().back();
}

template < typename Fwd, typename Deriv >
Tensor unary_op(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
   std::vector< double > out(a.numel());
   auto in = a.data();
   for(std::size_t i = 0; i < out.size(); ++i) {
      out[i] = fwd(in[i]);
   }
   return make_result(a.shape(), std::move(out), {a}, op, [deriv](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t i = 0; i < g.size(); ++i) {
         g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
      }
   });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
   std::size_t n = 1;
   for(auto d : shape) {
      n *= d;
   }
   return n;
}

std::string shape_string(const Shape& shape) {
   std::ostringstream os;
   os << "[";
   for(std::size_t i = 0; i < shape.size(); ++i) {
      os << (i ? ", " : "") << shape[i];
   }
   os << "]";
   return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector< double > data, bool requires_grad) {
   require(
      shape_numel(shape) == data.size(),
      "tensor data length " + std::to_string(data.size()) + " does not match shape "
         + shape_string(shape)
   );
   check_finite(data, "tensor creation");
   node_ = std::make_shared< Node >();
   node_->shape = std::move(shape);
   node_->data = std::move(data);
   node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
   return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
   auto n = shape_numel(shape);
   return Tensor(std::move(shape), std::vector< double >(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
   return Tensor(Shape{}, {value}, requires_grad);
}

std::size_t Tensor::dim(int axis) const {
   return node_->shape[resolve_axis(axis, rank())];
}

std::span< double > Tensor::mutable_data() {
   if(! node_->is_leaf) {
      throw InvalidState("mutable_data on an interior graph node");
   }
   return node_->data;
}

double Tensor::item() const {
   if(numel() != 1) {
      throw InvalidArgument("item() on tensor of shape " + shape_string(shape()));
   }
   return node_->data[0];
}

std::vector< double > Tensor::grad() const {
   if(node_->grad.empty()) {
      return std::vector< double >(node_->data.size(), 0.0);
   }
   return node_->grad;
}

void Tensor::zero_grad() {
   std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
   if(numel() != 1) {
      throw InvalidArgument("backward() needs a scalar loss, got " + shape_string(shape()));
   }
   if(! node_->requires_grad) {
      return;
   }
   // Iterative post-order DFS gives a topological order with parents first.
   std::vector< Node* > order;
   std::unordered_set< Node* > visited;
   std::vector< std::pair< Node*, std::size_t > > stack{{node_.get(), 0}};
   visited.insert(node_.get());
   while(! stack.empty()) {
      auto& [n, next] = stack.back();
      if(next < n->parents.size()) {
         Node* p = n->parents[next++].get();
         if(p->requires_grad && visited.insert(p).second) {
            stack.emplace_back(p, 0);
         }
      } else {
         order.push_back(n);
         stack.pop_back();
      }
   }
   // Interior buffers are created on first accumulation and released once
   // consumed, so only the live frontier of gradients is resident.
   for(Node* n : order) {
      if(! n->is_leaf) {
         n->grad.clear();
      }
   }
   node_->grad_buffer()[0] += 1.0;
   for(auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if(n->is_leaf) {
         continue;
      }
      if(n->backward && ! n->grad.empty()) {
         n->backward(*n);
      }
      std::vector< double >().swap(n->grad);
   }
}

Tensor Tensor::detach() const {
   auto node = std::make_shared< Node >();
   node->shape = node_->shape;
   node->data = node_->data;
   return Tensor(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void retain_heap_memory() {
#if defined(__GLIBC__)
   mallopt(M_MMAP_THRESHOLD, 1 << 30);
   mallopt(M_TRIM_THRESHOLD, 1 << 30);
   mallopt(M_TOP_PAD, 256 << 20);
#endif
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
   require(a.rank() >= 2 && b.rank() == 2, "matmul: expects a[..., K] and b[K, N]");
   const std::size_t k = a.shape().back();
   require(
      k == b.shape()[0],
      "matmul: inner dimensions differ " + shape_string(a.shape()) + " x "
         + shape_string(b.shape())
   );
   const std::size_t rows = a.numel() / k;
   const std::size_t n = b.shape()[1];
   std::vector< double > out(rows * n);
   MutMap(out.data(), rows, n).noalias() =
      ConstMap(a.data().data(), rows, k) * ConstMap(b.data().data(), k, n);
   Shape shape = a.shape();
   shape.back() = n;
   return make_result(std::move(shape), std::move(out), {a, b}, "matmul", [rows, k, n](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      ConstMap dc(self.grad.data(), rows, n);
      if(pa.requires_grad) {
         MutMap(pa.grad_buffer().data(), rows, k).noalias() +=
            dc * ConstMap(pb.data.data(), k, n).transpose();
      }
      if(pb.requires_grad) {
         MutMap(pb.grad_buffer().data(), k, n).noalias() +=
            ConstMap(pa.data.data(), rows, k).transpose() * dc;
      }
   });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
   require(a.rank() == 3 && b.rank() == 3, "bmm: expects rank-3 operands");
   const auto batch = a.shape()[0];
   const auto m = a.shape()[1];
   const auto k = a.shape()[2];
   const auto n = b.shape()[2];
   require(
      b.shape()[0] == batch && b.shape()[1] == k,
      "bmm: shapes " + shape_string(a.shape()) + " x " + shape_string(b.shape())
   );
   std::vector< double > out(batch * m * n);
   const double* ad = a.data().data();
   const double* bd = b.data().data();
   for(std::size_t i = 0; i < batch; ++i) {
      small_gemm(ad + i * m * k, bd + i * k * n, out.data() + i * m * n, m, k, n);
   }
   return make_result(
      Shape{batch, m, n}, std::move(out), {a, b}, "bmm", [batch, m, k, n](Node& self) {
         auto& pa = *self.parents[0];
         auto& pb = *self.parents[1];
         double* ga = pa.requires_grad ? pa.grad_buffer().data() : nullptr;
         double* gb = pb.requires_grad ? pb.grad_buffer().data() : nullptr;
         for(std::size_t i = 0; i < batch; ++i) {
            const double* dc = self.grad.data() + i * m * n;
            const double* ai = pa.data.data() + i * m * k;
            const double* bi = pb.data.data() + i * k * n;
            for(std::size_t r = 0; r < m; ++r) {
               for(std::size_t c = 0; c < n; ++c) {
                  const double g = dc[r * n + c];
                  if(g == 0.0) {
                     continue;
                  }
                  for(std::size_t e = 0; e < k; ++e) {
                     if(ga) {
                        ga[i * m * k + r * k + e] += g * bi[e * n + c];
                     }
                     if(gb) {
                        gb[i * k * n + e * n + c] += g * ai[r * k + e];
                     }
                  }
               }
            }
         }
      }
   );
}

Tensor transpose(const Tensor& a) {
   require(a.rank() == 2 || a.rank() == 3, "transpose: expects rank 2 or 3");
   const std::size_t batch = a.rank() == 3 ? a.shape()[0] : 1;
   const std::size_t r = a.shape()[a.rank() - 2];
   const std::size_t c = a.shape()[a.rank() - 1];
   std::vector< double > out(a.numel());
   auto in = a.data();
   for(std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = b * r * c;
      for(std::size_t i = 0; i < r; ++i) {
         for(std::size_t j = 0; j < c; ++j) {
            out[off + j * r + i] = in[off + i * c + j];
         }
      }
   }
   Shape shape = a.shape();
   std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
   return make_result(std::move(shape), std::move(out), {a}, "transpose", [batch, r, c](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t b = 0; b < batch; ++b) {
         const std::size_t off = b * r * c;
         for(std::size_t i = 0; i < r; ++i) {
            for(std::size_t j = 0; j < c; ++j) {
               g[off + i * c + j] += self.grad[off + j * r + i];
            }
         }
      }
   });
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
   const std::size_t inner = broadcast_inner(a, b, "add");
   std::vector< double > out(a.data().begin(), a.data().end());
   auto bd = b.data();
   broadcast_loop(out.size(), inner, [&](std::size_t i, std::size_t j) {
      out[i] += bd[j];
   });
   return make_result(a.shape(), std::move(out), {a, b}, "add", [inner](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if(pa.requires_grad) {
         auto& g = pa.grad_buffer();
         for(std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
         }
      }
      if(pb.requires_grad) {
         auto& g = pb.grad_buffer();
         broadcast_loop(self.grad.size(), inner, [&](std::size_t i, std::size_t j) {
            g[j] += self.grad[i];
         });
      }
   });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
   const std::size_t inner = broadcast_inner(a, b, "subtract");
   std::vector< double > out(a.data().begin(), a.data().end());
   auto bd = b.data();
   broadcast_loop(out.size(), inner, [&](std::size_t i, std::size_t j) {
      out[i] -= bd[j];
   });
   return make_result(a.shape(), std::move(out), {a, b}, "subtract", [inner](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if(pa.requires_grad) {
         auto& g = pa.grad_buffer();
         for(std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
         }
      }
      if(pb.requires_grad) {
         auto& g = pb.grad_buffer();
         broadcast_loop(self.grad.size(), inner, [&](std::size_t i, std::size_t j) {
            g[j] -= self.grad[i];
         });
      }
   });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
   const std::size_t inner = broadcast_inner(a, b, "multiply");
   std::vector< double > out(a.numel());
   auto ad = a.data();
   auto bd = b.data();
   broadcast_loop(out.size(), inner, [&](std::size_t i, std::size_t j) {
      out[i] = ad[i] * bd[j];
   });
   return make_result(a.shape(), std::move(out), {a, b}, "multiply", [inner](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if(pa.requires_grad) {
         auto& g = pa.grad_buffer();
         broadcast_loop(g.size(), inner, [&](std::size_t i, std::size_t j) {
            g[i] += self.grad[i] * pb.data[j];
         });
      }
      if(pb.requires_grad) {
         auto& g = pb.grad_buffer();
         broadcast_loop(self.grad.size(), inner, [&](std::size_t i, std::size_t j) {
            g[j] += self.grad[i] * pa.data[i];
         });
      }
   });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
   require(a.shape() == b.shape(), "minimum: shapes must match");
   std::vector< double > out(a.numel());
   auto ad = a.data();
   auto bd = b.data();
   for(std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::min(ad[i], bd[i]);
   }
   return make_result(a.shape(), std::move(out), {a, b}, "minimum", [](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      for(std::size_t i = 0; i < self.grad.size(); ++i) {
         // ties route to the first operand
         bool first = pa.data[i] <= pb.data[i];
         Node& target = first ? pa : pb;
         if(target.requires_grad) {
            target.grad_buffer()[i] += self.grad[i];
         }
      }
   });
}

Tensor scale(const Tensor& a, double factor) {
   return unary_op(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; }
   );
}

Tensor add_scalar(const Tensor& a, double offset) {
   return unary_op(
      a, "add_scalar", [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; }
   );
}

Tensor exp(const Tensor& a) {
   return unary_op(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; }
   );
}

Tensor log(const Tensor& a) {
   return unary_op(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }
   );
}

Tensor tanh(const Tensor& a) {
   return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; }
   );
}

Tensor relu(const Tensor& a) {
   return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }
   );
}

Tensor gelu(const Tensor& a) {
   constexpr double inv_sqrt2 = 0.70710678118654752440;
   constexpr double inv_sqrt2pi = 0.39894228040143267794;
   return unary_op(
      a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [](double x, double) {
         double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
         return cdf + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
      }
   );
}

Tensor square(const Tensor& a) {
   return unary_op(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; }
   );
}

Tensor clamp(const Tensor& a, double lo, double hi) {
   require(lo <= hi, "clamp: lo > hi");
   return unary_op(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; }
   );
}

Tensor mask_fill(const Tensor& a, std::span< const std::uint8_t > mask, double value) {
   require(mask.size() == a.numel(), "mask_fill: mask size differs from tensor size");
   std::vector< double > out(a.data().begin(), a.data().end());
   std::vector< std::uint8_t > kept(mask.begin(), mask.end());
   for(std::size_t i = 0; i < out.size(); ++i) {
      if(kept[i]) {
         out[i] = value;
      }
   }
   return make_result(a.shape(), std::move(out), {a}, "mask_fill", [kept = std::move(kept)](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t i = 0; i < g.size(); ++i) {
         if(! kept[i]) {
            g[i] += self.grad[i];
         }
      }
   });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a) {
   double s = 0.0;
   for(double v : a.data()) {
      s += v;
   }
   return make_result(Shape{}, {s}, {a}, "sum", [](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(double& v : g) {
         v += self.grad[0];
      }
   });
}

Tensor mean(const Tensor& a) {
   require(a.numel() > 0, "mean of an empty tensor");
   return scale(sum(a), 1.0 / static_cast< double >(a.numel()));
}

Tensor sum_last(const Tensor& a) {
   const std::size_t c = last_dim(a, "sum_last");
   const std::size_t rows = c == 0 ? 0 : a.numel() / c;
   std::vector< double > out(rows, 0.0);
   auto in = a.data();
   for(std::size_t r = 0; r < rows; ++r) {
      for(std::size_t j = 0; j < c; ++j) {
         out[r] += in[r * c + j];
      }
   }
   Shape shape(a.shape().begin(), a.shape().end() - 1);
   return make_result(std::move(shape), std::move(out), {a}, "sum_last", [c](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t i = 0; i < g.size(); ++i) {
         g[i] += self.grad[i / c];
      }
   });
}

Tensor softmax(const Tensor& a) {
   const std::size_t c = last_dim(a, "softmax");
   const std::size_t rows = a.numel() / c;
   std::vector< double > out(a.numel());
   auto in = a.data();
   for(std::size_t r = 0; r < rows; ++r) {
      const double* x = in.data() + r * c;
      double* y = out.data() + r * c;
      double mx = *std::max_element(x, x + c);
      double z = 0.0;
      for(std::size_t j = 0; j < c; ++j) {
         y[j] = std::exp(x[j] - mx);
         z += y[j];
      }
      for(std::size_t j = 0; j < c; ++j) {
         y[j] /= z;
      }
   }
   return make_result(a.shape(), std::move(out), {a}, "softmax", [c, rows](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t r = 0; r < rows; ++r) {
         const double* y = self.data.data() + r * c;
         const double* dy = self.grad.data() + r * c;
         double dot = 0.0;
         for(std::size_t j = 0; j < c; ++j) {
            dot += dy[j] * y[j];
         }
         for(std::size_t j = 0; j < c; ++j) {
            g[r * c + j] += y[j] * (dy[j] - dot);
         }
      }
   });
}

Tensor log_softmax(const Tensor& a) {
   const std::size_t c = last_dim(a, "log_softmax");
   const std::size_t rows = a.numel() / c;
   std::vector< double > out(a.numel());
   auto in = a.data();
   for(std::size_t r = 0; r < rows; ++r) {
      const double* x = in.data() + r * c;
      double* y = out.data() + r * c;
      double mx = *std::max_element(x, x + c);
      double z = 0.0;
      for(std::size_t j = 0; j < c; ++j) {
         z += std::exp(x[j] - mx);
      }
      const double lse = mx + std::log(z);
      for(std::size_t j = 0; j < c; ++j) {
         y[j] = x[j] - lse;
      }
   }
   return make_result(a.shape(), std::move(out), {a}, "log_softmax", [c, rows](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t r = 0; r < rows; ++r) {
         const double* y = self.data.data() + r * c;
         const double* dy = self.grad.data() + r * c;
         double total = 0.0;
         for(std::size_t j = 0; j < c; ++j) {
            total += dy[j];
         }
         for(std::size_t j = 0; j < c; ++j) {
            g[r * c + j] += dy[j] - std::exp(y[j]) * total;
         }
      }
   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
   const std::size_t d = last_dim(x, "layer_norm");
   require(
      gain.shape() == Shape{d} && bias.shape() == Shape{d},
      "layer_norm: gain and bias must have shape [" + std::to_string(d) + "]"
   );
   const std::size_t rows = x.numel() / d;
   std::vector< double > xhat(x.numel());
   std::vector< double > rstd(rows);
   std::vector< double > out(x.numel());
   auto in = x.data();
   auto gd = gain.data();
   auto bd = bias.data();
   for(std::size_t r = 0; r < rows; ++r) {
      const double* xr = in.data() + r * d;
      double mu = 0.0;
      for(std::size_t j = 0; j < d; ++j) {
         mu += xr[j];
      }
      mu /= static_cast< double >(d);
      double var = 0.0;
      for(std::size_t j = 0; j < d; ++j) {
         var += (xr[j] - mu) * (xr[j] - mu);
      }
      var /= static_cast< double >(d);
      rstd[r] = 1.0 / std::sqrt(var + eps);
      for(std::size_t j = 0; j < d; ++j) {
         double h = (xr[j] - mu) * rstd[r];
         xhat[r * d + j] = h;
         out[r * d + j] = h * gd[j] + bd[j];
      }
   }
   return make_result(
      x.shape(), std::move(out), {x, gain, bias}, "layer_norm",
      [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
         auto& px = *self.parents[0];
         auto& pg = *self.parents[1];
         auto& pb = *self.parents[2];
         if(pg.requires_grad) {
            auto& g = pg.grad_buffer();
            broadcast_loop(self.grad.size(), d, [&](std::size_t i, std::size_t j) {
               g[j] += self.grad[i] * xhat[i];
            });
         }
         if(pb.requires_grad) {
            auto& g = pb.grad_buffer();
            broadcast_loop(self.grad.size(), d, [&](std::size_t i, std::size_t j) {
               g[j] += self.grad[i];
            });
         }
         if(px.requires_grad) {
            auto& g = px.grad_buffer();
            const double inv_d = 1.0 / static_cast< double >(d);
            std::vector< double > dxhat(d);
            for(std::size_t r = 0; r < rows; ++r) {
               double s1 = 0.0;
               double s2 = 0.0;
               for(std::size_t j = 0; j < d; ++j) {
                  dxhat[j] = self.grad[r * d + j] * pg.data[j];
                  s1 += dxhat[j];
                  s2 += dxhat[j] * xhat[r * d + j];
               }
               for(std::size_t j = 0; j < d; ++j) {
                  g[r * d + j] += rstd[r] * (dxhat[j] - inv_d * s1 - xhat[r * d + j] * inv_d * s2);
               }
            }
         }
      }
   );
}

// ---- indexing and layout --------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
   require(
      shape_numel(shape) == a.numel(),
      "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape)
   );
   std::vector< double > out(a.data().begin(), a.data().end());
   return make_result(std::move(shape), std::move(out), {a}, "reshape", [](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t i = 0; i < g.size(); ++i) {
         g[i] += self.grad[i];
      }
   });
}

Tensor gather_last(const Tensor& a, std::span< const int > index) {
   const std::size_t c = last_dim(a, "gather_last");
   const std::size_t rows = a.numel() / c;
   require(index.size() == rows, "gather_last: one index per row required");
   std::vector< double > out(rows);
   std::vector< int > idx(index.begin(), index.end());
   auto in = a.data();
   for(std::size_t r = 0; r < rows; ++r) {
      require(idx[r] >= 0 && static_cast< std::size_t >(idx[r]) < c, "gather_last: index out of range");
      out[r] = in[r * c + static_cast< std::size_t >(idx[r])];
   }
   Shape shape(a.shape().begin(), a.shape().end() - 1);
   return make_result(std::move(shape), std::move(out), {a}, "gather_last", [c, idx = std::move(idx)](Node& self) {
      auto& p = *self.parents[0];
      if(! p.requires_grad) {
         return;
      }
      auto& g = p.grad_buffer();
      for(std::size_t r = 0; r < idx.size(); ++r) {
         g[r * c + static_cast< std::size_t >(idx[r])] += self.grad[r];
      }
   });
}

Tensor gather_rows(const Tensor& a, std::span< const int > index, std::size_t k) {
   require(a.rank() == 3, "gather_rows: expects a[B, n, d]");
   const std::size_t batch = a.shape()[0];
   const std::size_t n = a.shape()[1];
   const std::size_t d = a.shape()[2];
   require(index.size() == batch * k, "gather_rows: index must have B * k entries");
   std::vector< int > idx(index.begin(), index.end());
   std::vector< double > out(batch * k * d);
   auto in = a.data();
   for(std::size_t b = 0; b < batch; ++b) {
      for(std::size_t j = 0; j < k; ++j) {
         int src = idx[b * k + j];
         require(src >= 0 && static_cast< std::size_t >(src) < n, "gather_rows: index out of range");
         std::copy_n(in.data() + (b * n + static_cast< std::size_t >(src)) * d, d, out.data() + (b * k + j) * d);
      }
   }
   return make_result(
      Shape{batch, k, d}, std::move(out), {a}, "gather_rows",
      [batch, n, d, k, idx = std::move(idx)](Node& self) {
         auto& p = *self.parents[0];
         if(! p.requires_grad) {
            return;
         }
         auto& g = p.grad_buffer();
         for(std::size_t b = 0; b < batch; ++b) {
            for(std::size_t j = 0; j < k; ++j) {
               auto src = static_cast< std::size_t >(idx[b * k + j]);
               for(std::size_t e = 0; e < d; ++e) {
                  g[(b * n + src) * d + e] += self.grad[(b * k + j) * d + e];
               }
            }
         }
      }
   );
}

Tensor concat(const std::vector< Tensor >& parts, int axis) {
   require(! parts.empty(), "concat: no inputs");
   const std::size_t rank = parts[0].rank();
   const std::size_t ax = resolve_axis(axis, rank);
   Shape shape = parts[0].shape();
   shape[ax] = 0;
   for(const auto& p : parts) {
      require(p.rank() == rank, "concat: rank mismatch");
      for(std::size_t i = 0; i < rank; ++i) {
         require(i == ax || p.shape()[i] == parts[0].shape()[i], "concat: shape mismatch off the concat axis");
      }
      shape[ax] += p.shape()[ax];
   }
   std::size_t outer = 1;
   for(std::size_t i = 0; i < ax; ++i) {
      outer *= shape[i];
   }
   std::size_t inner = 1;
   for(std::size_t i = ax + 1; i < rank; ++i) {
      inner *= shape[i];
   }
   const std::size_t out_row = shape[ax] * inner;
   std::vector< std::size_t > offsets;
   std::vector< double > out(shape_numel(shape));
   std::size_t off = 0;
   for(const auto& p : parts) {
      offsets.push_back(off);
      const std::size_t chunk = p.shape()[ax] * inner;
      auto in = p.data();
      for(std::size_t o = 0; o < outer; ++o) {
         std::copy_n(in.data() + o * chunk, chunk, out.data() + o * out_row + off);
      }
      off += chunk;
   }
   return make_result(
      std::move(shape), std::move(out), parts, "concat",
      [outer, out_row, offsets = std::move(offsets)](Node& self) {
         for(std::size_t i = 0; i < self.parents.size(); ++i) {
            auto& p = *self.parents[i];
            if(! p.requires_grad) {
               continue;
            }
            auto& g = p.grad_buffer();
            const std::size_t chunk = outer == 0 ? 0 : g.size() / outer;
            for(std::size_t o = 0; o < outer; ++o) {
               for(std::size_t j = 0; j < chunk; ++j) {
                  g[o * chunk + j] += self.grad[o * out_row + offsets[i] + j];
               }
            }
         }
      }
   );
}

Tensor narrow(const Tensor& a, int axis, std::size_t start, std::size_t length) {
   const std::size_t ax = resolve_axis(axis, a.rank());
   require(start + length <= a.shape()[ax], "narrow: range exceeds axis size");
   std::size_t outer = 1;
   for(std::size_t i = 0; i < ax; ++i) {
      outer *= a.shape()[i];
   }
   std::size_t inner = 1;
   for(std::size_t i = ax + 1; i < a.rank(); ++i) {
      inner *= a.shape()[i];
   }
   const std::size_t in_row = a.shape()[ax] * inner;
   const std::size_t out_row = length * inner;
   std::vector< double > out(outer * out_row);
   auto in = a.data();
   for(std::size_t o = 0; o < outer; ++o) {
      std::copy_n(in.data() + o * in_row + start * inner, out_row, out.data() + o * out_row);
   }
   Shape shape = a.shape();
   shape[ax] = length;
   return make_result(
      std::move(shape), std::move(out), {a}, "narrow",
      [outer, in_row, out_row, offset = start * inner](Node& self) {
         auto& p = *self.parents[0];
         if(! p.requires_grad) {
            return;
         }
         auto& g = p.grad_buffer();
         for(std::size_t o = 0; o < outer; ++o) {
            for(std::size_t j = 0; j < out_row; ++j) {
               g[o * in_row + offset + j] += self.grad[o * out_row + j];
            }
         }
      }
   );
}

}  // namespace ordermat
