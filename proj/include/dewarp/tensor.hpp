#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "dewarp/errors.hpp"
#include "dewarp/rng.hpp"

namespace dewarp {

// Rank-4 (batch, channels, height, width), NCHW planar.
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  Shape() = default;
  Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw DimensionError("tensor shape dims must be >= 1: " + str());
  }

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * static_cast<std::size_t>(h) * w;
  }
  bool operator==(const Shape& o) const = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

// Define-by-run autograd node. Ops fill `parents` and `backprop` when
// recording is enabled; `backprop` reads this node's grad and accumulates
// into the parents' grads (additive contract, callers zero grads between
// steps).
template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until touched
  bool requires_grad = false;

  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backprop;

  T* grad_data() {
    if (grad.empty()) grad.assign(shape.numel(), T(0));
    return grad.data();
  }
};

// Recording switch; NoGradGuard disables graph construction (inference).
bool& grad_mode_flag();
inline bool grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
  bool saved;
  NoGradGuard() : saved(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = saved; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Shared-handle tensor: copies alias the same storage, like the usual
// framework semantics.
template <typename T>
class TensorT {
 public:
  using Impl = TensorImpl<T>;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static TensorT zeros(const Shape& s, bool requires_grad = false) {
    auto impl = std::make_shared<Impl>();
    impl->shape = s;
    impl->data.assign(s.numel(), T(0));
    impl->requires_grad = requires_grad;
    return TensorT(std::move(impl));
  }

  static TensorT full(const Shape& s, T value, bool requires_grad = false) {
    TensorT t = zeros(s, requires_grad);
    for (auto& v : t.impl_->data) v = value;
    return t;
  }

  static TensorT from_data(const Shape& s, std::vector<T> values, bool requires_grad = false) {
    if (values.size() != s.numel())
      throw DimensionError("from_data: " + std::to_string(values.size()) +
                           " values for shape " + s.str());
    auto impl = std::make_shared<Impl>();
    impl->shape = s;
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return TensorT(std::move(impl));
  }

  static TensorT scalar(T value, bool requires_grad = false) {
    return full(Shape(1, 1, 1, 1), value, requires_grad);
  }

  static TensorT uniform(const Shape& s, Rng& rng, T lo, T hi, bool requires_grad = false) {
    TensorT t = zeros(s, requires_grad);
    for (auto& v : t.impl_->data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->shape.numel(); }

  T* data() { return impl_->data.data(); }
  const T* data() const { return impl_->data.data(); }
  std::vector<T>& vec() { return impl_->data; }
  const std::vector<T>& vec() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  T* grad() { return impl_->grad_data(); }
  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<T>& grad_vec() const { return impl_->grad; }

  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }

  T item() const {
    if (numel() != 1) throw UsageError("item(): tensor has " + std::to_string(numel()) + " values");
    return impl_->data[0];
  }

  // value access for tests: (n,c,y,x)
  T at(int n, int c, int y, int x) const {
    const Shape& s = impl_->shape;
    return impl_->data[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
  }

  bool all_finite() const {
    for (const T& v : impl_->data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::shared_ptr<Impl>& impl() { return impl_; }
  const std::shared_ptr<Impl>& impl() const { return impl_; }
  Impl* raw() const { return impl_.get(); }

  // Reverse sweep from a scalar loss. Every tensor on the path accumulates
  // gradient; tensors not reachable from the loss are untouched.
  void backward() {
    if (!impl_) throw UsageError("backward() on an undefined tensor");
    if (numel() != 1) throw UsageError("backward() requires a scalar loss, got " + shape().str());

    // iterative post-order DFS; the visit order is fixed by graph
    // construction order, so the sweep is deterministic
    std::vector<Impl*> order;
    std::unordered_set<Impl*> visited;
    std::vector<std::pair<Impl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited.insert(impl_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Impl* parent = node->parents[next++].get();
        if (visited.insert(parent).second) stack.emplace_back(parent, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }

    impl_->grad_data()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Impl* node = *it;
      if (node->backprop) node->backprop(*node);
    }
  }

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor = TensorT<float>;

}  // namespace dewarp
