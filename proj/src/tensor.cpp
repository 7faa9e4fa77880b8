// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/tensor.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <cmath>
#include <cstdlib>
#include <new>
#include <sstream>
#include <unordered_set>

// Eigen's vectorised reductions peel a scalar head up to the first aligned
// element, so their summation order follows the buffer address. Handing out
// cache-line aligned blocks for everything but tiny allocations makes the
// arithmetic independent of allocator state, which keeps training
// bit-reproducible within one process as well as across processes.
namespace {
constexpr std::size_t kAlignedFrom = 64;

void* allocate(std::size_t n) noexcept {
  if (n < kAlignedFrom) return std::malloc(n == 0 ? 1 : n);
  return std::aligned_alloc(64, (n + 63) & ~std::size_t{63});
}
}  // namespace

void* operator new(std::size_t n) {
  if (void* p = allocate(n)) return p;
  throw std::bad_alloc();
}
void* operator new[](std::size_t n) { return ::operator new(n); }
void* operator new(std::size_t n, const std::nothrow_t&) noexcept { return allocate(n); }
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept { return allocate(n); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { std::free(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { std::free(p); }

namespace coala {

namespace {

#ifdef __GLIBC__
// Activation buffers are tens of megabytes. By default glibc serves them
// with fresh mmaps and unmaps them on free, so every step pays page faults
// again; keeping them in the heap lets the allocator reuse them.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

}  // namespace

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->ensure_grad();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  auto& g = node_->ensure_grad();
  std::fill(g.begin(), g.end(), T(0));
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return node_->data[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(node_->shape, node_->data, false);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_node(std::shared_ptr<Node> node) {
  BasicTensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename T>
void BasicTensor<T>::backward() const {
  if (!defined() || numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " +
                         (defined() ? shape_to_string(shape()) : std::string("<undefined>")));
  }
  if (!std::isfinite(static_cast<double>(node_->data[0]))) {
    throw NumericalError("backward() on non-finite loss");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [current, next_parent] = stack.back();
    if (next_parent < current->parents.size()) {
      Node* parent = current->parents[next_parent++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(current);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* current = *it;
    if (current->backward_fn) current->backward_fn(*current);
  }
}

template <typename T>
BasicTensor<T> make_result(std::string_view op, Shape shape, std::vector<T> data,
                           std::vector<std::shared_ptr<TensorNode<T>>> parents,
                           std::function<void(TensorNode<T>&)> backward_fn) {
  for (const T& v : data) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericalError(std::string(op) + " produced a non-finite value");
    }
  }
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs_grad = needs_grad || (p && p->requires_grad);
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return BasicTensor<T>::from_node(std::move(node));
}

template class BasicTensor<float>;
template class BasicTensor<double>;

template BasicTensor<float> make_result<float>(std::string_view, Shape, std::vector<float>,
                                               std::vector<std::shared_ptr<TensorNode<float>>>,
                                               std::function<void(TensorNode<float>&)>);
template BasicTensor<double> make_result<double>(std::string_view, Shape, std::vector<double>,
                                                 std::vector<std::shared_ptr<TensorNode<double>>>,
                                                 std::function<void(TensorNode<double>&)>);

}  // namespace coala
