#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vcrn/numerics/matrix.hpp"

namespace vcrn::numerics {

namespace detail {
inline bool& grad_recording_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

/// One vertex of the recorded computation. A node's id is larger than the id
/// of every parent, so decreasing-id order is a valid reverse topological order.
template <class Real>
struct Node {
  Matrix<Real> value;
  Matrix<Real> grad;
  bool has_grad = false;
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t id = detail::next_node_id();
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents.
  std::function<void(Node&)> backward_fn;

  Matrix<Real>& ensure_grad() {
    if (!has_grad) {
      grad = Matrix<Real>(value.rows(), value.cols());
      has_grad = true;
    }
    return grad;
  }
};

/// Handle to a node. Copies share the node.
template <class Real>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Real>>;

  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Matrix<Real> value) {
    auto n = std::make_shared<Node<Real>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  static Var leaf(Matrix<Real> value) {
    auto n = std::make_shared<Node<Real>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  const Matrix<Real>& value() const { return node_->value; }
  Matrix<Real>& mutable_value() { return node_->value; }
  const Matrix<Real>& grad() const { return node_->ensure_grad(); }
  Matrix<Real>& mutable_grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  Real scalar() const { return node_->value[0]; }
  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_recording_enabled()) {
    detail::grad_recording_enabled() = false;
  }
  ~NoGradGuard() { detail::grad_recording_enabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates an interior node. When no parent requires a gradient the node is
/// recorded as a constant and the backward rule is dropped.
template <class Real>
Var<Real> make_node(Matrix<Real> value, std::vector<Var<Real>> parents,
                    std::function<void(Node<Real>&)> backward_fn) {
  auto n = std::make_shared<Node<Real>>();
  n->value = std::move(value);
  n->is_leaf = false;
  if (detail::grad_recording_enabled()) {
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Var<Real>(std::move(n));
}

/// Reverse accumulation from a scalar. Leaf gradients accumulate across calls;
/// interior gradients are recomputed from scratch on every call.
template <class Real>
void backward(const Var<Real>& loss) {
  if (!loss || loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss ? loss.value().shape_string() : std::string("<null>")));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node<Real>*> order;
  std::unordered_set<const Node<Real>*> seen;
  std::vector<Node<Real>*> stack{loss.node().get()};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Node<Real>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node<Real>* a, const Node<Real>* b) { return a->id > b->id; });
  for (Node<Real>* n : order) {
    if (!n->is_leaf) {
      n->has_grad = false;
      n->grad = Matrix<Real>();
    }
  }
  loss.node()->ensure_grad()[0] += Real(1);
  for (Node<Real>* n : order) {
    if (n->backward_fn && n->has_grad) n->backward_fn(*n);
  }
}

/// Named learnable tensors, iterated in name order.
template <class Real>
class ParameterStore {
 public:
  Var<Real>& add(const std::string& name, Matrix<Real> init) {
    if (params_.count(name)) throw ContractError("parameter registered twice: " + name);
    return params_.emplace(name, Var<Real>::leaf(std::move(init))).first->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  Var<Real>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }
  const Var<Real>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }
  void zero_grad() {
    for (auto& [_, v] : params_) v.mutable_grad().fill(Real(0));
  }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += v.value().size();
    return n;
  }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Var<Real>> params_;
};

}  // namespace vcrn::numerics
