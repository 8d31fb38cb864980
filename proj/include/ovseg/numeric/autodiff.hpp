#pragma once

// Define-by-run reverse-mode differentiation over the kernel set.
//
// A Graph owns every node created while building an expression. Nodes are
// appended in evaluation order, so reverse creation order is a valid
// topological order for backward. Parameters are named leaves; constants are
// leaves that never receive gradients.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Graph {
 public:
  using TensorT = BasicTensor<T>;
  /// Receives the gradient flowing into the node and pushes contributions
  /// to its parents through accumulate_grad.
  using BackwardFn = std::function<void(Graph&, const TensorT& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> parameter(std::string name, TensorT value);
  Var<T> constant(TensorT value);
  Var<T> record(TensorT value, std::initializer_list<Var<T>> parents, BackwardFn backward);

  const TensorT& value(const Var<T>& v) const { return nodes_[v.id()].value; }
  bool requires_grad(const Var<T>& v) const { return nodes_[v.id()].requires_grad; }
  void accumulate_grad(const Var<T>& v, const TensorT& g);

  /// When disabled, record() keeps values only; nothing is differentiable.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  template <typename U>
  friend struct BackwardAccess;

  struct Node {
    TensorT value;
    TensorT grad;
    BackwardFn backward;
    std::string name;
    bool is_parameter = false;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

template <typename T>
const BasicTensor<T>& Var<T>::value() const {
  return graph_->value(*this);
}

template <typename T>
struct GradResult {
  std::map<std::string, BasicTensor<T>> grads;
  /// Parameters the output does not depend on; their gradient is zero.
  std::vector<std::string> unreachable;
};

/// Reverse sweep from a scalar output. Throws ShapeError for non-scalars.
template <typename T>
GradResult<T> backward(Graph<T>& graph, const Var<T>& output);

template <typename T>
using ParamSet = std::map<std::string, BasicTensor<T>>;
template <typename T>
using VarMap = std::map<std::string, Var<T>>;

/// Creates one parameter leaf per entry. With `trainable == false` the
/// entries become constants (inference mode).
template <typename T>
VarMap<T> bind_params(Graph<T>& graph, const ParamSet<T>& params, bool trainable = true);

/// Looks up a bound parameter by name; throws ArgumentError naming it if absent.
template <typename T>
const Var<T>& lookup(const VarMap<T>& vars, const std::string& name);

template <typename To, typename From>
ParamSet<To> cast_params(const ParamSet<From>& params) {
  ParamSet<To> out;
  for (const auto& [name, t] : params) out.emplace(name, t.template cast<To>());
  return out;
}

}  // namespace ovseg
