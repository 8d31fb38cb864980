#include "ovseg/numeric/autodiff.hpp"

namespace ovseg {

template <typename T>
Var<T> Graph<T>::parameter(std::string name, TensorT value) {
  Node n;
  n.value = std::move(value);
  n.name = std::move(name);
  n.is_parameter = true;
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(TensorT value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(TensorT value, std::initializer_list<Var<T>> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& p : parents) {
      if (&p.graph() != this) throw ArgumentError("autodiff: operand belongs to a different graph");
      n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Graph<T>::accumulate_grad(const Var<T>& v, const TensorT& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape()) {
    throw ShapeError("autodiff: gradient " + shape_string(g.shape()) + " does not match value " +
                     shape_string(n.value.shape()));
  }
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <typename U>
struct BackwardAccess {
  static GradResult<U> run(Graph<U>& graph, const Var<U>& output) {
    auto& nodes = graph.nodes_;
    if (graph.value(output).size() != 1) {
      throw ShapeError("backward: output must be scalar, got " + shape_string(graph.value(output).shape()));
    }
    for (auto& n : nodes) n.grad = BasicTensor<U>();
    if (nodes[output.id()].requires_grad) {
      nodes[output.id()].grad = BasicTensor<U>(nodes[output.id()].value.shape(), U(1));
    }
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      auto& n = nodes[i];
      if (n.grad.empty() || !n.backward) continue;
      // Interior nodes never report their gradient, so it can be consumed.
      const BasicTensor<U> g = std::move(n.grad);
      n.backward(graph, g);
    }
    GradResult<U> result;
    for (auto& n : nodes) {
      if (!n.is_parameter) continue;
      if (n.grad.empty()) {
        result.grads[n.name] = BasicTensor<U>(n.value.shape());
        result.unreachable.push_back(n.name);
      } else {
        result.grads[n.name] = n.grad;
      }
    }
    return result;
  }
};

template <typename T>
GradResult<T> backward(Graph<T>& graph, const Var<T>& output) {
  return BackwardAccess<T>::run(graph, output);
}

template <typename T>
VarMap<T> bind_params(Graph<T>& graph, const ParamSet<T>& params, bool trainable) {
  VarMap<T> vars;
  for (const auto& [name, t] : params) {
    vars.emplace(name, trainable ? graph.parameter(name, t) : graph.constant(t));
  }
  return vars;
}

template <typename T>
const Var<T>& lookup(const VarMap<T>& vars, const std::string& name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw ArgumentError("missing parameter '" + name + "'");
  return it->second;
}

template class Graph<float>;
template class Graph<double>;
template GradResult<float> backward(Graph<float>&, const Var<float>&);
template GradResult<double> backward(Graph<double>&, const Var<double>&);
template VarMap<float> bind_params(Graph<float>&, const ParamSet<float>&, bool);
template VarMap<double> bind_params(Graph<double>&, const ParamSet<double>&, bool);
template const Var<float>& lookup(const VarMap<float>&, const std::string&);
template const Var<double>& lookup(const VarMap<double>&, const std::string&);

}  // namespace ovseg
