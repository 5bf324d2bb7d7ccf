#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "e2e/autodiff/tensor.hpp"

namespace e2e::ad {

/// Which group of the model a parameter belongs to. Fine-tuning modes
/// select trainable sets by partition.
enum class Partition { backbone, adapter, mask, constellation };

std::string to_string(Partition p);
Partition partition_from_string(const std::string& s);

struct Parameter {
  std::string name;
  Partition partition = Partition::backbone;
  Tensor value;
  bool trainable = true;
};

/// Ordered, named parameter storage. Insertion order is preserved so
/// iteration (and therefore serialization) is deterministic.
class ParameterSet {
 public:
  Parameter& add(std::string name, Partition partition, Tensor value);

  bool contains(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }

  std::size_t total_count() const;
  std::size_t trainable_count() const;
  std::size_t count(Partition p) const;

  void set_all_trainable(bool trainable);
  void set_trainable(Partition p, bool trainable);

 private:
  std::vector<Parameter> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Graph;

/// Lightweight handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const;
  bool requires_grad() const;
};

/// Tape of operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. A Graph is single-use: build, call backward once,
/// read gradients, discard.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf that receives a gradient; used for input sensitivities and tests.
  Var variable(Tensor value);
  /// Binds a named parameter. Binding the same name twice returns the same
  /// node. Frozen parameters become constants.
  Var parameter(ParameterSet& params, const std::string& name);

  /// Appends an op node. `fn` runs during backward only when the node
  /// requires a gradient; it reads grad(self) and accumulates into inputs.
  Var push(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of a node, allocated (zeroed) on first access.
  Tensor& grad(std::size_t id);
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const { return !nodes_[v.id].grad.empty(); }

  void backward(Var loss);

  /// Gradients of every trainable parameter bound in this graph.
  std::map<std::string, Tensor> parameter_gradients() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  bool backward_done_ = false;
};

}  // namespace e2e::ad
