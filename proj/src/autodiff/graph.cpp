#include "e2e/autodiff/graph.hpp"

#include "e2e/error.hpp"

namespace e2e::ad {

std::string to_string(Partition p) {
  switch (p) {
    case Partition::backbone: return "backbone";
    case Partition::adapter: return "adapter";
    case Partition::mask: return "mask";
    case Partition::constellation: return "constellation";
  }
  return "backbone";
}

Partition partition_from_string(const std::string& s) {
  if (s == "backbone") return Partition::backbone;
  if (s == "adapter") return Partition::adapter;
  if (s == "mask") return Partition::mask;
  if (s == "constellation") return Partition::constellation;
  throw FormatError("unknown partition '" + s + "'");
}

Parameter& ParameterSet::add(std::string name, Partition partition, Tensor value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_.emplace(name, items_.size());
  items_.push_back(Parameter{std::move(name), partition, std::move(value), true});
  return items_.back();
}

bool ParameterSet::contains(const std::string& name) const { return index_.contains(name); }

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return items_[it->second];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return items_[it->second];
}

std::size_t ParameterSet::total_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : items_)
    if (p.trainable) n += p.value.size();
  return n;
}

std::size_t ParameterSet::count(Partition part) const {
  std::size_t n = 0;
  for (const auto& p : items_)
    if (p.partition == part) n += p.value.size();
  return n;
}

void ParameterSet::set_all_trainable(bool trainable) {
  for (auto& p : items_) p.trainable = trainable;
}

void ParameterSet::set_trainable(Partition part, bool trainable) {
  for (auto& p : items_)
    if (p.partition == part) p.trainable = trainable;
}

const Tensor& Var::value() const { return graph->value(id); }
const Shape& Var::shape() const { return graph->value(id).shape(); }
bool Var::requires_grad() const { return graph->requires_grad(id); }

Var Graph::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Var Graph::variable(Tensor value) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Graph::parameter(ParameterSet& params, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var{this, it->second};
  const Parameter& p = params.get(name);
  Var v = push(p.value, {}, nullptr);
  nodes_[v.id].requires_grad = p.trainable;
  params_.emplace(name, v.id);
  return v;
}

Var Graph::push(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  if (!value.all_finite()) throw DomainError("operation produced a non-finite value");
  bool rg = false;
  for (const Var& in : inputs) {
    if (in.graph != this) throw ContractError("operand belongs to a different graph");
    rg = rg || nodes_[in.id].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = rg;
  if (rg) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) throw ContractError("node has no gradient");
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("loss belongs to a different graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(nodes_[loss.id].value.shape()));
  }
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

std::map<std::string, Tensor> Graph::parameter_gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params_) {
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    out.emplace(name, n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad);
  }
  return out;
}

}  // namespace e2e::ad
