#include "mulaaip/autodiff.hpp"

#include <cmath>

#include "mulaaip/error.hpp"

namespace mulaaip::nn {

// ---- ParameterStore --------------------------------------------------------

Parameter& ParameterStore::add(const std::string& name, Tensor value, bool regularized,
                               bool trainable) {
  if (find(name)) throw Error(ErrorCode::DuplicateId, "parameter '" + name + "' registered twice");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(value.shape(), 0.0);
  p->value = std::move(value);
  p->regularized = regularized;
  p->trainable = trainable;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::add_xavier(const std::string& name, std::size_t fan_in,
                                      std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (auto& v : w.values()) v = rng.uniform(-a, a);
  return add(name, std::move(w), true, true);
}

Parameter& ParameterStore::add_zeros(const std::string& name, std::size_t rows, std::size_t cols,
                                     bool regularized) {
  return add(name, Tensor(rows, cols), regularized, true);
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw Error(ErrorCode::MissingCheckpoint, "no parameter named '" + name + "'");
  return *p;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p->trainable) out.push_back(p.get());
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<Tensor> ParameterStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "snapshot size does not match parameter count");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i]->value)) {
      throw Error(ErrorCode::ShapeMismatch, "snapshot shape mismatch for '" + params_[i]->name + "'");
    }
    params_[i]->value = values[i];
  }
}

// ---- Tape ------------------------------------------------------------------

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  const bool track = grad_enabled_ && p.trainable;
  nodes_.push_back(Node{p.value, {}, {}, track ? &p : nullptr, track});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

const Tensor* Tape::grad_if_any(Var v) const {
  const Node& node = nodes_[v.id];
  return node.grad.empty() ? nullptr : &node.grad;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  for (double v : value.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, std::string("non-finite output from ") + op);
  }
  bool needs = false;
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (in.tape != this) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": operands on different tapes");
      needs = needs || nodes_[in.id].requires_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) {
    throw Error(ErrorCode::NotScalar, "backward() needs a 1-element loss, got " +
                                          nodes_[loss.id].value.shape_string());
  }
  for (auto& node : nodes_) node.grad = Tensor();
  grad(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.param) node.param->grad += node.grad;
    if (node.backward) node.backward(*this, node.grad);
  }
}

}  // namespace mulaaip::nn
