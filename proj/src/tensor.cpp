#include "tcm/tensor.hpp"

#include <unordered_set>

#include "tcm/errors.hpp"

namespace tcm {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::TensorNode>();
  node->values.assign(shape_numel(shape), Real(0));
  node->shape = std::move(shape);
  Tensor t(std::move(node));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = value;
  return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  Tensor t(std::move(node));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return from_values(Shape{}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->values.size();
}

std::span<Real> Tensor::values() {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->values;
}

std::span<const Real> Tensor::values() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->values;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_) throw ContractError("use of undefined tensor");
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->values.size(), Real(0));
  } else {
    node_->grad.clear();
  }
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<Real> Tensor::grad() {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return node_->grad;
}

std::span<const Real> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.assign(node_->grad.size(), Real(0));
}

Real Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() requires a single-element tensor, got " + shape_str(shape()));
  }
  return node_->values[0];
}

Tensor Tensor::clone() const {
  if (!node_) return Tensor();
  auto node = std::make_shared<detail::TensorNode>(*node_);
  return Tensor(std::move(node));
}

void Tape::record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn backward) {
  Record r;
  r.output = output.node_ptr();
  r.inputs.reserve(inputs.size());
  for (const auto& in : inputs) r.inputs.push_back(in.node_ptr());
  r.backward = std::move(backward);
  records_.push_back(std::move(r));
}

std::vector<Real>* Tape::GradStore::find(detail::TensorNode* node) {
  auto it = grads_.find(node);
  return it == grads_.end() ? nullptr : &it->second;
}

std::vector<Real>& Tape::GradStore::at(detail::TensorNode* node, std::size_t numel) {
  auto [it, inserted] = grads_.try_emplace(node);
  if (inserted) it->second.assign(numel, Real(0));
  return it->second;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on undefined tensor");
  if (loss.size() != 1) {
    throw ContractError("backward target must be a scalar, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward target does not require gradients");
  }

  // Restrict the replay to records that feed the loss.
  std::unordered_set<detail::TensorNode*> needed{loss.node()};
  std::vector<const Record*> active;
  active.reserve(records_.size());
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (needed.count(it->output.get())) {
      active.push_back(&*it);
      for (const auto& in : it->inputs) needed.insert(in.get());
    }
  }

  GradStore store;
  store.at(loss.node(), 1)[0] = Real(1);
  for (const Record* rec : active) rec->backward(store);

  // Fold the per-pass gradients into the persistent buffers.
  auto flush = [&store](detail::TensorNode* node) {
    if (!node->requires_grad || node->grad.empty()) return;
    if (auto* g = store.find(node)) {
      for (std::size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += (*g)[i];
    }
  };
  flush(loss.node());
  std::unordered_set<detail::TensorNode*> flushed{loss.node()};
  for (const Record* rec : active) {
    if (flushed.insert(rec->output.get()).second) flush(rec->output.get());
    for (const auto& in : rec->inputs) {
      if (flushed.insert(in.get()).second) flush(in.get());
    }
  }
}

void Tape::clear() { records_.clear(); }

}  // namespace tcm
