#include "revol/nn/graph.hpp"

#include "revol/errors.hpp"

namespace revol::nn {

const Tensor& Var::value() const {
  if (!graph_) throw StateError("use of an unbound Var");
  return graph_->value(*this);
}

Graph& Var::graph() const {
  if (!graph_) throw StateError("use of an unbound Var");
  return *graph_;
}

bool Var::valid() const { return graph_ && graph_->generation_ == generation_ && id_ < graph_->nodes_.size(); }

void Graph::check(Var v) const {
  if (v.graph_ != this) throw StateError("Var belongs to a different graph");
  if (v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw StateError("Var refers to a cleared tape (backward already ran or forward missing)");
  }
}

const Tensor& Graph::value(Var v) const {
  check(v);
  return nodes_[v.id_].value;
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericDomainError("non-finite value entering the graph");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::parameter(ParamStore& store, const std::string& name) {
  ParamEntry& entry = store.at(name);
  if (auto it = bound_params_.find(&entry); it != bound_params_.end()) {
    return Var(this, it->second, generation_);
  }
  if (!entry.value.all_finite()) throw NumericDomainError("parameter '" + name + "' is not finite");
  Node n;
  n.value = entry.value;
  n.requires_grad = track_gradients_;
  n.param = &entry;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  bound_params_[&entry] = id;
  return Var(this, id, generation_);
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    check(p);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Tensor* Graph::grad_sink(Var v) {
  check(v);
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

void Graph::backward(Var loss) {
  if (!loss.graph_ || nodes_.empty()) throw StateError("backward called before any forward pass");
  check(loss);
  Node& root = nodes_[loss.id_];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + root.value.shape_string());
  }
  if (!root.value.all_finite()) throw NumericDomainError("loss is not finite");
  if (root.requires_grad) {
    grad_sink(loss)->fill(1.0);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, n.value, n.grad);
      if (n.param) {
        double* dst = n.param->grad.data();
        const double* src = n.grad.data();
        for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
      }
    }
  }
  clear();
}

void Graph::clear() {
  nodes_.clear();
  bound_params_.clear();
  ++generation_;
}

}  // namespace revol::nn
