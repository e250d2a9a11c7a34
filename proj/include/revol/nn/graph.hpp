#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "revol/nn/param_store.hpp"
#include "revol/nn/tensor.hpp"

namespace revol::nn {

class Graph;

/// Handle to a node on a Graph's tape. Invalidated when the tape is cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Graph& graph() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const;

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id, std::uint64_t generation) : graph_(g), id_(id), generation_(generation) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Reverse-mode tape for one forward pass. Nodes are appended in creation
/// order, which is a topological order; backward walks it once in reverse.
class Graph {
 public:
  /// Backward rule: receives the node's output value and its gradient and
  /// accumulates into parents through grad_sink().
  using BackwardFn = std::function<void(Graph&, const Tensor& out, const Tensor& out_grad)>;

  /// With track_gradients false no backward rules are recorded (inference).
  explicit Graph(bool track_gradients = true) : track_gradients_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Non-trainable input. Rejects NaN/Inf.
  Var constant(Tensor value);
  /// Leaf bound to a ParamStore entry; repeated calls in one pass return the
  /// same node. Gradients land in the entry on backward().
  Var parameter(ParamStore& store, const std::string& name);

  /// Accumulates d(loss)/d(param) into every bound ParamStore entry, then
  /// clears the tape. Throws StateError without a recorded forward pass.
  void backward(Var loss);
  void clear();

  std::size_t node_count() const { return nodes_.size(); }

  // Used by op implementations.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);
  const Tensor& value(Var v) const;
  /// Gradient buffer of `v`, zero-initialized on first use; nullptr when no
  /// parameter depends on `v`.
  Tensor* grad_sink(Var v);

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    ParamEntry* param = nullptr;
  };

  void check(Var v) const;

  std::vector<Node> nodes_;
  std::map<const ParamEntry*, std::uint32_t> bound_params_;
  std::uint64_t generation_ = 1;
  bool track_gradients_ = true;
};

// Elementwise ops require equal shapes; add/sub additionally accept a 1xN
// right operand as a bias row. No other broadcasting.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var sqrt(Var a);
Var softmax(Var a, int axis);
Var sum(Var a);
Var sum(Var a, int axis);
Var mean(Var a);
Var mean(Var a, int axis);
Var concat(std::span<const Var> parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);

}  // namespace revol::nn
