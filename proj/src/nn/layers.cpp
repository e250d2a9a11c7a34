#include "revol/nn/layers.hpp"

#include <cmath>

#include "revol/errors.hpp"

namespace revol::nn {

void Linear::init(ParamStore& store, std::mt19937_64& rng, bool zero) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(prefix + ".w", zero ? Tensor(in, out) : uniform_tensor(in, out, bound, rng));
  store.add(prefix + ".b", Tensor(1, out));
}

Var Linear::forward(Graph& g, ParamStore& store, Var x) const {
  if (x.cols() != in) {
    throw ShapeError(prefix + ": expected " + std::to_string(in) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  return add(matmul(x, g.parameter(store, prefix + ".w")), g.parameter(store, prefix + ".b"));
}

void LstmLayer::init(ParamStore& store, std::mt19937_64& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  store.add(prefix + ".wx", uniform_tensor(in, 4 * hidden, bound, rng));
  store.add(prefix + ".wh", uniform_tensor(hidden, 4 * hidden, bound, rng));
  Tensor b(1, 4 * hidden);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget-gate bias
  store.add(prefix + ".b", std::move(b));
}

LstmWeights LstmLayer::bind(Graph& g, ParamStore& store) const {
  LstmWeights w{g.parameter(store, prefix + ".wx"), g.parameter(store, prefix + ".wh"),
                g.parameter(store, prefix + ".b"), hidden};
  if (w.input_weights.rows() != in || w.input_weights.cols() != 4 * hidden || w.recurrent_weights.rows() != hidden ||
      w.recurrent_weights.cols() != 4 * hidden || w.bias.cols() != 4 * hidden) {
    throw ShapeError(prefix + ": stored LSTM parameters do not match layer shape");
  }
  return w;
}

std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& w) {
  const std::size_t H = w.hidden;
  if (x.cols() != w.input_weights.rows() || h_prev.cols() != H || c_prev.cols() != H ||
      h_prev.rows() != x.rows() || c_prev.rows() != x.rows()) {
    throw ShapeError("lstm_cell: input/state shapes do not match the weights");
  }
  Var z = add(add(matmul(x, w.input_weights), matmul(h_prev, w.recurrent_weights)), w.bias);
  Var i = sigmoid(slice(z, 1, 0, H));
  Var f = sigmoid(slice(z, 1, H, 2 * H));
  Var cand = tanh(slice(z, 1, 2 * H, 3 * H));
  Var o = sigmoid(slice(z, 1, 3 * H, 4 * H));
  Var c = add(mul(f, c_prev), mul(i, cand));
  Var h = mul(o, tanh(c));
  return {h, c};
}

}  // namespace revol::nn
