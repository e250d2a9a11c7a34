#pragma once

#include <random>
#include <string>
#include <utility>

#include "revol/nn/graph.hpp"

namespace revol::nn {

/// y = x W + b with W: in x out, b: 1 x out. Parameters live under
/// `<prefix>.w` and `<prefix>.b`.
struct Linear {
  std::string prefix;
  std::size_t in = 0;
  std::size_t out = 0;

  /// Uniform(+-1/sqrt(in)) weights, zero bias; all-zero when `zero` is set.
  void init(ParamStore& store, std::mt19937_64& rng, bool zero = false) const;
  Var forward(Graph& g, ParamStore& store, Var x) const;
};

/// Parameters of one LSTM layer bound into a graph. Gate order in the 4H
/// columns is input, forget, candidate, output.
struct LstmWeights {
  Var input_weights;      // D x 4H
  Var recurrent_weights;  // H x 4H
  Var bias;               // 1 x 4H
  std::size_t hidden = 0;
};

struct LstmLayer {
  std::string prefix;
  std::size_t in = 0;
  std::size_t hidden = 0;

  void init(ParamStore& store, std::mt19937_64& rng) const;
  LstmWeights bind(Graph& g, ParamStore& store) const;
};

/// One step: returns (h_t, c_t). x: B x D, h_prev/c_prev: B x H.
std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& w);

}  // namespace revol::nn
