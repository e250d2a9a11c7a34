#include "revol/backbone.hpp"

#include "revol/errors.hpp"
#include "revol/kv_config.hpp"

namespace revol {

BackboneKind parse_backbone_kind(const std::string& name) {
  if (name == "recurrent") return BackboneKind::recurrent;
  if (name == "mlp") return BackboneKind::mlp;
  throw ConfigError("unknown backbone '" + name + "' (expected recurrent or mlp)");
}

std::string to_string(BackboneKind kind) { return kind == BackboneKind::recurrent ? "recurrent" : "mlp"; }

void BackboneConfig::validate() const {
  if (hidden_size == 0 || num_layers == 0 || input_width == 0 || window == 0) {
    throw ConfigError("backbone sizes must be positive");
  }
}

BackboneConfig backbone_config_from(const KeyValueConfig& cfg, BackboneConfig d) {
  d.kind = parse_backbone_kind(cfg.get_string("backbone", to_string(d.kind)));
  d.hidden_size = static_cast<std::size_t>(cfg.get_int("hidden", static_cast<long long>(d.hidden_size)));
  d.num_layers = static_cast<std::size_t>(cfg.get_int("layers", static_cast<long long>(d.num_layers)));
  d.window = static_cast<std::size_t>(cfg.get_int("w", static_cast<long long>(d.window)));
  d.validate();
  return d;
}

Backbone::Backbone(BackboneConfig cfg, std::string prefix)
    : cfg_(cfg), head_{prefix + ".head", cfg.hidden_size, 1} {
  cfg_.validate();
  if (cfg_.kind == BackboneKind::recurrent) {
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      lstm_layers_.push_back(
          {prefix + ".lstm" + std::to_string(l), l == 0 ? cfg_.input_width : cfg_.hidden_size, cfg_.hidden_size});
    }
  } else {
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      dense_layers_.push_back({prefix + ".dense" + std::to_string(l),
                               l == 0 ? cfg_.input_width * cfg_.window : cfg_.hidden_size, cfg_.hidden_size});
    }
  }
}

void Backbone::init(nn::ParamStore& store, std::mt19937_64& rng) const {
  for (const auto& l : lstm_layers_) l.init(store, rng);
  for (const auto& l : dense_layers_) l.init(store, rng);
  head_.init(store, rng, /*zero=*/true);
}

nn::Var Backbone::forward(nn::Graph& g, nn::ParamStore& store, nn::Var window) const {
  const std::size_t width = cfg_.input_width;
  if (window.cols() % width != 0 || window.cols() == 0) {
    throw ShapeError("backbone input has " + std::to_string(window.cols()) + " columns, not a multiple of " +
                     std::to_string(width));
  }
  if (cfg_.kind == BackboneKind::mlp) {
    if (window.cols() != width * cfg_.window) {
      throw ShapeError("mlp backbone configured for w=" + std::to_string(cfg_.window));
    }
    nn::Var x = window;
    for (const auto& layer : dense_layers_) x = nn::tanh(layer.forward(g, store, x));
    return head_.forward(g, store, x);
  }

  const std::size_t steps = window.cols() / width;
  const std::size_t B = window.rows();
  std::vector<nn::LstmWeights> weights;
  weights.reserve(lstm_layers_.size());
  for (const auto& layer : lstm_layers_) weights.push_back(layer.bind(g, store));
  nn::Var zeros = g.constant(nn::Tensor(B, cfg_.hidden_size));
  std::vector<nn::Var> h(lstm_layers_.size(), zeros), c(lstm_layers_.size(), zeros);
  for (std::size_t t = 0; t < steps; ++t) {
    nn::Var x = nn::slice(window, 1, width * t, width * (t + 1));
    for (std::size_t l = 0; l < weights.size(); ++l) {
      std::tie(h[l], c[l]) = nn::lstm_cell(x, h[l], c[l], weights[l]);
      x = h[l];
    }
  }
  return head_.forward(g, store, h.back());
}

double predict_error(const ErrorTermWindow& window, const Backbone& backbone, nn::ParamStore& store) {
  const std::size_t w = window.eps_close.size();
  if (window.eps_open.size() != w || window.eps_high.size() != w || window.eps_low.size() != w) {
    throw ShapeError("error-term channels differ in length");
  }
  nn::Tensor x(1, kChannels * w);
  for (std::size_t t = 0; t < w; ++t) {
    x(0, kChannels * t + 0) = window.eps_open[t];
    x(0, kChannels * t + 1) = window.eps_high[t];
    x(0, kChannels * t + 2) = window.eps_low[t];
    x(0, kChannels * t + 3) = window.eps_close[t];
  }
  nn::Graph g(false);
  return backbone.forward(g, store, g.constant(std::move(x))).value().item();
}

}  // namespace revol
