#pragma once

#include <random>
#include <string>
#include <vector>

#include "revol/nn/graph.hpp"
#include "revol/nn/layers.hpp"
#include "revol/rvn.hpp"

namespace revol {

class KeyValueConfig;

enum class BackboneKind { recurrent, mlp };

BackboneKind parse_backbone_kind(const std::string& name);
std::string to_string(BackboneKind kind);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::recurrent;
  std::size_t hidden_size = 128;
  std::size_t num_layers = 1;
  std::size_t input_width = kChannels;
  /// Needed by the MLP, which consumes the flattened window.
  std::size_t window = 16;

  void validate() const;
};

/// Reads `backbone`, `hidden`, `layers`, `w` keys.
BackboneConfig backbone_config_from(const KeyValueConfig& cfg, BackboneConfig defaults = {});

/// Maps a B x (input_width * w) window in the WindowBatch layout to a B x 1
/// prediction. The output head starts at zero.
class Backbone {
 public:
  explicit Backbone(BackboneConfig cfg, std::string prefix = "backbone");

  void init(nn::ParamStore& store, std::mt19937_64& rng) const;
  nn::Var forward(nn::Graph& g, nn::ParamStore& store, nn::Var window) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  std::vector<nn::LstmLayer> lstm_layers_;
  std::vector<nn::Linear> dense_layers_;
  nn::Linear head_;
};

/// Single-window prediction of the next close error term.
double predict_error(const ErrorTermWindow& window, const Backbone& backbone, nn::ParamStore& store);

}  // namespace revol
