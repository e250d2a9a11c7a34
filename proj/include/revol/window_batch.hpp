#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "revol/market_data.hpp"
#include "revol/nn/tensor.hpp"

namespace revol {

/// Per-symbol open fraction estimates keyed by symbol.
using RHatTable = std::map<std::string, double>;

/// Four channels per day, time-major: column 4*t + k holds channel k
/// (open, high, low, close) of step t, t = 0 .. w-1 for days T-w+1 .. T.
inline constexpr std::size_t kChannels = 4;

/// Dense matrices for a batch of windows, built once per batch.
struct WindowBatch {
  std::size_t size = 0;
  std::size_t window = 0;
  bool has_targets = false;

  /// ln(S_t^o / S_{t-1}^c), ln(S_t^h / S_{t-1}^c), ln(S_t^l / S_{t-1}^c),
  /// ln(S_t^c / S_{t-1}^c); B x 4w.
  nn::Tensor log_moves;
  /// Drift multiplier per channel: r_hat for open, 0 for high/low, 1 for close; B x 4w.
  nn::Tensor drift_mask;
  /// Close-to-close log returns; B x w.
  nn::Tensor log_close;
  /// Ratio features x^o, x^h, x^l, x^c in the same layout as log_moves; B x 4w.
  nn::Tensor ratio_features;
  /// Arithmetic mean of the window's log returns; B x 1.
  nn::Tensor arithmetic_mean;
  /// S_{T+1}^c / S_T^c; B x 1 (ones when has_targets is false).
  nn::Tensor target_ratio;
  std::vector<double> last_close;
};

/// Throws ArgumentError when a symbol has no r_hat entry, or when targets are
/// requested from inference-only samples.
WindowBatch make_batch(std::span<const WindowSample* const> samples, const RHatTable& r_hats, bool with_targets);

}  // namespace revol
