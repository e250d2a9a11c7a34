#include "revol/window_batch.hpp"

#include <cmath>

#include "revol/errors.hpp"

namespace revol {

WindowBatch make_batch(std::span<const WindowSample* const> samples, const RHatTable& r_hats, bool with_targets) {
  if (samples.empty()) throw ArgumentError("empty batch");
  const std::size_t w = samples.front()->window();
  const std::size_t B = samples.size();

  WindowBatch b;
  b.size = B;
  b.window = w;
  b.has_targets = with_targets;
  b.log_moves = nn::Tensor(B, kChannels * w);
  b.drift_mask = nn::Tensor(B, kChannels * w);
  b.log_close = nn::Tensor(B, w);
  b.ratio_features = nn::Tensor(B, kChannels * w);
  b.arithmetic_mean = nn::Tensor(B, 1);
  b.target_ratio = nn::Tensor(B, 1, 1.0);
  b.last_close.resize(B);

  for (std::size_t i = 0; i < B; ++i) {
    const WindowSample& s = *samples[i];
    if (s.window() != w) throw ArgumentError("batch mixes window sizes");
    auto it = r_hats.find(s.symbol());
    if (it == r_hats.end()) throw ArgumentError("no r_hat for symbol '" + s.symbol() + "'");
    const double r_hat = it->second;
    const auto bars = s.bars();
    double total = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
      const OhlcBar& prev = bars[t];
      const OhlcBar& cur = bars[t + 1];
      if (!(prev.close > 0 && cur.open > 0 && cur.high > 0 && cur.low > 0 && cur.close > 0)) {
        throw NumericDomainError("nonpositive price in window of " + s.symbol());
      }
      const std::size_t col = kChannels * t;
      b.log_moves(i, col + 0) = std::log(cur.open / prev.close);
      b.log_moves(i, col + 1) = std::log(cur.high / prev.close);
      b.log_moves(i, col + 2) = std::log(cur.low / prev.close);
      b.log_moves(i, col + 3) = std::log(cur.close / prev.close);
      b.drift_mask(i, col + 0) = r_hat;
      b.drift_mask(i, col + 3) = 1.0;
      b.ratio_features(i, col + 0) = cur.open / cur.close - 1.0;
      b.ratio_features(i, col + 1) = cur.high / cur.close - 1.0;
      b.ratio_features(i, col + 2) = cur.low / cur.close - 1.0;
      b.ratio_features(i, col + 3) = cur.close / prev.close - 1.0;
      b.log_close(i, t) = b.log_moves(i, col + 3);
      total += b.log_close(i, t);
    }
    b.arithmetic_mean(i, 0) = total / static_cast<double>(w);
    b.last_close[i] = s.last_bar().close;
    if (with_targets) b.target_ratio(i, 0) = s.target_close() / s.last_bar().close;
  }
  return b;
}

}  // namespace revol
