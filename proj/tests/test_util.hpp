#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "revol/market_data.hpp"
#include "revol/nn/graph.hpp"
#include "revol/nn/param_store.hpp"

namespace revol::testing {

/// Bars with open = previous close and extrema spanning open/close.
inline std::shared_ptr<const BarSeries> series_from_closes(const std::vector<double>& closes) {
  auto bars = std::make_shared<BarSeries>();
  const auto dates = business_days(Date::from_ymd(2020, 1, 1), closes.size());
  for (std::size_t i = 0; i < closes.size(); ++i) {
    const double open = i == 0 ? closes[0] : closes[i - 1];
    bars->push_back({dates[i], open, std::max(open, closes[i]), std::min(open, closes[i]), closes[i]});
  }
  return bars;
}

/// One window covering every close (w = closes.size() - 1), no target.
inline WindowSample window_from_closes(const std::vector<double>& closes, const std::string& symbol = "TST") {
  return WindowSample(symbol, series_from_closes(closes), 0, closes.size() - 1);
}

/// Random valid bars with lognormal moves.
inline std::shared_ptr<const BarSeries> random_series(std::size_t n, std::mt19937_64& rng, double sigma = 0.02) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto bars = std::make_shared<BarSeries>();
  const auto dates = business_days(Date::from_ymd(2015, 1, 1), n);
  double prev = 50.0 + 100.0 * u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double open = prev * std::exp(0.5 * sigma * z(rng));
    const double close = prev * std::exp(sigma * z(rng));
    const double high = std::max(open, close) * std::exp(0.5 * sigma * u(rng));
    const double low = std::min(open, close) * std::exp(-0.5 * sigma * u(rng));
    bars->push_back({dates[i], open, high, low, close});
    prev = close;
  }
  return bars;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences on every parameter element against the
/// analytic gradient of `loss_fn`. Relative error |a-n| / max(|a|, |n|, floor).
/// The five-point stencil (O(h^4)) allows a larger h, which keeps roundoff
/// small for entries whose gradient is far below the loss scale.
inline GradCheck check_gradients(nn::ParamStore& store, const std::function<nn::Var(nn::Graph&)>& loss_fn,
                                 double h = 1e-5, double floor = 1e-6, bool five_point = false) {
  store.zero_grad();
  {
    nn::Graph g;
    g.backward(loss_fn(g));
  }
  auto eval = [&]() {
    nn::Graph g(false);
    return loss_fn(g).value().item();
  };
  GradCheck res;
  for (auto& [name, entry] : store) {
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double orig = entry.value[i];
      auto at = [&](double dx) {
        entry.value[i] = orig + dx;
        const double v = eval();
        entry.value[i] = orig;
        return v;
      };
      const double numeric = five_point ? (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h)
                                        : (at(h) - at(-h)) / (2.0 * h);
      const double analytic = entry.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
      ++res.checked;
    }
  }
  store.zero_grad();
  return res;
}

}  // namespace revol::testing
