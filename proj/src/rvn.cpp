#include "revol/rvn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "revol/errors.hpp"

namespace revol {
namespace {

void require_stats(const SampleStats& stats) {
  if (!(stats.sigma_hat > 0.0) || !std::isfinite(stats.sigma_hat) || !std::isfinite(stats.m_hat)) {
    throw ArgumentError("normalization needs a positive finite sigma_hat");
  }
}

double log_ratio(double num, double den) {
  if (!(num > 0.0) || !(den > 0.0)) throw NumericDomainError("nonpositive price");
  return std::log(num / den);
}

}  // namespace

RHatEstimate estimate_r(std::span<const OhlcBar> bars) {
  if (bars.size() < 2) throw ArgumentError("estimate_r needs at least 2 bars");
  double num = 0.0, den = 0.0;
  const double n = static_cast<double>(bars.size() - 1);
  for (std::size_t t = 1; t < bars.size(); ++t) {
    const double lc = log_ratio(bars[t].close, bars[t - 1].close);
    const double lo = log_ratio(bars[t].open, bars[t - 1].close);
    num += lc * lo;
    den += lc * lc;
  }
  num /= n;
  den /= n;
  if (!(den > 0.0)) throw DegenerateError("estimate_r: all closes equal, denominator is zero");
  RHatEstimate est;
  est.numerator = num;
  est.denominator = den;
  est.raw = num / den;
  est.r_hat = std::clamp(est.raw, 0.0, 1.0);
  return est;
}

std::vector<double> normalize_close(const WindowSample& sample, const SampleStats& stats) {
  require_stats(stats);
  const auto bars = sample.bars();
  std::vector<double> out;
  out.reserve(sample.window());
  for (std::size_t t = 1; t < bars.size(); ++t) {
    out.push_back((log_ratio(bars[t].close, bars[t - 1].close) - stats.m_hat) / stats.sigma_hat);
  }
  return out;
}

std::vector<double> normalize_open(const WindowSample& sample, const SampleStats& stats) {
  require_stats(stats);
  const auto bars = sample.bars();
  std::vector<double> out;
  out.reserve(sample.window());
  for (std::size_t t = 1; t < bars.size(); ++t) {
    out.push_back((log_ratio(bars[t].open, bars[t - 1].close) - stats.m_hat * stats.r_hat) / stats.sigma_hat);
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> normalize_extrema(const WindowSample& sample,
                                                                      const SampleStats& stats) {
  require_stats(stats);
  const auto bars = sample.bars();
  std::vector<double> hi, lo;
  hi.reserve(sample.window());
  lo.reserve(sample.window());
  for (std::size_t t = 1; t < bars.size(); ++t) {
    hi.push_back(log_ratio(bars[t].high, bars[t - 1].close) / stats.sigma_hat);
    lo.push_back(log_ratio(bars[t].low, bars[t - 1].close) / stats.sigma_hat);
  }
  return {std::move(hi), std::move(lo)};
}

ErrorTermWindow normalize_window(const WindowSample& sample, const SampleStats& stats) {
  ErrorTermWindow w;
  w.eps_open = normalize_open(sample, stats);
  std::tie(w.eps_high, w.eps_low) = normalize_extrema(sample, stats);
  w.eps_close = normalize_close(sample, stats);
  return w;
}

std::vector<double> standardized_open(const ErrorTermWindow& window, double r_hat) {
  if (!(r_hat > 0.0)) throw ArgumentError("standardized_open needs r_hat > 0");
  std::vector<double> out(window.eps_open);
  for (double& v : out) v /= std::sqrt(r_hat);
  return out;
}

nn::Var normalize_batch(const WindowBatch& batch, const StatVars& stats) {
  nn::Graph& g = stats.m_hat.graph();
  const std::size_t cols = kChannels * batch.window;
  nn::Var spread = g.constant(nn::Tensor(1, cols, 1.0));
  nn::Var drift = nn::mul(nn::matmul(stats.m_hat, spread), g.constant(batch.drift_mask));
  nn::Var centered = nn::sub(g.constant(batch.log_moves), drift);
  return nn::div(centered, nn::matmul(stats.sigma_hat, spread));
}

double drift_ratio_diagnostic(const SampleStats& stats, std::size_t n_draws, std::uint64_t seed) {
  require_stats(stats);
  if (n_draws < 1000) throw ArgumentError("drift_ratio_diagnostic needs at least 1000 draws");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t below = 0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double u = 1.0 - unit(rng);  // (0, 1]
    const double bu = std::sqrt(u) * normal(rng);
    // |m u| < (1/5) |sigma B_u|, written without dividing by B_u
    if (5.0 * std::abs(stats.m_hat * u) < std::abs(stats.sigma_hat * bu)) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(n_draws);
}

std::array<std::vector<double>, 4> baseline_ratio_features(const WindowSample& sample) {
  const auto bars = sample.bars();
  std::array<std::vector<double>, 4> f;
  for (std::size_t t = 1; t < bars.size(); ++t) {
    const OhlcBar& cur = bars[t];
    if (!(cur.close > 0.0) || !(bars[t - 1].close > 0.0)) throw NumericDomainError("nonpositive close");
    f[0].push_back(cur.open / cur.close - 1.0);
    f[1].push_back(cur.high / cur.close - 1.0);
    f[2].push_back(cur.low / cur.close - 1.0);
    f[3].push_back(cur.close / bars[t - 1].close - 1.0);
  }
  return f;
}

std::pair<std::vector<std::vector<double>>, InstanceNorm> InstanceNorm::apply(
    const std::vector<std::vector<double>>& features) {
  InstanceNorm handle;
  std::vector<std::vector<double>> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    if (f.size() < 2) throw ArgumentError("instance norm needs a window of at least 2");
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double ss = 0.0;
    for (double v : f) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(f.size()));
    if (!(sd > 0.0)) throw DegenerateError("instance norm: feature has zero standard deviation");
    std::vector<double> z(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) z[i] = (f[i] - mean) / sd;
    out.push_back(std::move(z));
    handle.means_.push_back(mean);
    handle.stds_.push_back(sd);
  }
  return {std::move(out), std::move(handle)};
}

double InstanceNorm::restore(std::size_t feature, double normalized) const {
  return means_.at(feature) + stds_.at(feature) * normalized;
}

std::string error_terms_csv(const ErrorTermWindow& w) {
  std::string out = "t,eps_o,eps_h,eps_l,eps_c\n";
  char buf[160];
  for (std::size_t t = 0; t < w.eps_close.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", t, w.eps_open[t], w.eps_high[t], w.eps_low[t],
                  w.eps_close[t]);
    out += buf;
  }
  return out;
}

}  // namespace revol
