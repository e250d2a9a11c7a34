#include "revol/rve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "revol/errors.hpp"

namespace revol {

std::vector<double> log_returns(const WindowSample& sample) {
  const auto bars = sample.bars();
  std::vector<double> out;
  out.reserve(bars.size() - 1);
  for (std::size_t t = 1; t < bars.size(); ++t) {
    if (!(bars[t].close > 0.0) || !(bars[t - 1].close > 0.0)) {
      throw NumericDomainError("nonpositive close in window of " + sample.symbol());
    }
    out.push_back(std::log(bars[t].close / bars[t - 1].close));
  }
  return out;
}

SampleStats weighted_estimate(std::span<const double> r, std::span<const double> weights) {
  if (r.size() != weights.size() || r.empty()) throw ArgumentError("weights and returns differ in length");
  double m = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) m += weights[t] * r[t];
  double var = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) var += weights[t] * (r[t] - m) * (r[t] - m);
  const double sigma = std::sqrt(var);
  if (!(sigma >= kMinSigma)) throw DegenerateError("degenerate volatility estimate");
  return {m, sigma, 0.0};
}

SampleStats estimate_arithmetic(std::span<const double> r) {
  if (r.size() < 2) throw ArgumentError("arithmetic estimate needs w >= 2");
  const double n = static_cast<double>(r.size());
  const double m = std::accumulate(r.begin(), r.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r) ss += (v - m) * (v - m);
  const double sigma = std::sqrt(ss / n);
  if (!(sigma >= kMinSigma)) throw DegenerateError("degenerate volatility estimate (constant prices?)");
  return {m, sigma, 0.0};
}

SampleStats estimate_arithmetic(const WindowSample& sample) { return estimate_arithmetic(log_returns(sample)); }

StatVars weighted_moments(nn::Var weights, nn::Var log_close) {
  nn::Graph& g = log_close.graph();
  const std::size_t w = log_close.cols();
  nn::Var m = nn::sum(nn::mul(weights, log_close), 1);
  nn::Var spread = g.constant(nn::Tensor(1, w, 1.0));
  nn::Var dev = nn::sub(log_close, nn::matmul(m, spread));
  nn::Var var = nn::sum(nn::mul(weights, nn::square(dev)), 1);
  for (double v : var.value().values()) {
    if (!(v >= kMinSigma * kMinSigma)) throw DegenerateError("degenerate volatility estimate in batch");
  }
  return {m, nn::sqrt(var)};
}

StatVars arithmetic_moments(nn::Graph& g, const WindowBatch& batch) {
  const std::size_t w = batch.window;
  if (w < 2) throw ArgumentError("arithmetic estimate needs w >= 2");
  nn::Var weights = g.constant(nn::Tensor(batch.size, w, 1.0 / static_cast<double>(w)));
  return weighted_moments(weights, g.constant(batch.log_close));
}

AttentionEstimator::AttentionEstimator(RveConfig cfg, std::string prefix)
    : cfg_(cfg),
      feature_map_{prefix + ".feature", cfg.feature_dim, cfg.embed},
      lstm_{prefix + ".lstm", cfg.embed, cfg.hidden} {}

void AttentionEstimator::init(nn::ParamStore& store, std::mt19937_64& rng) const {
  feature_map_.init(store, rng);
  lstm_.init(store, rng);
}

AttentionEstimator::Output AttentionEstimator::forward(nn::Graph& g, nn::ParamStore& store,
                                                       const WindowBatch& batch) const {
  const std::size_t w = batch.window;
  const std::size_t B = batch.size;
  nn::Var features = g.constant(batch.ratio_features);
  const nn::LstmWeights lw = lstm_.bind(g, store);

  nn::Var h = g.constant(nn::Tensor(B, cfg_.hidden));
  nn::Var c = h;
  std::vector<nn::Var> hidden;
  hidden.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    nn::Var x = nn::slice(features, 1, kChannels * t, kChannels * (t + 1));
    nn::Var mapped = nn::tanh(feature_map_.forward(g, store, x));
    std::tie(h, c) = nn::lstm_cell(mapped, h, c, lw);
    hidden.push_back(h);
  }
  std::vector<nn::Var> scores;
  scores.reserve(w);
  for (const nn::Var& ht : hidden) scores.push_back(nn::sum(nn::mul(ht, hidden.back()), 1));
  nn::Var alpha = nn::softmax(nn::concat(scores, 1), 1);
  return {weighted_moments(alpha, g.constant(batch.log_close)), alpha};
}

std::pair<SampleStats, AttentionTrace> estimate_attention(const WindowSample& sample,
                                                          const AttentionEstimator& estimator,
                                                          nn::ParamStore& store) {
  const WindowSample* ptr = &sample;
  const auto batch = make_batch(std::span<const WindowSample* const>(&ptr, 1), {{sample.symbol(), 0.0}}, false);
  nn::Graph g(false);
  const auto out = estimator.forward(g, store, batch);
  AttentionTrace trace;
  const auto& a = out.weights.value().values();
  trace.weights.assign(a.begin(), a.end());
  const auto& r = batch.log_close.values();
  trace.log_returns.assign(r.begin(), r.end());
  const SampleStats stats{out.stats.m_hat.value().item(), out.stats.sigma_hat.value().item(), 0.0};
  return {stats, std::move(trace)};
}

AttentionNoiseReport attention_noise_from(std::span<const double> abs_returns, std::span<const double> weights,
                                          double noise_threshold) {
  if (abs_returns.size() != weights.size()) throw ArgumentError("attention report inputs differ in length");
  AttentionNoiseReport rep;
  const std::size_t n = abs_returns.size();
  if (n == 0) return rep;

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += abs_returns[i];
    my += weights[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = abs_returns[i] - mx, dy = weights[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // a spread at rounding level of the mean counts as constant
  auto has_spread = [n](double ss, double mean) {
    return std::sqrt(ss / static_cast<double>(n)) > 1e-12 * std::max(std::abs(mean), 1e-300);
  };
  if (has_spread(sxx, mx) && has_spread(syy, my)) rep.correlation = sxy / std::sqrt(sxx * syy);

  double noisy = 0.0, normal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (abs_returns[i] >= noise_threshold) {
      noisy += weights[i];
      ++rep.noisy_steps;
    } else {
      normal += weights[i];
      ++rep.normal_steps;
    }
  }
  if (rep.noisy_steps > 0 && rep.normal_steps > 0) {
    rep.attention_ratio = (noisy / rep.noisy_steps) / (normal / rep.normal_steps);
  }
  return rep;
}

AttentionNoiseReport attention_noise_report(std::span<const WindowSample> samples,
                                            const AttentionEstimator& estimator, nn::ParamStore& store,
                                            double noise_threshold) {
  std::vector<double> abs_ret, alphas;
  constexpr std::size_t kChunk = 512;
  std::vector<const WindowSample*> chunk;
  RHatTable zeros;
  auto flush = [&]() {
    if (chunk.empty()) return;
    const auto batch = make_batch(chunk, zeros, false);
    nn::Graph g(false);
    const auto out = estimator.forward(g, store, batch);
    const nn::Tensor& a = out.weights.value();
    for (std::size_t i = 0; i < batch.size; ++i)
      for (std::size_t t = 0; t < batch.window; ++t) {
        abs_ret.push_back(std::abs(batch.ratio_features(i, kChannels * t + 3)));
        alphas.push_back(a(i, t));
      }
    chunk.clear();
  };
  for (const auto& s : samples) {
    try {
      estimate_arithmetic(s);
    } catch (const DegenerateError&) {
      continue;
    }
    zeros.emplace(s.symbol(), 0.0);
    chunk.push_back(&s);
    if (chunk.size() == kChunk) flush();
  }
  flush();
  return attention_noise_from(abs_ret, alphas, noise_threshold);
}

std::string attention_trace_csv(const AttentionTrace& trace) {
  std::string out = "t,alpha,logret\n";
  char buf[96];
  for (std::size_t t = 0; t < trace.weights.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", t, trace.weights[t], trace.log_returns[t]);
    out += buf;
  }
  return out;
}

}  // namespace revol
