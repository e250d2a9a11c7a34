#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "revol/market_data.hpp"
#include "revol/nn/graph.hpp"
#include "revol/nn/layers.hpp"
#include "revol/window_batch.hpp"

namespace revol {

/// Estimates below this volatility are rejected rather than clamped.
inline constexpr double kMinSigma = 1e-8;

struct SampleStats {
  /// Per-day log drift, the estimate of mu - sigma^2/2.
  double m_hat = 0.0;
  double sigma_hat = 0.0;
  /// Open fraction in [0, 1]; filled from the per-symbol estimate.
  double r_hat = 0.0;
};

struct AttentionTrace {
  std::vector<double> weights;
  std::vector<double> log_returns;
};

/// ln(S_t^c / S_{t-1}^c) for the w steps of the window.
std::vector<double> log_returns(const WindowSample& sample);

/// Weighted mean and sqrt of the weighted squared deviation (divisor 1 for
/// weights summing to 1). Throws DegenerateError when sigma < kMinSigma.
SampleStats weighted_estimate(std::span<const double> log_returns, std::span<const double> weights);

/// Equal weights 1/w. Throws ArgumentError for w < 2.
SampleStats estimate_arithmetic(const WindowSample& sample);
SampleStats estimate_arithmetic(std::span<const double> log_returns);

/// Graph-side moments of a B x w log-return matrix under B x w weights.
struct StatVars {
  nn::Var m_hat;      // B x 1
  nn::Var sigma_hat;  // B x 1
};
StatVars weighted_moments(nn::Var weights, nn::Var log_close);
/// Constant (non-trainable) arithmetic moments of a batch.
StatVars arithmetic_moments(nn::Graph& g, const WindowBatch& batch);

struct RveConfig {
  std::size_t feature_dim = kChannels;
  std::size_t embed = 32;
  std::size_t hidden = 32;
};

/// Attention-weighted estimator: tanh feature map, LSTM over the window,
/// softmax of h_t . h_T as weights over the window's log returns.
class AttentionEstimator {
 public:
  explicit AttentionEstimator(RveConfig cfg = {}, std::string prefix = "rve");

  void init(nn::ParamStore& store, std::mt19937_64& rng) const;

  struct Output {
    StatVars stats;
    nn::Var weights;  // B x w
  };
  Output forward(nn::Graph& g, nn::ParamStore& store, const WindowBatch& batch) const;

  const RveConfig& config() const { return cfg_; }

 private:
  RveConfig cfg_;
  nn::Linear feature_map_;
  nn::LstmLayer lstm_;
};

std::pair<SampleStats, AttentionTrace> estimate_attention(const WindowSample& sample,
                                                          const AttentionEstimator& estimator,
                                                          nn::ParamStore& store);

struct AttentionNoiseReport {
  /// Pearson correlation between |S_t/S_{t-1} - 1| and alpha_t; 0 when
  /// either side has no spread.
  double correlation = 0.0;
  /// E[alpha | noisy] / E[alpha | normal]; empty when either group is empty.
  std::optional<double> attention_ratio;
  std::size_t noisy_steps = 0;
  std::size_t normal_steps = 0;
};

AttentionNoiseReport attention_noise_from(std::span<const double> abs_returns, std::span<const double> weights,
                                          double noise_threshold = 0.1);

/// Pools every (step, weight) pair over the samples. Degenerate windows are skipped.
AttentionNoiseReport attention_noise_report(std::span<const WindowSample> samples,
                                            const AttentionEstimator& estimator, nn::ParamStore& store,
                                            double noise_threshold = 0.1);

/// `t,alpha,logret` rows.
std::string attention_trace_csv(const AttentionTrace& trace);

}  // namespace revol
