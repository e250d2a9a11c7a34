#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "revol/market_data.hpp"
#include "revol/nn/graph.hpp"
#include "revol/rve.hpp"

namespace revol {

struct PredictionRecord {
  std::string symbol;
  Date date;  // target day T+1
  /// Predicted S_{T+1}^c / S_T^c.
  double predicted_ratio = 1.0;
  /// Realized S_{T+1}^c / S_T^c; NaN when unknown.
  double actual_ratio = 0.0;
  double eps_hat = 0.0;
  SampleStats stats;

  bool has_actual() const;
};

/// S_T^c * exp(m + sigma * eps_hat)
double denormalize(double eps_hat, const SampleStats& stats, double last_close);

/// exp(m + sigma * eps_hat) as a B x 1 ratio.
nn::Var denormalize_ratio(nn::Var m_hat, nn::Var sigma_hat, nn::Var eps_hat);

struct LossTerm {
  double predicted_ratio = 1.0;
  double actual_ratio = 1.0;
  /// Arithmetic mean of the window's log returns minus m_hat.
  double guidance_gap = 0.0;
};

/// Batch mean of (pred - actual)^2 + beta * gap^2. Throws ArgumentError on an
/// empty batch or beta < 0.
double composite_loss(std::span<const LossTerm> terms, double beta);

/// Graph form. `arithmetic_mean` is data: no gradient flows into it.
nn::Var composite_loss(nn::Var predicted_ratio, nn::Var actual_ratio, nn::Var arithmetic_mean, nn::Var m_hat,
                       double beta);

/// `date,symbol,pred_return,actual_return` where both columns hold price
/// ratios S_{T+1}/S_T (empty actual when unknown).
void write_predictions_csv(std::ostream& out, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions_csv(std::istream& in, const std::string& source = "<predictions>");

}  // namespace revol
