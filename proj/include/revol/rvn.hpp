#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "revol/market_data.hpp"
#include "revol/nn/graph.hpp"
#include "revol/rve.hpp"
#include "revol/window_batch.hpp"

namespace revol {

struct ErrorTermWindow {
  std::vector<double> eps_open;
  std::vector<double> eps_high;
  std::vector<double> eps_low;
  std::vector<double> eps_close;
};

struct RHatEstimate {
  /// Clamped into [0, 1].
  double r_hat = 0.0;
  double raw = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
};

/// Least-squares open fraction: E[lc * lo] / E[lc^2] with
/// lc = ln(S_t^c / S_{t-1}^c), lo = ln(S_t^o / S_{t-1}^c), averaged over
/// consecutive bar pairs. Throws DegenerateError when every close equals the
/// previous one.
RHatEstimate estimate_r(std::span<const OhlcBar> bars);

/// (ln(S_t^c/S_{t-1}^c) - m) / sigma
std::vector<double> normalize_close(const WindowSample& sample, const SampleStats& stats);
/// (ln(S_t^o/S_{t-1}^c) - m * r) / sigma, unscaled by 1/sqrt(r).
std::vector<double> normalize_open(const WindowSample& sample, const SampleStats& stats);
/// ln(S_t^h/S_{t-1}^c) / sigma and ln(S_t^l/S_{t-1}^c) / sigma; no drift term.
std::pair<std::vector<double>, std::vector<double>> normalize_extrema(const WindowSample& sample,
                                                                      const SampleStats& stats);
ErrorTermWindow normalize_window(const WindowSample& sample, const SampleStats& stats);

/// eps_open / sqrt(r_hat): the standard-normal form of the open error term.
/// Diagnostic only; the pipeline feeds the unscaled values.
std::vector<double> standardized_open(const ErrorTermWindow& window, double r_hat);

/// Graph-side normalization of a whole batch: B x 4w error terms in the
/// WindowBatch channel layout, differentiable in m_hat and sigma_hat.
nn::Var normalize_batch(const WindowBatch& batch, const StatVars& stats);

/// Monte-Carlo share of draws with |m u / (sigma B_u)| < 1/5 where
/// u ~ Uniform(0, 1] and B_u ~ N(0, u).
double drift_ratio_diagnostic(const SampleStats& stats, std::size_t n_draws, std::uint64_t seed);

/// Ratio features for the w steps, rows x^o, x^h, x^l, x^c.
std::array<std::vector<double>, 4> baseline_ratio_features(const WindowSample& sample);

/// Per-feature standardization over a window with the statistics kept for
/// restoring predictions.
class InstanceNorm {
 public:
  /// Each inner vector is one feature over the window. Throws DegenerateError
  /// on a zero standard deviation and ArgumentError for fewer than 2 steps.
  static std::pair<std::vector<std::vector<double>>, InstanceNorm> apply(
      const std::vector<std::vector<double>>& features);

  double restore(std::size_t feature, double normalized) const;
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& stds() const { return stds_; }

 private:
  std::vector<double> means_;
  std::vector<double> stds_;
};

/// `t,eps_o,eps_h,eps_l,eps_c` rows.
std::string error_terms_csv(const ErrorTermWindow& window);

}  // namespace revol
