#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "revol/market_data.hpp"
#include "revol/rvd_loss.hpp"
#include "revol/rve.hpp"

namespace revol {

struct DailyValue {
  Date date;
  double value = 0.0;
  std::size_t stocks = 0;
};

struct CorrelationResult {
  double mean = 0.0;
  std::vector<DailyValue> daily;
  /// Days with fewer than two stocks or no cross-sectional spread.
  std::size_t skipped_days = 0;
};

enum class IcMode { daily, pooled };

/// Pearson correlation of predicted vs. realized ratios, per day then averaged
/// (or over all records at once in pooled mode). Records without a realized
/// value are ignored. Throws MetricUndefinedError when no day qualifies.
CorrelationResult information_coefficient(std::span<const PredictionRecord> records, IcMode mode = IcMode::daily);
/// Same with Spearman (average ranks for ties).
CorrelationResult rank_information_coefficient(std::span<const PredictionRecord> records,
                                               IcMode mode = IcMode::daily);

double pearson(std::span<const double> x, std::span<const double> y);
/// 1-based ranks, ties share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

struct SharpeResult {
  double sr = 0.0;
  std::vector<DailyValue> daily_returns;
  /// Days with fewer stocks than the portfolio size (all held equal-weight).
  std::size_t short_days = 0;
};

/// Daily rebalanced long portfolio: weight 1/top_k on the top_k predicted
/// ratios (ties by symbol), simple returns, mean / sample std * sqrt(252).
SharpeResult sharpe_ratio(std::span<const PredictionRecord> records, std::size_t top_k = 5);
/// Throws MetricUndefinedError for < 2 returns or zero spread.
double annualized_sharpe(std::span<const double> daily_returns);

/// Two-sample Kolmogorov-Smirnov statistic. Throws ArgumentError on empty input.
double ks_statistic(std::span<const double> a, std::span<const double> b);
/// One-sample statistic against the standard normal CDF.
double ks_statistic_normal(std::span<const double> a);
double standard_normal_cdf(double x);

struct MetricReport {
  double ic = 0.0;
  double ric = 0.0;
  double sr = 0.0;
  bool ic_defined = false;
  bool ric_defined = false;
  bool sr_defined = false;
  std::vector<DailyValue> daily_ic;
  std::vector<DailyValue> portfolio_returns;
  std::size_t records = 0;
  std::size_t skipped_days = 0;
  std::size_t short_days = 0;
};

/// Every metric that is defined on the records; undefined ones are flagged.
MetricReport evaluate(std::span<const PredictionRecord> records, IcMode mode = IcMode::daily);
std::string summary_text(const MetricReport& report);
/// `metric,value` rows followed by `date,daily_ic,portfolio_return` rows.
std::string metric_report_csv(const MetricReport& report);

struct ShiftRow {
  std::string feature;
  double ks = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  bool low_confidence = false;
};

using StatsEstimator = std::function<SampleStats(const WindowSample&)>;

/// Pools of one feature over every step of every window.
struct FeaturePools {
  std::vector<double> raw_log_returns;
  std::vector<double> instance_norm_close;
  std::vector<double> rvn_close;
  std::size_t skipped = 0;
};

FeaturePools feature_pools(std::span<const WindowSample> samples, const StatsEstimator& estimator);

/// KS(train, test) for raw log returns, per-window instance-normalized close
/// ratio, and RVN close error terms. Rows with fewer than 100 values on a side
/// are flagged low-confidence.
std::vector<ShiftRow> shift_report(const DatasetSplit& split, const StatsEstimator& estimator);
std::string shift_report_csv(std::span<const ShiftRow> rows);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};
Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

}  // namespace revol
