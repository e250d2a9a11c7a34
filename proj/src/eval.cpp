#include "revol/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "revol/errors.hpp"
#include "revol/rvn.hpp"

namespace revol {
namespace {

constexpr double kTradingDays = 252.0;

std::map<Date, std::vector<const PredictionRecord*>> by_day(std::span<const PredictionRecord> records) {
  std::map<Date, std::vector<const PredictionRecord*>> days;
  for (const auto& r : records)
    if (r.has_actual()) days[r.date].push_back(&r);
  return days;
}

bool has_spread(std::span<const double> v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

CorrelationResult correlate(std::span<const PredictionRecord> records, IcMode mode, bool ranked) {
  auto corr = [ranked](std::vector<double> x, std::vector<double> y) {
    if (ranked) {
      x = average_ranks(x);
      y = average_ranks(y);
    }
    return pearson(x, y);
  };

  CorrelationResult res;
  if (mode == IcMode::pooled) {
    std::vector<double> p, a;
    for (const auto& r : records)
      if (r.has_actual()) {
        p.push_back(r.predicted_ratio);
        a.push_back(r.actual_ratio);
      }
    if (p.size() < 2 || !has_spread(p) || !has_spread(a)) throw MetricUndefinedError("pooled IC undefined");
    res.mean = corr(std::move(p), std::move(a));
    return res;
  }

  double total = 0.0;
  for (const auto& [date, recs] : by_day(records)) {
    std::vector<double> p, a;
    for (const auto* r : recs) {
      p.push_back(r->predicted_ratio);
      a.push_back(r->actual_ratio);
    }
    if (p.size() < 2 || !has_spread(p) || !has_spread(a)) {
      ++res.skipped_days;
      continue;
    }
    const double c = corr(std::move(p), std::move(a));
    res.daily.push_back({date, c, recs.size()});
    total += c;
  }
  if (res.daily.empty()) throw MetricUndefinedError("no day with at least two stocks and spread");
  res.mean = total / static_cast<double>(res.daily.size());
  return res;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("pearson needs two equal-length series (n >= 2)");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw MetricUndefinedError("correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult information_coefficient(std::span<const PredictionRecord> records, IcMode mode) {
  return correlate(records, mode, false);
}

CorrelationResult rank_information_coefficient(std::span<const PredictionRecord> records, IcMode mode) {
  return correlate(records, mode, true);
}

double annualized_sharpe(std::span<const double> r) {
  if (r.size() < 2) throw MetricUndefinedError("Sharpe ratio needs at least 2 portfolio days");
  const double n = static_cast<double>(r.size());
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw MetricUndefinedError("Sharpe ratio undefined: zero variance of daily returns");
  return mean / sd * std::sqrt(kTradingDays);
}

SharpeResult sharpe_ratio(std::span<const PredictionRecord> records, std::size_t top_k) {
  if (top_k == 0) throw ArgumentError("portfolio size must be positive");
  SharpeResult res;
  std::vector<double> rets;
  for (auto& [date, recs] : by_day(records)) {
    std::stable_sort(recs.begin(), recs.end(), [](const PredictionRecord* a, const PredictionRecord* b) {
      if (a->predicted_ratio != b->predicted_ratio) return a->predicted_ratio > b->predicted_ratio;
      return a->symbol < b->symbol;
    });
    const std::size_t held = std::min(top_k, recs.size());
    if (held < top_k) ++res.short_days;
    double ret = 0.0;
    for (std::size_t i = 0; i < held; ++i) ret += recs[i]->actual_ratio - 1.0;
    ret /= static_cast<double>(held);
    res.daily_returns.push_back({date, ret, held});
    rets.push_back(ret);
  }
  res.sr = annualized_sharpe(rets);
  return res;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("KS statistic needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_statistic_normal(std::span<const double> a) {
  if (a.empty()) throw ArgumentError("KS statistic needs a nonempty sample");
  std::vector<double> x(a.begin(), a.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = standard_normal_cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

MetricReport evaluate(std::span<const PredictionRecord> records, IcMode mode) {
  MetricReport rep;
  for (const auto& r : records) rep.records += r.has_actual() ? 1 : 0;
  try {
    auto ic = information_coefficient(records, mode);
    rep.ic = ic.mean;
    rep.daily_ic = std::move(ic.daily);
    rep.skipped_days = ic.skipped_days;
    rep.ic_defined = true;
  } catch (const MetricUndefinedError&) {
  }
  try {
    rep.ric = rank_information_coefficient(records, mode).mean;
    rep.ric_defined = true;
  } catch (const MetricUndefinedError&) {
  }
  try {
    auto sr = sharpe_ratio(records);
    rep.sr = sr.sr;
    rep.portfolio_returns = std::move(sr.daily_returns);
    rep.short_days = sr.short_days;
    rep.sr_defined = true;
  } catch (const MetricUndefinedError&) {
  }
  return rep;
}

std::string summary_text(const MetricReport& rep) {
  char buf[512];
  auto fmt = [](bool ok, double v) {
    char b[32];
    if (ok)
      std::snprintf(b, sizeof b, "%.6f", v);
    else
      std::snprintf(b, sizeof b, "undefined");
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf,
                "records: %zu\nIC:  %s\nRIC: %s\nSR:  %s\nskipped IC days: %zu\nshort portfolio days: %zu\n",
                rep.records, fmt(rep.ic_defined, rep.ic).c_str(), fmt(rep.ric_defined, rep.ric).c_str(),
                fmt(rep.sr_defined, rep.sr).c_str(), rep.skipped_days, rep.short_days);
  return buf;
}

std::string metric_report_csv(const MetricReport& rep) {
  std::string out = "metric,value\n";
  char buf[128];
  auto row = [&](const char* name, bool ok, double v) {
    if (ok)
      std::snprintf(buf, sizeof buf, "%s,%.17g\n", name, v);
    else
      std::snprintf(buf, sizeof buf, "%s,\n", name);
    out += buf;
  };
  row("ic", rep.ic_defined, rep.ic);
  row("ric", rep.ric_defined, rep.ric);
  row("sr", rep.sr_defined, rep.sr);
  out += "\ndate,daily_ic,portfolio_return\n";
  std::map<Date, std::pair<std::string, std::string>> rows;
  for (const auto& d : rep.daily_ic) {
    std::snprintf(buf, sizeof buf, "%.17g", d.value);
    rows[d.date].first = buf;
  }
  for (const auto& d : rep.portfolio_returns) {
    std::snprintf(buf, sizeof buf, "%.17g", d.value);
    rows[d.date].second = buf;
  }
  for (const auto& [date, vals] : rows) out += date.to_string() + "," + vals.first + "," + vals.second + "\n";
  return out;
}

FeaturePools feature_pools(std::span<const WindowSample> samples, const StatsEstimator& estimator) {
  FeaturePools pools;
  for (const auto& s : samples) {
    SampleStats stats;
    try {
      stats = estimator(s);
    } catch (const DegenerateError&) {
      ++pools.skipped;
      continue;
    }
    const auto raw = log_returns(s);
    const auto eps = normalize_close(s, stats);
    const auto features = baseline_ratio_features(s);
    std::vector<double> inorm;
    try {
      inorm = InstanceNorm::apply({features[3]}).first.front();
    } catch (const DegenerateError&) {
      ++pools.skipped;
      continue;
    }
    pools.raw_log_returns.insert(pools.raw_log_returns.end(), raw.begin(), raw.end());
    pools.rvn_close.insert(pools.rvn_close.end(), eps.begin(), eps.end());
    pools.instance_norm_close.insert(pools.instance_norm_close.end(), inorm.begin(), inorm.end());
  }
  return pools;
}

std::vector<ShiftRow> shift_report(const DatasetSplit& split, const StatsEstimator& estimator) {
  const auto train = feature_pools(split.train, estimator);
  const auto test = feature_pools(split.test, estimator);
  std::vector<ShiftRow> rows;
  auto add = [&](const char* name, const std::vector<double>& a, const std::vector<double>& b) {
    ShiftRow r;
    r.feature = name;
    r.n_train = a.size();
    r.n_test = b.size();
    r.low_confidence = a.size() < 100 || b.size() < 100;
    r.ks = ks_statistic(a, b);
    rows.push_back(r);
  };
  add("raw_log_return", train.raw_log_returns, test.raw_log_returns);
  add("instance_norm_close", train.instance_norm_close, test.instance_norm_close);
  add("rvn_eps_close", train.rvn_close, test.rvn_close);
  return rows;
}

std::string shift_report_csv(std::span<const ShiftRow> rows) {
  std::string out = "feature,ks_train_vs_test,n_train,n_test,low_confidence\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%zu,%zu,%d\n", r.feature.c_str(), r.ks, r.n_train, r.n_test,
                  r.low_confidence ? 1 : 0);
    out += buf;
  }
  return out;
}

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw ArgumentError("histogram needs bins > 0 and hi > lo");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / bins);
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto k = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    h.counts[std::min(k, bins - 1)] += 1;
  }
  return h;
}

}  // namespace revol
