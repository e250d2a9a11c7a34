#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace revol {

class KeyValueConfig;

/// Calendar day stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  /// Parses `YYYY-MM-DD`; returns nullopt on malformed or impossible dates.
  static std::optional<Date> parse(std::string_view iso);
  static Date from_ymd(int year, unsigned month, unsigned day);

  constexpr std::int32_t days() const { return days_; }
  std::string to_string() const;
  /// 0 = Monday .. 6 = Sunday
  int weekday() const;

  friend constexpr auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

struct OhlcBar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

/// Throws ValidationError if prices are nonpositive or the extrema do not
/// cover open and close.
void validate_bar(const OhlcBar& bar);

/// Checks every bar plus strictly increasing dates.
void validate_series(std::span<const OhlcBar> bars);

using BarSeries = std::vector<OhlcBar>;

/// w+1 consecutive bars of one symbol (days T-w .. T) plus the close of day
/// T+1 when known. The bars are a view into a shared series.
class WindowSample {
 public:
  WindowSample(std::string symbol, std::shared_ptr<const BarSeries> series, std::size_t first,
               std::size_t window);

  const std::string& symbol() const { return symbol_; }
  std::size_t window() const { return window_; }
  std::span<const OhlcBar> bars() const {
    return {series_->data() + first_, window_ + 1};
  }
  const OhlcBar& last_bar() const { return (*series_)[first_ + window_]; }
  Date first_date() const { return (*series_)[first_].date; }

  bool has_target() const { return first_ + window_ + 1 < series_->size(); }
  /// Throws StateError for inference-only samples.
  double target_close() const;
  Date target_date() const;

  const std::shared_ptr<const BarSeries>& series() const { return series_; }
  std::size_t first_index() const { return first_; }

 private:
  std::string symbol_;
  std::shared_ptr<const BarSeries> series_;
  std::size_t first_;
  std::size_t window_;
};

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
  /// First target date of validation and of test.
  Date validation_start;
  Date test_start;
};

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct DateCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Partition of `n` distinct dates: floor of each share, leftover dates handed
/// out by largest fractional remainder (ties to the earlier split).
DateCounts split_date_counts(std::size_t n, const SplitRatios& ratios);

/// Parses a `date,open,high,low,close` file. Rows are sorted by date before
/// the series is validated.
BarSeries load_csv(const std::filesystem::path& path);
BarSeries parse_csv(std::string_view text, const std::string& source = "<csv>");
void write_csv(const std::filesystem::path& path, std::span<const OhlcBar> bars);

/// Stride-1 sliding windows. Yields n-w-1 targeted samples followed by one
/// inference-only sample.
std::vector<WindowSample> make_windows(std::shared_ptr<const BarSeries> bars, const std::string& symbol,
                                       std::size_t window);

/// Chronological split on distinct target dates shared by all symbols.
/// Validation/test samples whose bars start before their split's first date
/// are dropped; inference-only samples are ignored.
DatasetSplit chronological_split(std::span<const WindowSample> samples, const SplitRatios& ratios = {});

/// FNV-1a digest over (symbol, first index, target date) of every sample in
/// split order.
std::uint64_t split_fingerprint(const DatasetSplit& split);

struct Regime {
  std::size_t length = 0;
  double mu = 0.0;
  double sigma = 0.01;
};

struct SyntheticSpec {
  std::vector<Regime> regimes;
  double ar_coefficient = 0.0;
  double open_fraction = 0.3;
  double shock_probability = 0.0;
  /// Shock size in units of the regime's sigma.
  double shock_scale = 0.0;
  std::uint64_t seed = 0;
  double start_price = 100.0;
  /// Only used to validate regime lengths (>= window + 2).
  std::size_t window = 16;
  Date start_date = Date::from_ymd(2000, 1, 3);

  void validate() const;
  std::size_t total_days() const;
};

/// GBM closes with AR(1) error terms, opens on a Brownian bridge at
/// `open_fraction`, extrema from a 20-step intraday bridge from open to close.
/// Shocks displace a single close and revert on the next day.
BarSeries generate_synthetic(const SyntheticSpec& spec);

/// Business-day calendar (Mon-Fri) of `n` days starting at `start`.
std::vector<Date> business_days(Date start, std::size_t n);

struct UniverseSpec {
  std::size_t symbols = 1;
  SyntheticSpec base;
  /// Each symbol's sigmas are multiplied by a factor log-uniform in
  /// [1/sigma_spread, sigma_spread].
  double sigma_spread = 1.0;
  /// Each symbol's drifts get an additive offset uniform in [-mu_spread, mu_spread].
  double mu_spread = 0.0;
};

struct SymbolSeries {
  std::string symbol;
  std::shared_ptr<const BarSeries> bars;
};

std::vector<SymbolSeries> generate_universe(const UniverseSpec& spec);

/// Reads a synthetic spec from `key=value` configuration:
/// regime_lengths, regime_mus, regime_sigmas (comma lists), ar_coefficient,
/// open_fraction, shock_probability, shock_scale, seed, start_price, w,
/// symbols, sigma_spread, mu_spread.
UniverseSpec universe_spec_from_config(const KeyValueConfig& cfg);

}  // namespace revol
