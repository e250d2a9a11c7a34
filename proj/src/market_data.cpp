#include "revol/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "revol/errors.hpp"
#include "revol/kv_config.hpp"

namespace revol {
namespace {

namespace chr = std::chrono;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> to_double(std::string_view text) {
  text = trim(text);
  double out = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
  return out;
}

std::string describe(const OhlcBar& b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "bar %s (o=%g h=%g l=%g c=%g)", b.date.to_string().c_str(), b.open, b.high,
                b.low, b.close);
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr int kIntradaySteps = 20;

}  // namespace

std::optional<Date> Date::parse(std::string_view iso) {
  iso = trim(iso);
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
    return ec == std::errc{} && p == iso.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date(static_cast<std::int32_t>(chr::sys_days(ymd).time_since_epoch().count()));
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  return Date(static_cast<std::int32_t>(chr::sys_days(ymd).time_since_epoch().count()));
}

std::string Date::to_string() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::weekday() const {
  const chr::weekday wd{chr::sys_days{chr::days{days_}}};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

void validate_bar(const OhlcBar& b) {
  if (!(b.open > 0.0 && b.high > 0.0 && b.low > 0.0 && b.close > 0.0) || !std::isfinite(b.open) ||
      !std::isfinite(b.high) || !std::isfinite(b.low) || !std::isfinite(b.close)) {
    throw ValidationError(describe(b) + ": prices must be positive and finite");
  }
  if (b.high < std::max(b.open, b.close)) throw ValidationError(describe(b) + ": high below open/close");
  if (b.low > std::min(b.open, b.close)) throw ValidationError(describe(b) + ": low above open/close");
}

void validate_series(std::span<const OhlcBar> bars) {
  for (std::size_t i = 0; i < bars.size(); ++i) {
    validate_bar(bars[i]);
    if (i > 0 && !(bars[i - 1].date < bars[i].date)) {
      throw ValidationError(describe(bars[i]) + ": dates not strictly increasing");
    }
  }
}

WindowSample::WindowSample(std::string symbol, std::shared_ptr<const BarSeries> series, std::size_t first,
                           std::size_t window)
    : symbol_(std::move(symbol)), series_(std::move(series)), first_(first), window_(window) {
  if (!series_ || first_ + window_ >= series_->size()) throw SizingError("window exceeds series");
}

double WindowSample::target_close() const {
  if (!has_target()) throw StateError("inference-only sample has no target");
  return (*series_)[first_ + window_ + 1].close;
}

Date WindowSample::target_date() const {
  if (!has_target()) throw StateError("inference-only sample has no target");
  return (*series_)[first_ + window_ + 1].date;
}

DateCounts split_date_counts(std::size_t n, const SplitRatios& r) {
  if (!(r.train > 0 && r.validation > 0 && r.test > 0)) {
    throw ConfigError("split ratios must all be positive (an empty split is not allowed)");
  }
  if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  const std::array<double, 3> shares{r.train * n, r.validation * n, r.test * n};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rema{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    // 1e-9 absorbs representation error such as 0.7 * 10 = 6.9999...
    counts[i] = static_cast<std::size_t>(std::floor(shares[i] + 1e-9));
    rema[i] = shares[i] - counts[i];
    used += counts[i];
  }
  while (used < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rema[i] > rema[best] + 1e-12) best = i;
    ++counts[best];
    rema[best] = -1.0;
    ++used;
  }
  if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0) {
    throw ConfigError("split of " + std::to_string(n) + " dates leaves an empty partition");
  }
  return {counts[0], counts[1], counts[2]};
}

BarSeries parse_csv(std::string_view text, const std::string& source) {
  BarSeries bars;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    std::array<std::string_view, 5> fields;
    std::size_t nf = 0;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      if (nf == fields.size()) throw ParseError(source, line_no, "expected 5 fields");
      fields[nf++] = trim(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (nf != 5) throw ParseError(source, line_no, "expected 5 fields");

    if (!header_seen) {
      static constexpr std::array<std::string_view, 5> kHeader{"date", "open", "high", "low", "close"};
      if (fields != kHeader) throw ParseError(source, line_no, "expected header 'date,open,high,low,close'");
      header_seen = true;
      continue;
    }

    auto date = Date::parse(fields[0]);
    if (!date) throw ParseError(source, line_no, "bad date '" + std::string(fields[0]) + "'");
    OhlcBar bar{*date, 0, 0, 0, 0};
    double* slots[4] = {&bar.open, &bar.high, &bar.low, &bar.close};
    for (int k = 0; k < 4; ++k) {
      auto v = to_double(fields[k + 1]);
      if (!v) throw ParseError(source, line_no, "bad price '" + std::string(fields[k + 1]) + "'");
      *slots[k] = *v;
    }
    bars.push_back(bar);
  }
  if (!header_seen) throw ParseError(source, line_no, "missing header");

  std::stable_sort(bars.begin(), bars.end(), [](const OhlcBar& a, const OhlcBar& b) { return a.date < b.date; });
  validate_series(bars);
  return bars;
}

BarSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

void write_csv(const std::filesystem::path& path, std::span<const OhlcBar> bars) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "date,open,high,low,close\n";
  char buf[256];
  for (const auto& b : bars) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", b.date.to_string().c_str(), b.open, b.high,
                  b.low, b.close);
    out << buf;
  }
}

std::vector<WindowSample> make_windows(std::shared_ptr<const BarSeries> bars, const std::string& symbol,
                                       std::size_t window) {
  if (window < 1) throw SizingError("window must be >= 1");
  if (!bars || bars->size() < window + 2) {
    throw SizingError("need at least w+2 = " + std::to_string(window + 2) + " bars, got " +
                      std::to_string(bars ? bars->size() : 0));
  }
  std::vector<WindowSample> out;
  const std::size_t n = bars->size();
  out.reserve(n - window);
  for (std::size_t first = 0; first + window < n; ++first) out.emplace_back(symbol, bars, first, window);
  return out;
}

DatasetSplit chronological_split(std::span<const WindowSample> samples, const SplitRatios& ratios) {
  std::vector<Date> dates;
  dates.reserve(samples.size());
  for (const auto& s : samples)
    if (s.has_target()) dates.push_back(s.target_date());
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  if (dates.empty()) throw ConfigError("no targeted samples to split");

  const auto counts = split_date_counts(dates.size(), ratios);
  DatasetSplit split;
  split.validation_start = dates[counts.train];
  split.test_start = dates[counts.train + counts.validation];

  for (const auto& s : samples) {
    if (!s.has_target()) continue;
    const Date t = s.target_date();
    if (t < split.validation_start) {
      split.train.push_back(s);
    } else if (t < split.test_start) {
      if (s.first_date() >= split.validation_start) split.validation.push_back(s);
    } else if (s.first_date() >= split.test_start) {
      split.test.push_back(s);
    }
  }
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw ConfigError("chronological split left an empty partition (train=" + std::to_string(split.train.size()) +
                      ", validation=" + std::to_string(split.validation.size()) +
                      ", test=" + std::to_string(split.test.size()) + ")");
  }
  return split;
}

std::uint64_t split_fingerprint(const DatasetSplit& split) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    const std::uint64_t count = part->size();
    mix(&count, sizeof count);
    for (const auto& s : *part) {
      mix(s.symbol().data(), s.symbol().size());
      const std::uint64_t first = s.first_index();
      mix(&first, sizeof first);
      const std::int32_t day = s.target_date().days();
      mix(&day, sizeof day);
      const double target = s.target_close();
      mix(&target, sizeof target);
    }
  }
  return h;
}

void SyntheticSpec::validate() const {
  if (regimes.empty()) throw ConfigError("synthetic spec needs at least one regime");
  for (const auto& r : regimes) {
    if (r.length < window + 2) {
      throw ConfigError("regime length " + std::to_string(r.length) + " shorter than w+2 = " +
                        std::to_string(window + 2));
    }
    if (!(r.sigma > 0.0) || !std::isfinite(r.sigma) || !std::isfinite(r.mu)) {
      throw ConfigError("regime volatility must be positive and finite");
    }
  }
  if (!(ar_coefficient > -1.0 && ar_coefficient < 1.0)) throw ConfigError("ar_coefficient must lie in (-1, 1)");
  if (!(open_fraction > 0.0 && open_fraction <= 1.0)) throw ConfigError("open_fraction must lie in (0, 1]");
  if (!(shock_probability >= 0.0 && shock_probability <= 1.0)) {
    throw ConfigError("shock_probability must lie in [0, 1]");
  }
  if (!(shock_scale >= 0.0)) throw ConfigError("shock_scale must be >= 0");
  if (!(start_price > 0.0)) throw ConfigError("start_price must be positive");
}

std::size_t SyntheticSpec::total_days() const {
  std::size_t n = 0;
  for (const auto& r : regimes) n += r.length;
  return n;
}

std::vector<Date> business_days(Date start, std::size_t n) {
  std::vector<Date> out;
  out.reserve(n);
  std::int32_t d = start.days();
  while (out.size() < n) {
    const Date date(d++);
    if (date.weekday() < 5) out.push_back(date);
  }
  return out;
}

BarSeries generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = spec.total_days();
  const auto dates = business_days(spec.start_date, n);
  const double rho = spec.ar_coefficient;
  const double innovation = std::sqrt(1.0 - rho * rho);
  const double r = spec.open_fraction;

  BarSeries bars;
  bars.reserve(n);
  double underlying = std::log(spec.start_price);  // log price without shocks
  double observed_prev = underlying;                // last observed log close
  double eps = normal(rng);                         // stationary start

  std::size_t day = 0;
  for (const auto& regime : spec.regimes) {
    const double sigma = regime.sigma;
    const double drift = regime.mu - 0.5 * sigma * sigma;
    for (std::size_t k = 0; k < regime.length; ++k, ++day) {
      eps = rho * eps + innovation * normal(rng);
      underlying += drift + sigma * eps;
      double observed = underlying;
      if (spec.shock_probability > 0.0 && unit(rng) < spec.shock_probability) {
        const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
        observed += sign * spec.shock_scale * sigma;
      }

      // Intraday path in log space relative to the previous close.
      const double close_move = observed - observed_prev;
      const double open_move = r * close_move + sigma * std::sqrt(r * (1.0 - r)) * normal(rng);
      double hi = std::max(open_move, close_move);
      double lo = std::min(open_move, close_move);
      if (r < 1.0) {
        const double dt = (1.0 - r) / kIntradaySteps;
        double t = r;
        double x = open_move;
        for (int s = 1; s < kIntradaySteps; ++s) {
          const double remaining = 1.0 - t;
          const double mean = x + (close_move - x) * dt / remaining;
          const double var = dt * (remaining - dt) / remaining;
          x = mean + sigma * std::sqrt(var) * normal(rng);
          t += dt;
          hi = std::max(hi, x);
          lo = std::min(lo, x);
        }
      }

      const double base = std::exp(observed_prev);
      OhlcBar bar{dates[day], base * std::exp(open_move), base * std::exp(hi), base * std::exp(lo),
                  std::exp(observed)};
      // exp rounding can break the ordering by an ulp
      bar.high = std::max({bar.high, bar.open, bar.close});
      bar.low = std::min({bar.low, bar.open, bar.close});
      bars.push_back(bar);
      observed_prev = observed;
    }
  }
  return bars;
}

std::vector<SymbolSeries> generate_universe(const UniverseSpec& spec) {
  if (spec.symbols == 0) throw ConfigError("universe needs at least one symbol");
  if (!(spec.sigma_spread >= 1.0)) throw ConfigError("sigma_spread must be >= 1");
  if (!(spec.mu_spread >= 0.0)) throw ConfigError("mu_spread must be >= 0");
  spec.base.validate();

  std::vector<SymbolSeries> out;
  out.reserve(spec.symbols);
  std::mt19937_64 meta(splitmix64(spec.base.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_spread = std::log(spec.sigma_spread);
  for (std::size_t i = 0; i < spec.symbols; ++i) {
    SyntheticSpec s = spec.base;
    s.seed = splitmix64(spec.base.seed * 1000003ULL + i + 1);
    const double scale = std::exp(log_spread * (2.0 * unit(meta) - 1.0));
    const double offset = spec.mu_spread * (2.0 * unit(meta) - 1.0);
    for (auto& reg : s.regimes) {
      reg.sigma *= scale;
      reg.mu += offset;
    }
    char name[16];
    std::snprintf(name, sizeof name, "SYM%03zu", i);
    out.push_back({name, std::make_shared<const BarSeries>(generate_synthetic(s))});
  }
  return out;
}

UniverseSpec universe_spec_from_config(const KeyValueConfig& cfg) {
  UniverseSpec u;
  SyntheticSpec& s = u.base;
  const auto lengths = cfg.get_doubles("regime_lengths");
  const auto mus = cfg.get_doubles("regime_mus");
  const auto sigmas = cfg.get_doubles("regime_sigmas");
  if (lengths.empty()) throw ConfigError("synthetic config needs regime_lengths");
  if (mus.size() != lengths.size() || sigmas.size() != lengths.size()) {
    throw ConfigError("regime_lengths, regime_mus and regime_sigmas must have equal length");
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 0 || lengths[i] != std::floor(lengths[i])) throw ConfigError("regime length must be integral");
    s.regimes.push_back({static_cast<std::size_t>(lengths[i]), mus[i], sigmas[i]});
  }
  s.ar_coefficient = cfg.get_double("ar_coefficient", 0.0);
  s.open_fraction = cfg.get_double("open_fraction", 0.3);
  s.shock_probability = cfg.get_double("shock_probability", 0.0);
  s.shock_scale = cfg.get_double("shock_scale", 0.0);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  s.start_price = cfg.get_double("start_price", 100.0);
  s.window = static_cast<std::size_t>(cfg.get_int("w", 16));
  u.symbols = static_cast<std::size_t>(cfg.get_int("symbols", 1));
  u.sigma_spread = cfg.get_double("sigma_spread", 1.0);
  u.mu_spread = cfg.get_double("mu_spread", 0.0);
  s.validate();
  return u;
}

}  // namespace revol
