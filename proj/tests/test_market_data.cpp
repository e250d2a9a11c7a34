#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "revol/errors.hpp"
#include "revol/eval.hpp"
#include "revol/kv_config.hpp"
#include "revol/market_data.hpp"
#include "test_util.hpp"

using namespace revol;

namespace {

std::vector<double> log_close_returns(const BarSeries& bars) {
  std::vector<double> r;
  for (std::size_t i = 1; i < bars.size(); ++i) r.push_back(std::log(bars[i].close / bars[i - 1].close));
  return r;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stdev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

double lag1_autocorr(const std::vector<double>& v) {
  const double m = mean(v);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    den += (v[i] - m) * (v[i] - m);
    if (i > 0) num += (v[i] - m) * (v[i - 1] - m);
  }
  return num / den;
}

SyntheticSpec one_regime(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  SyntheticSpec s;
  s.regimes = {{n, mu, sigma}};
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("Date parsing and calendar") {
  const auto d = Date::parse("2020-01-02");
  REQUIRE(d);
  CHECK(d->to_string() == "2020-01-02");
  CHECK(d->weekday() == 3);
  CHECK_FALSE(Date::parse("2020-02-30"));
  CHECK_FALSE(Date::parse("2020-1-2"));
  const auto days = business_days(Date::from_ymd(2021, 1, 1), 5);  // a Friday
  CHECK(days[1].to_string() == "2021-01-04");
  for (const auto& day : days) CHECK(day.weekday() < 5);
}

TEST_CASE("csv row maps directly onto a bar") {
  const auto bars = parse_csv("date,open,high,low,close\n2020-01-02,100,103,99,102\n");
  REQUIRE(bars.size() == 1);
  CHECK(bars[0].date.to_string() == "2020-01-02");
  CHECK(bars[0].open == 100.0);
  CHECK(bars[0].high == 103.0);
  CHECK(bars[0].low == 99.0);
  CHECK(bars[0].close == 102.0);
}

TEST_CASE("csv rows are sorted by date") {
  const auto bars = parse_csv("date,open,high,low,close\n2020-01-03,1,1,1,1\n2020-01-02,2,2,2,2\n");
  CHECK(bars[0].date < bars[1].date);
  CHECK(bars[0].close == 2.0);
}

TEST_CASE("csv validation errors") {
  CHECK_THROWS_AS(parse_csv("date,open,high,low,close\n2020-01-02,100,98,97,102\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("date,open,high,low,close\n2020-01-02,100,103,99,102\n2020-01-02,100,103,99,102\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_csv("date,open,high,low,close\n2020-01-02,0,1,0,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("date,open,close\n"), ParseError);
  try {
    parse_csv("date,open,high,low,close\n2020-01-02,100,103,99,102\n2020-01-03,100,x,99,102\n", "f.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("csv write/read round trip is exact") {
  std::mt19937_64 rng(3);
  const auto bars = testing::random_series(50, rng);
  const auto path = std::filesystem::temp_directory_path() / "revol_md_roundtrip.csv";
  write_csv(path, *bars);
  const auto back = load_csv(path);
  REQUIRE(back.size() == bars->size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].date == (*bars)[i].date);
    CHECK(back[i].close == (*bars)[i].close);
    CHECK(back[i].low == (*bars)[i].low);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_csv(path), LoadError);
}

TEST_CASE("make_windows counts") {
  std::mt19937_64 rng(1);
  SUBCASE("10 bars, w=8 -> 1 targeted + 1 inference-only") {
    const auto s = make_windows(testing::random_series(10, rng), "A", 8);
    REQUIRE(s.size() == 2);
    CHECK(s[0].has_target());
    CHECK_FALSE(s[1].has_target());
    CHECK_THROWS_AS(s[1].target_close(), StateError);
    CHECK(s[0].bars().size() == 9);
  }
  SUBCASE("w+2 bars -> exactly one targeted sample") {
    const auto s = make_windows(testing::random_series(10, rng), "A", 8);
    CHECK(std::count_if(s.begin(), s.end(), [](const WindowSample& x) { return x.has_target(); }) == 1);
  }
  SUBCASE("too few bars") { CHECK_THROWS_AS(make_windows(testing::random_series(5, rng), "A", 8), SizingError); }
  SUBCASE("n - w - 1 targeted samples for any n") {
    for (std::size_t n = 10; n < 60; n += 7) {
      for (std::size_t w : {2u, 5u, 8u}) {
        const auto s = make_windows(testing::random_series(n, rng), "A", w);
        const auto targeted =
            std::count_if(s.begin(), s.end(), [](const WindowSample& x) { return x.has_target(); });
        CHECK(static_cast<std::size_t>(targeted) == n - w - 1);
        CHECK(s.size() == n - w);
      }
    }
  }
}

TEST_CASE("split date counts") {
  auto c = split_date_counts(100, {});
  CHECK(c.train == 70);
  CHECK(c.validation == 10);
  CHECK(c.test == 20);
  c = split_date_counts(10, {});
  CHECK(c.train == 7);
  CHECK(c.validation == 1);
  CHECK(c.test == 2);
  CHECK_THROWS_AS(split_date_counts(100, {0.5, 0.5, 0.0}), ConfigError);
}

TEST_CASE("chronological split partitions target dates") {
  std::mt19937_64 rng(5);
  // 100 target dates with w=2
  const auto samples = make_windows(testing::random_series(103, rng), "A", 2);
  const auto split = chronological_split(samples);
  std::set<Date> train_dates;
  for (const auto& s : split.train) train_dates.insert(s.target_date());
  CHECK(train_dates.size() == 70);
  // straddling windows (first bar before the split start) are dropped
  for (const auto& s : split.validation) CHECK(s.first_date() >= split.validation_start);
  for (const auto& s : split.test) CHECK(s.first_date() >= split.test_start);
  CHECK(split.validation.size() == 10 - 3);
  CHECK(split.test.size() == 20 - 3);
  CHECK_THROWS_AS(chronological_split(samples, {0.5, 0.5, 0.0}), ConfigError);
}

TEST_CASE("property: split dates are ordered for random inputs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WindowSample> all;
    const std::size_t w = 2 + rng() % 6;
    for (int k = 0; k < 3; ++k) {
      const std::size_t n = 80 + rng() % 60;
      auto s = make_windows(testing::random_series(n, rng), "S" + std::to_string(k), w);
      all.insert(all.end(), s.begin(), s.end());
    }
    const auto split = chronological_split(all);
    Date max_train{std::numeric_limits<std::int32_t>::min()}, min_val{std::numeric_limits<std::int32_t>::max()},
        max_val{std::numeric_limits<std::int32_t>::min()}, min_test{std::numeric_limits<std::int32_t>::max()};
    for (const auto& s : split.train) max_train = std::max(max_train, s.target_date());
    for (const auto& s : split.validation) {
      min_val = std::min(min_val, s.target_date());
      max_val = std::max(max_val, s.target_date());
    }
    for (const auto& s : split.test) min_test = std::min(min_test, s.target_date());
    CHECK(max_train < min_val);
    CHECK(max_val < min_test);
  }
}

TEST_CASE("split fingerprint reacts to content") {
  std::mt19937_64 rng(2);
  const auto samples = make_windows(testing::random_series(120, rng), "A", 4);
  const auto a = chronological_split(samples);
  const auto b = chronological_split(samples);
  CHECK(split_fingerprint(a) == split_fingerprint(b));
  const auto c = chronological_split(samples, {0.6, 0.2, 0.2});
  CHECK(split_fingerprint(a) != split_fingerprint(c));
}

TEST_CASE("synthetic: no dependence when rho = 0") {
  const auto bars = generate_synthetic(one_regime(5000, 0.0, 0.01, 17));
  const auto r = log_close_returns(bars);
  CHECK(std::abs(lag1_autocorr(r)) < 0.05);
}

TEST_CASE("synthetic: rho shows up as lag-1 autocorrelation") {
  auto spec = one_regime(5000, 0.0, 0.01, 19);
  spec.ar_coefficient = 0.3;
  const auto r = log_close_returns(generate_synthetic(spec));
  CHECK(lag1_autocorr(r) == doctest::Approx(0.3).epsilon(0.2));
}

TEST_CASE("synthetic: volatility and drift") {
  const auto r = log_close_returns(generate_synthetic(one_regime(5000, 0.0, 0.01, 23)));
  CHECK(stdev(r) == doctest::Approx(0.01).epsilon(0.05));
  // mean log return is mu - sigma^2/2
  const auto r2 = log_close_returns(generate_synthetic(one_regime(5000, 0.001, 0.01, 29)));
  CHECK(std::abs(mean(r2) - (0.001 - 0.5e-4)) < 4.0 * 0.01 / std::sqrt(5000.0));
}

TEST_CASE("synthetic: determinism per seed") {
  auto spec = one_regime(300, 0.0005, 0.02, 31);
  spec.shock_probability = 0.05;
  spec.shock_scale = 4.0;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].open == b[i].open);
    CHECK(a[i].close == b[i].close);
  }
  spec.seed = 32;
  CHECK(generate_synthetic(spec)[10].close != a[10].close);
}

TEST_CASE("property: generated bars satisfy the bar invariants") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    SyntheticSpec spec;
    const std::size_t regimes = 1 + rng() % 3;
    for (std::size_t k = 0; k < regimes; ++k)
      spec.regimes.push_back({20 + rng() % 200, (u(rng) - 0.5) * 0.004, 0.002 + 0.05 * u(rng)});
    spec.ar_coefficient = 1.8 * u(rng) - 0.9;
    spec.open_fraction = 0.05 + 0.95 * u(rng);
    spec.shock_probability = 0.1 * u(rng);
    spec.shock_scale = 6.0 * u(rng);
    spec.seed = rng();
    const auto bars = generate_synthetic(spec);
    CHECK(bars.size() == spec.total_days());
    CHECK_NOTHROW(validate_series(bars));
  }
}

TEST_CASE("synthetic spec validation") {
  auto spec = one_regime(10, 0.0, 0.01, 1);
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // shorter than w + 2
  spec = one_regime(100, 0.0, 0.0, 1);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = one_regime(100, 0.0, 0.01, 1);
  spec.ar_coefficient = 1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("property: regimes with different volatility are separable by KS") {
  for (double ratio : {1.5, 2.0, 2.5}) {
    SyntheticSpec spec;
    spec.regimes = {{2500, 0.0, 0.01}, {2500, 0.0, 0.01 * ratio}};
    spec.seed = static_cast<std::uint64_t>(ratio * 100);
    const auto r = log_close_returns(generate_synthetic(spec));
    const std::vector<double> a(r.begin(), r.begin() + 2499), b(r.begin() + 2500, r.end());
    CHECK(ks_statistic(a, b) > 0.1);
  }
}

TEST_CASE("universe from config") {
  const auto cfg = KeyValueConfig::parse(
      "symbols=3\nregime_lengths=100,50\nregime_mus=0.001,0\nregime_sigmas=0.01,0.02\nseed=4\nsigma_spread=2\n");
  const auto spec = universe_spec_from_config(cfg);
  CHECK(spec.symbols == 3);
  REQUIRE(spec.base.regimes.size() == 2);
  CHECK(spec.base.regimes[1].sigma == doctest::Approx(0.02));
  const auto u = generate_universe(spec);
  REQUIRE(u.size() == 3);
  CHECK(u[0].symbol == "SYM000");
  CHECK(u[0].bars->size() == 150);
  CHECK(u[0].bars->back().close != u[1].bars->back().close);
  CHECK(u[2].bars->front().date == u[0].bars->front().date);
}
