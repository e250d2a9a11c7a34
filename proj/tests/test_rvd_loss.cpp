#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "revol/backbone.hpp"
#include "revol/errors.hpp"
#include "revol/rvd_loss.hpp"
#include "revol/rvn.hpp"
#include "test_util.hpp"

using namespace revol;

TEST_CASE("denormalize") {
  const SampleStats st{0.001, 0.02, 0.3};
  CHECK(denormalize(0.0, st, 100.0) == doctest::Approx(100.0 * std::exp(0.001)).epsilon(1e-15));
  CHECK(denormalize(0.94013, st, 100.0) == doctest::Approx(102.0).epsilon(1e-5));
  CHECK_THROWS_AS(denormalize(0.1, SampleStats{0.001, 0.0, 0.3}, 100.0), ArgumentError);
}

TEST_CASE("property: denormalize inverts the close error term") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto bars = testing::random_series(10, rng);
    const WindowSample s("X", bars, 0, 8);
    const auto st = estimate_arithmetic(s);
    const auto eps = normalize_close(s, st);
    const double prev = (*bars)[7].close;
    const double back = denormalize(eps.back(), st, prev);
    CHECK(std::abs(back / (*bars)[8].close - 1.0) < 1e-12);
  }
}

TEST_CASE("composite loss, scalar form") {
  const std::vector<LossTerm> one{{1.01, 1.02, 0.005}};
  CHECK(composite_loss(one, 0.25) == doctest::Approx(1.0625e-4).epsilon(1e-10));
  CHECK(composite_loss(one, 0.0) == doctest::Approx(1e-4).epsilon(1e-10));
  const std::vector<LossTerm> perfect{{1.03, 1.03, 0.0}, {0.98, 0.98, 0.0}};
  CHECK(composite_loss(perfect, 1.0) == 0.0);
  CHECK_THROWS_AS(composite_loss(std::span<const LossTerm>{}, 0.25), ArgumentError);
  CHECK_THROWS_AS(composite_loss(one, -0.1), ArgumentError);
}

TEST_CASE("property: derivative in beta is the mean squared guidance gap") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 0.01);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LossTerm> terms(1 + rng() % 10);
    double gap2 = 0.0;
    for (auto& t : terms) {
      t = {1.0 + z(rng), 1.0 + z(rng), z(rng)};
      gap2 += t.guidance_gap * t.guidance_gap;
    }
    gap2 /= static_cast<double>(terms.size());
    const double beta = 0.5, h = 1e-3;
    const double fd = (composite_loss(terms, beta + h) - composite_loss(terms, beta - h)) / (2 * h);
    CHECK(fd == doctest::Approx(gap2).epsilon(1e-8));
    CHECK(composite_loss(terms, beta) >= 0.0);
  }
}

TEST_CASE("graph loss matches the scalar form and stops gradient at the arithmetic mean") {
  nn::Graph g;
  nn::ParamStore store;
  store.add("m", nn::Tensor(2, 1, {0.002, -0.001}));
  auto m = g.parameter(store, "m");
  auto pred = g.constant(nn::Tensor(2, 1, {1.01, 0.99}));
  auto actual = g.constant(nn::Tensor(2, 1, {1.02, 0.97}));
  auto mean = g.constant(nn::Tensor(2, 1, {0.007, 0.0}));
  auto loss = composite_loss(pred, actual, mean, m, 0.5);
  const std::vector<LossTerm> terms{{1.01, 1.02, 0.005}, {0.99, 0.97, 0.001}};
  CHECK(loss.value().item() == doctest::Approx(composite_loss(terms, 0.5)).epsilon(1e-14));
  g.backward(loss);
  // d/dm of 0.5 * mean((a - m)^2) = -(a - m) / 2 per row
  CHECK(store.at("m").grad(0, 0) == doctest::Approx(-0.005 / 2.0));
  CHECK(store.at("m").grad(1, 0) == doctest::Approx(-0.001 / 2.0));
}

TEST_CASE("full chain gradient matches finite differences") {
  std::mt19937_64 rng(3);
  nn::ParamStore store;
  const AttentionEstimator rve(RveConfig{kChannels, 5, 4});
  BackboneConfig bc;
  bc.hidden_size = 5;
  bc.window = 6;
  const Backbone bb(bc);
  rve.init(store, rng);
  bb.init(store, rng);
  std::normal_distribution<double> z(0.0, 0.3);
  for (auto& v : store.at("backbone.head.w").value.values()) v = z(rng);

  std::vector<WindowSample> samples;
  RHatTable r_hats;
  for (int k = 0; k < 4; ++k) {
    const std::string sym = "S" + std::to_string(k);
    samples.emplace_back(sym, testing::random_series(9, rng), 0, 6);
    r_hats[sym] = 0.3;
  }
  std::vector<const WindowSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  const auto batch = make_batch(ptrs, r_hats, true);

  const auto res = testing::check_gradients(store, [&](nn::Graph& g) {
    const auto out = rve.forward(g, store, batch);
    const auto eps = normalize_batch(batch, out.stats);
    const auto eps_hat = bb.forward(g, store, eps);
    const auto ratio = denormalize_ratio(out.stats.m_hat, out.stats.sigma_hat, eps_hat);
    return nn::scale(composite_loss(ratio, g.constant(batch.target_ratio), g.constant(batch.arithmetic_mean),
                                    out.stats.m_hat, 0.5),
                     1e4);
  }, 1e-3, 1e-6, true);
  CHECK(res.checked > 100);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("prediction csv round trip") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PredictionRecord> recs(2);
  recs[0].symbol = "AAA";
  recs[0].date = Date::from_ymd(2022, 5, 3);
  recs[0].predicted_ratio = 1.0123456789012345;
  recs[0].actual_ratio = 0.98;
  recs[1].symbol = "BBB";
  recs[1].date = Date::from_ymd(2022, 5, 4);
  recs[1].predicted_ratio = 0.995;
  recs[1].actual_ratio = nan;
  std::stringstream ss;
  write_predictions_csv(ss, recs);
  CHECK(ss.str().rfind("date,symbol,pred_return,actual_return\n", 0) == 0);
  const auto back = read_predictions_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].symbol == "AAA");
  CHECK(back[0].date == recs[0].date);
  CHECK(back[0].predicted_ratio == recs[0].predicted_ratio);
  CHECK(back[0].actual_ratio == 0.98);
  CHECK(back[0].has_actual());
  CHECK_FALSE(back[1].has_actual());

  std::istringstream bad("date,symbol,pred_return,actual_return\n2022-05-03,AAA,-1,1\n");
  CHECK_THROWS_AS(read_predictions_csv(bad), ParseError);
}
