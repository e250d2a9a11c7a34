#include <doctest.h>

#include <set>

#include "revol/baselines.hpp"
#include "revol/errors.hpp"

using namespace revol;

namespace {

DatasetSplit split_for(std::uint64_t seed) {
  UniverseSpec u;
  u.symbols = 3;
  u.base.regimes = {{150, 0.0005, 0.015}};
  u.base.ar_coefficient = 0.3;
  u.base.window = 8;
  u.base.seed = seed;
  std::vector<WindowSample> all;
  for (const auto& s : generate_universe(u)) {
    const auto ws = make_windows(s.bars, s.symbol, 8);
    all.insert(all.end(), ws.begin(), ws.end());
  }
  return chronological_split(all);
}

TrainConfig cfg() {
  TrainConfig c;
  c.window = 8;
  c.hidden = 8;
  c.rve_embed = 4;
  c.rve_hidden = 4;
  c.batch_size = 64;
  c.batches_per_epoch = 2;
  c.max_epochs = 2;
  c.seed = 4;
  return c;
}

std::set<std::pair<std::string, std::int64_t>> keys(const std::vector<PredictionRecord>& recs) {
  std::set<std::pair<std::string, std::int64_t>> out;
  for (const auto& r : recs) out.insert({r.symbol, r.date.days()});
  return out;
}

}  // namespace

TEST_CASE("zero-head baseline predicts no move") {
  const auto split = split_for(1);
  auto c = cfg();
  c.mode = Mode::baseline;
  Model b(c);
  b.init(9);
  b.r_hats() = estimate_r_hats(split.train);
  const auto recs = b.predict(split.test);
  CHECK(recs.size() == split.test.size());
  for (const auto& r : recs) {
    CHECK(r.predicted_ratio == 1.0);
    CHECK(r.eps_hat == 0.0);
  }
}

TEST_CASE("baseline training forces the baseline mode") {
  const auto split = split_for(2);
  const auto r = train_baseline(split, cfg());
  CHECK(r.model.config().mode == Mode::baseline);
  CHECK_FALSE(r.model.estimator().has_value());
  CHECK(r.log.size() == 2);
}

TEST_CASE("split fingerprint guards comparisons") {
  const auto a = split_for(3);
  const auto b = split_for(4);
  CHECK_NOTHROW(train_baseline(a, cfg(), split_fingerprint(a)));
  CHECK_THROWS_AS(train_baseline(a, cfg(), split_fingerprint(b)), ArgumentError);
}

TEST_CASE("baseline and full runs are comparable by construction") {
  const auto split = split_for(5);
  auto full_cfg = cfg();
  const auto full = train(split, full_cfg);
  const auto base = train_baseline(split, cfg(), full.split_fingerprint);
  Model fm = full.model, bm = base.model;
  const auto fr = fm.predict(split.test);
  const auto br = bm.predict(split.test);
  CHECK(keys(fr) == keys(br));
  CHECK(full.validation_metric == base.validation_metric);
  CHECK(fm.r_hats() == bm.r_hats());
}
