#include "revol/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "revol/errors.hpp"
#include "revol/eval.hpp"
#include "revol/rvn.hpp"

namespace revol {
namespace {

constexpr std::size_t kInferenceChunk = 512;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BackboneConfig backbone_config(const TrainConfig& cfg) {
  BackboneConfig b;
  b.kind = cfg.backbone;
  b.hidden_size = cfg.hidden;
  b.num_layers = cfg.layers;
  b.window = cfg.window;
  return b;
}

Date next_weekday(Date d) {
  do d = Date(d.days() + 1);
  while (d.weekday() >= 5);
  return d;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "full") return Mode::full;
  if (name == "no_rvn") return Mode::no_rvn;
  if (name == "no_rve") return Mode::no_rve;
  if (name == "no_rvd") return Mode::no_rvd;
  if (name == "baseline") return Mode::baseline;
  throw ConfigError("unknown mode '" + name + "' (expected full, no_rvn, no_rve, no_rvd or baseline)");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::full: return "full";
    case Mode::no_rvn: return "no_rvn";
    case Mode::no_rve: return "no_rve";
    case Mode::no_rvd: return "no_rvd";
    case Mode::baseline: return "baseline";
  }
  return "full";
}

void TrainConfig::validate() const {
  if (window < 2) throw ConfigError("w must be at least 2");
  if (hidden == 0 || layers == 0 || rve_embed == 0 || rve_hidden == 0) throw ConfigError("layer sizes must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (batch_size == 0 || max_epochs == 0) throw ConfigError("batch_size and max_epochs must be positive");
}

TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig d) {
  auto size = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string("'") + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };
  d.mode = parse_mode(kv.get_string("mode", to_string(d.mode)));
  d.window = size("w", d.window);
  d.backbone = parse_backbone_kind(kv.get_string("backbone", to_string(d.backbone)));
  d.hidden = size("hidden", d.hidden);
  d.layers = size("layers", d.layers);
  d.rve_embed = size("rve_embed", d.rve_embed);
  d.rve_hidden = size("rve_hidden", d.rve_hidden);
  d.lr = kv.get_double("lr", d.lr);
  d.weight_decay = kv.get_double("weight_decay", d.weight_decay);
  d.beta = kv.get_double("beta", d.beta);
  d.batch_size = size("batch_size", d.batch_size);
  d.max_epochs = size("max_epochs", d.max_epochs);
  d.patience = size("patience", d.patience);
  d.batches_per_epoch = size("batches_per_epoch", d.batches_per_epoch);
  d.seed = static_cast<std::uint64_t>(size("seed", static_cast<std::size_t>(d.seed)));
  d.validate();
  return d;
}

KeyValueConfig to_key_values(const TrainConfig& c) {
  KeyValueConfig kv;
  kv.set("mode", to_string(c.mode));
  kv.set("w", std::to_string(c.window));
  kv.set("backbone", to_string(c.backbone));
  kv.set("hidden", std::to_string(c.hidden));
  kv.set("layers", std::to_string(c.layers));
  kv.set("rve_embed", std::to_string(c.rve_embed));
  kv.set("rve_hidden", std::to_string(c.rve_hidden));
  kv.set("lr", exact(c.lr));
  kv.set("weight_decay", exact(c.weight_decay));
  kv.set("beta", exact(c.beta));
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("max_epochs", std::to_string(c.max_epochs));
  kv.set("patience", std::to_string(c.patience));
  kv.set("batches_per_epoch", std::to_string(c.batches_per_epoch));
  kv.set("seed", std::to_string(c.seed));
  return kv;
}

Model::Model(const TrainConfig& cfg) : cfg_(cfg), backbone_(backbone_config(cfg)) {
  cfg_.validate();
  if (uses_attention()) estimator_.emplace(RveConfig{kChannels, cfg.rve_embed, cfg.rve_hidden});
}

bool Model::uses_attention() const { return cfg_.mode == Mode::full || cfg_.mode == Mode::no_rvd; }
bool Model::uses_error_terms() const { return cfg_.mode != Mode::no_rvn && cfg_.mode != Mode::baseline; }
bool Model::denormalizes() const { return cfg_.mode != Mode::no_rvd && cfg_.mode != Mode::baseline; }

void Model::init(std::uint64_t seed) {
  params_ = nn::ParamStore();
  std::mt19937_64 rng(seed);
  if (estimator_) estimator_->init(params_, rng);
  backbone_.init(params_, rng);
}

Model::Forward Model::forward(nn::Graph& g, const WindowBatch& batch) {
  Forward f;
  f.stats = estimator_ ? estimator_->forward(g, params_, batch).stats : arithmetic_moments(g, batch);
  nn::Var input = uses_error_terms() ? normalize_batch(batch, f.stats) : g.constant(batch.ratio_features);
  f.backbone_output = backbone_.forward(g, params_, input);
  f.predicted_ratio = denormalizes() ? denormalize_ratio(f.stats.m_hat, f.stats.sigma_hat, f.backbone_output)
                                     : nn::shift(f.backbone_output, 1.0);
  return f;
}

nn::Var Model::loss(const Forward& f, const WindowBatch& batch, double beta) {
  nn::Graph& g = f.predicted_ratio.graph();
  nn::Var target = g.constant(batch.target_ratio);
  // guidance only matters where m_hat is learned
  const double b = uses_attention() ? beta : 0.0;
  return composite_loss(f.predicted_ratio, target, g.constant(batch.arithmetic_mean), f.stats.m_hat, b);
}

std::vector<PredictionRecord> Model::predict(std::span<const WindowSample> samples, std::size_t* skipped) {
  std::vector<PredictionRecord> out;
  out.reserve(samples.size());
  std::size_t n_skipped = 0;

  auto emit = [&](std::span<const WindowSample* const> chunk) {
    const auto batch = make_batch(chunk, r_hats_, false);
    nn::Graph g(false);
    const auto f = forward(g, batch);
    const nn::Tensor& pred = f.predicted_ratio.value();
    const nn::Tensor& eps = f.backbone_output.value();
    const nn::Tensor& m = f.stats.m_hat.value();
    const nn::Tensor& s = f.stats.sigma_hat.value();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const WindowSample& smp = *chunk[i];
      PredictionRecord r;
      r.symbol = smp.symbol();
      r.date = smp.has_target() ? smp.target_date() : next_weekday(smp.last_bar().date);
      r.predicted_ratio = pred(i, 0);
      r.actual_ratio = smp.has_target() ? smp.target_close() / smp.last_bar().close : kNaN;
      r.eps_hat = eps(i, 0);
      r.stats = {m(i, 0), s(i, 0), r_hats_.at(smp.symbol())};
      out.push_back(std::move(r));
    }
  };

  std::vector<const WindowSample*> chunk;
  auto flush = [&]() {
    if (chunk.empty()) return;
    try {
      emit(chunk);
    } catch (const DegenerateError&) {
      // isolate the windows whose attention moments collapse
      for (const WindowSample* s : chunk) {
        try {
          emit(std::span<const WindowSample* const>(&s, 1));
        } catch (const DegenerateError&) {
          ++n_skipped;
        }
      }
    }
    chunk.clear();
  };
  for (const auto& s : samples) {
    if (!r_hats_.count(s.symbol())) throw DataError("no r_hat for symbol '" + s.symbol() + "' in this model");
    if (is_degenerate(s)) {
      ++n_skipped;
      continue;
    }
    chunk.push_back(&s);
    if (chunk.size() == kInferenceChunk) flush();
  }
  flush();
  if (n_skipped > 0) spdlog::info("predict: skipped {} degenerate sample(s)", n_skipped);
  if (skipped) *skipped = n_skipped;
  return out;
}

nn::Checkpoint Model::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.meta = meta;
  const KeyValueConfig kv = to_key_values(cfg_);
  for (const auto& [k, v] : kv.entries()) ckpt.meta["config." + k] = v;
  for (const auto& [sym, r] : r_hats_) ckpt.meta["r_hat." + sym] = exact(r);
  for (const auto& [name, entry] : params_) ckpt.params.add(name, entry.value);
  return ckpt;
}

Model Model::from_checkpoint(const nn::Checkpoint& ckpt) {
  KeyValueConfig kv;
  RHatTable r_hats;
  std::map<std::string, std::string> extra;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.rfind("config.", 0) == 0) {
      kv.set(k.substr(7), v);
    } else if (k.rfind("r_hat.", 0) == 0) {
      char* end = nullptr;
      const double r = std::strtod(v.c_str(), &end);
      if (end == v.c_str() || *end != '\0') throw LoadError("checkpoint r_hat '" + k + "' is not a number");
      r_hats[k.substr(6)] = r;
    } else {
      extra[k] = v;
    }
  }
  if (kv.entries().empty()) throw LoadError("checkpoint carries no model config");
  TrainConfig cfg;
  try {
    cfg = train_config_from(kv);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config: ") + e.what());
  }
  Model model(cfg);
  model.init(0);
  if (model.params_.size() != ckpt.params.size()) {
    throw LoadError("checkpoint has " + std::to_string(ckpt.params.size()) + " tensors, config expects " +
                    std::to_string(model.params_.size()));
  }
  for (auto& [name, entry] : model.params_) {
    if (!ckpt.params.contains(name)) throw LoadError("checkpoint lacks tensor '" + name + "'");
    const nn::Tensor& stored = ckpt.params.at(name).value;
    if (stored.rows() != entry.value.rows() || stored.cols() != entry.value.cols()) {
      throw LoadError("tensor '" + name + "' is " + stored.shape_string() + ", config expects " +
                      entry.value.shape_string());
    }
    entry.value = stored;
  }
  model.r_hats_ = std::move(r_hats);
  model.meta = std::move(extra);
  return model;
}

bool is_degenerate(const WindowSample& sample) {
  try {
    estimate_arithmetic(sample);
    return false;
  } catch (const DegenerateError&) {
    return true;
  }
}

RHatTable estimate_r_hats(std::span<const WindowSample> train) {
  std::map<std::string, std::pair<const BarSeries*, std::size_t>> extent;
  for (const auto& s : train) {
    auto& e = extent[s.symbol()];
    e.first = s.series().get();
    e.second = std::max(e.second, s.first_index() + s.window() + 2);
  }
  RHatTable table;
  for (const auto& [sym, e] : extent) {
    const std::size_t end = std::min(e.second, e.first->size());
    const auto est = estimate_r(std::span<const OhlcBar>(e.first->data(), end));
    if (est.raw != est.r_hat) spdlog::info("r_hat for {} clamped from {:.6f} to {:.6f}", sym, est.raw, est.r_hat);
    table[sym] = est.r_hat;
  }
  return table;
}

std::string format_epoch_log(const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%zu train_loss=%.10g val_ic=%.10g improved=%d skipped_batches=%zu", e.epoch,
                e.train_loss, e.val_ic, e.improved ? 1 : 0, e.skipped_batches);
  return buf;
}

double validation_ic(std::span<const PredictionRecord> records, bool daily) {
  try {
    return information_coefficient(records, daily ? IcMode::daily : IcMode::pooled).mean;
  } catch (const MetricUndefinedError&) {
    return kNaN;
  }
}

TrainResult train(const DatasetSplit& split, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (split.train.empty()) throw DataError("training split is empty");
  for (const auto& s : split.train)
    if (s.window() != cfg.window) throw ConfigError("samples were built with a different w than the config");

  Model model(cfg);
  model.init(cfg.seed);

  // r_hat needs symbols with moving closes; others cannot be normalized
  std::vector<WindowSample> usable;
  std::size_t dropped = 0;
  {
    std::map<std::string, std::vector<const WindowSample*>> by_symbol;
    for (const auto& s : split.train) by_symbol[s.symbol()].push_back(&s);
    for (const auto& [sym, list] : by_symbol) {
      std::vector<WindowSample> own;
      for (const auto* s : list) own.push_back(*s);
      try {
        model.r_hats()[sym] = estimate_r_hats(own).at(sym);
      } catch (const DegenerateError&) {
        spdlog::warn("symbol {} has constant closes in training; its samples are dropped", sym);
        dropped += list.size();
        continue;
      }
      for (const auto* s : list) {
        if (is_degenerate(*s)) {
          ++dropped;
          continue;
        }
        usable.push_back(*s);
      }
    }
  }
  if (dropped > 0) spdlog::warn("dropped {} degenerate training sample(s)", dropped);
  if (usable.empty()) throw DataError("every training sample is degenerate");

  std::vector<WindowSample> validation;
  for (const auto& s : split.validation)
    if (model.r_hats().count(s.symbol())) validation.push_back(s);
  std::set<std::string> val_symbols;
  for (const auto& s : validation) val_symbols.insert(s.symbol());
  const bool daily = val_symbols.size() >= 2;

  TrainResult result{model, {}, 0, kNaN, dropped, split_fingerprint(split), daily ? "daily" : "pooled"};
  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  const std::size_t full_pass = (usable.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t batches = cfg.batches_per_epoch == 0 ? full_pass : cfg.batches_per_epoch;

  bool have_best = false;
  std::size_t since_best = 0;
  std::vector<const WindowSample*> members;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t end = std::min(order.size(), cursor + cfg.batch_size);
      members.clear();
      for (std::size_t k = cursor; k < end; ++k) members.push_back(&usable[order[k]]);
      cursor = end;

      const auto batch = make_batch(members, model.r_hats(), true);
      nn::Graph g;
      nn::Var loss;
      try {
        loss = model.loss(model.forward(g, batch), batch, cfg.beta);
      } catch (const DegenerateError& e) {
        ++log.skipped_batches;
        spdlog::debug("epoch {} batch {} skipped: {}", epoch, b, e.what());
        continue;
      }
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw DivergenceError("loss became " + std::to_string(value) + " at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(b) + " (lr " + std::to_string(cfg.lr) + ")");
      }
      g.backward(loss);
      nn::adam_step(model.params(), adam);
      loss_sum += value;
      ++loss_count;
    }
    log.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : kNaN;

    const auto records = model.predict(validation);
    log.val_ic = validation_ic(records, daily);
    // an undefined IC never beats a defined one
    const bool better = std::isfinite(log.val_ic) &&
                        (!std::isfinite(result.best_val_ic) || log.val_ic > result.best_val_ic);
    if (!have_best || better) {
      have_best = true;
      log.improved = true;
      result.best_val_ic = log.val_ic;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.log.push_back(log);
    spdlog::debug("{}", format_epoch_log(log));
    if (on_epoch) on_epoch(log);
    if (cfg.patience > 0 && since_best >= cfg.patience) break;
  }

  result.model.meta["split_fingerprint"] = std::to_string(result.split_fingerprint);
  result.model.meta["best_epoch"] = std::to_string(result.best_epoch);
  result.model.meta["best_val_ic"] = exact(result.best_val_ic);
  return result;
}

SweepGrid default_grid() {
  SweepGrid g;
  g.lr = {1e-5, 1e-4, 1e-3};
  g.weight_decay = {0.0, 1e-4, 1e-3, 1e-2};
  g.beta = {0.0, 0.25, 0.5, 1.0};
  g.hidden = {128, 256, 512};
  g.window = {8, 16, 24, 32, 40};
  return g;
}

std::vector<SweepRow> sweep(const SplitFactory& make_split, const TrainConfig& base, const SweepGrid& grid,
                            const std::function<void(const SweepRow&)>& on_row) {
  auto axis = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  std::vector<SweepRow> rows;
  for (std::size_t w : axis(grid.window, base.window)) {
    const DatasetSplit split = make_split(w);
    for (std::size_t hidden : axis(grid.hidden, base.hidden))
      for (double lr : axis(grid.lr, base.lr))
        for (double wd : axis(grid.weight_decay, base.weight_decay))
          for (double beta : axis(grid.beta, base.beta)) {
            TrainConfig cfg = base;
            cfg.window = w;
            cfg.hidden = hidden;
            cfg.lr = lr;
            cfg.weight_decay = wd;
            cfg.beta = beta;
            const auto res = train(split, cfg);
            rows.push_back({cfg, res.best_val_ic, res.best_epoch});
            if (on_row) on_row(rows.back());
          }
  }
  return rows;
}

}  // namespace revol
