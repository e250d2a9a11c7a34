#include "revol/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "revol/baselines.hpp"
#include "revol/errors.hpp"
#include "revol/eval.hpp"
#include "revol/kv_config.hpp"
#include "revol/pipeline.hpp"
#include "revol/rvn.hpp"

namespace revol::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string data;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> backbone;
  std::optional<std::size_t> window;
  std::optional<double> beta;
  std::string out;
  std::string pred;
  std::string checkpoint;
  std::vector<std::string> sets;
  // command specific
  std::string split = "test";
  bool pooled = false;
  long long index = -1;
  double threshold = 0.1;
  std::string trace;
  double m_hat = 0.0005;
  double sigma_hat = 0.015;
  std::size_t draws = 1000000;
  std::size_t bins = 60;
  double range = 4.0;
  bool full_grid = false;
};

KeyValueConfig effective_config(const Options& o) {
  KeyValueConfig kv = o.config.empty() ? KeyValueConfig() : KeyValueConfig::load(o.config);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ArgumentError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (o.mode) kv.set("mode", *o.mode);
  if (o.backbone) kv.set("backbone", *o.backbone);
  if (o.window) kv.set("w", std::to_string(*o.window));
  if (o.beta) {
    std::ostringstream ss;
    ss.precision(17);
    ss << *o.beta;
    kv.set("beta", ss.str());
  }
  return kv;
}

void echo_config(const KeyValueConfig& kv, std::ostream& err) {
  err << "# effective config\n";
  std::istringstream lines(kv.to_string());
  for (std::string line; std::getline(lines, line);) err << "#   " << line << "\n";
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ArgumentError(std::string(flag) + " is required");
}

SplitRatios split_ratios(const KeyValueConfig& kv) {
  SplitRatios r;
  if (kv.contains("split")) {
    const auto v = kv.get_doubles("split");
    if (v.size() != 3) throw ConfigError("'split' expects three ratios");
    r = {v[0], v[1], v[2]};
  }
  return r;
}

std::vector<WindowSample> windows_of(const std::vector<SymbolSeries>& data, std::size_t w) {
  std::vector<WindowSample> all;
  for (const auto& s : data) {
    auto win = make_windows(s.bars, s.symbol, w);
    all.insert(all.end(), std::make_move_iterator(win.begin()), std::make_move_iterator(win.end()));
  }
  return all;
}

DatasetSplit split_of(const std::vector<SymbolSeries>& data, std::size_t w, const KeyValueConfig& kv) {
  const auto all = windows_of(data, w);
  return chronological_split(all, split_ratios(kv));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write '" + path + "'");
  return f;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    auto f = open_out(path);
    f << text;
  }
}

Model load_model(const std::string& path) {
  require(path, "--checkpoint");
  return Model::from_checkpoint(nn::load_checkpoint(path));
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.out, "--out");
  KeyValueConfig kv = effective_config(o);
  echo_config(kv, err);
  const UniverseSpec spec = universe_spec_from_config(kv);
  const auto universe = generate_universe(spec);
  if (universe.size() == 1 && fs::path(o.out).extension() == ".csv") {
    write_csv(o.out, *universe.front().bars);
    out << "wrote " << universe.front().bars->size() << " bars to " << o.out << "\n";
    return kExitOk;
  }
  fs::create_directories(o.out);
  for (const auto& s : universe) write_csv(fs::path(o.out) / (s.symbol + ".csv"), *s.bars);
  out << "wrote " << universe.size() << " symbols to " << o.out << "\n";
  return kExitOk;
}

int cmd_normalize(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  const KeyValueConfig kv = effective_config(o);
  echo_config(kv, err);
  const auto data = load_data(o.data);
  if (data.size() != 1) throw ArgumentError("normalize takes exactly one data file");
  const auto w = static_cast<std::size_t>(kv.get_int("w", 16));
  const auto samples = make_windows(data.front().bars, data.front().symbol, w);
  const long long n = static_cast<long long>(samples.size());
  const long long idx = o.index < 0 ? n - 2 : o.index;  // last targeted window by default
  if (idx < 0 || idx >= n) throw ArgumentError("--index out of range (0.." + std::to_string(n - 1) + ")");
  const auto& s = samples[static_cast<std::size_t>(idx)];
  const SampleStats stats = estimate_arithmetic(s);
  emit(o.out, error_terms_csv(normalize_window(s, stats)), out);
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  require(o.out, "--out");
  const KeyValueConfig kv = effective_config(o);
  const TrainConfig cfg = train_config_from(kv);
  KeyValueConfig shown = to_key_values(cfg);
  shown.merge(kv);
  echo_config(shown, err);
  const auto split = split_of(load_data(o.data), cfg.window, kv);
  auto log_line = [&](const EpochLog& e) { out << format_epoch_log(e) << "\n" << std::flush; };
  TrainResult res = cfg.mode == Mode::baseline ? train_baseline(split, cfg) : train(split, cfg, log_line);
  if (cfg.mode == Mode::baseline)
    for (const auto& e : res.log) log_line(e);
  nn::save_checkpoint(o.out, res.model.to_checkpoint());
  out << "best_epoch=" << res.best_epoch << " best_val_ic=" << res.best_val_ic
      << " dropped_samples=" << res.dropped_samples << " split_fingerprint=" << res.split_fingerprint << "\n";
  if (!o.pred.empty()) {
    const auto records = res.model.predict(split.test);
    auto f = open_out(o.pred);
    write_predictions_csv(f, records);
  }
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  Model model = load_model(o.checkpoint);
  KeyValueConfig kv = effective_config(o);
  echo_config(kv, err);
  const auto data = load_data(o.data);
  std::vector<WindowSample> samples;
  if (o.split == "latest") {
    for (auto& s : windows_of(data, model.config().window))
      if (!s.has_target()) samples.push_back(std::move(s));
  } else {
    const auto split = split_of(data, model.config().window, kv);
    if (auto it = model.meta.find("split_fingerprint");
        it != model.meta.end() && it->second != std::to_string(split_fingerprint(split))) {
      spdlog::warn("data split differs from the one the checkpoint was trained on");
    }
    if (o.split == "test") samples = split.test;
    else if (o.split == "validation") samples = split.validation;
    else if (o.split == "train") samples = split.train;
    else throw ArgumentError("--split must be train, validation, test or latest");
  }
  std::size_t skipped = 0;
  const auto records = model.predict(samples, &skipped);
  std::ostringstream csv;
  write_predictions_csv(csv, records);
  emit(o.out, csv.str(), out);
  err << "# " << records.size() << " predictions, " << skipped << " degenerate sample(s) skipped\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  require(o.pred, "--pred");
  std::ifstream f(o.pred);
  if (!f) throw LoadError("cannot open '" + o.pred + "'");
  const auto records = read_predictions_csv(f, o.pred);
  const auto report = evaluate(records, o.pooled ? IcMode::pooled : IcMode::daily);
  out << summary_text(report);
  if (!o.out.empty()) {
    auto file = open_out(o.out);
    file << metric_report_csv(report);
  }
  return kExitOk;
}

StatsEstimator estimator_for(const std::string& checkpoint, std::optional<Model>& holder) {
  if (checkpoint.empty()) return [](const WindowSample& s) { return estimate_arithmetic(s); };
  holder = load_model(checkpoint);
  if (!holder->estimator()) throw ArgumentError("checkpoint has no attention estimator (mode " +
                                                to_string(holder->config().mode) + ")");
  return [&holder](const WindowSample& s) { return estimate_attention(s, *holder->estimator(), holder->params()).first; };
}

int cmd_shift_report(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  const KeyValueConfig kv = effective_config(o);
  echo_config(kv, err);
  std::optional<Model> model;
  const auto estimator = estimator_for(o.checkpoint, model);
  const std::size_t w = model ? model->config().window : static_cast<std::size_t>(kv.get_int("w", 16));
  const auto rows = shift_report(split_of(load_data(o.data), w, kv), estimator);
  emit(o.out, shift_report_csv(rows), out);
  return kExitOk;
}

int cmd_attn_report(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  const KeyValueConfig kv = effective_config(o);
  echo_config(kv, err);
  Model model = load_model(o.checkpoint);
  if (!model.estimator()) throw ArgumentError("checkpoint has no attention estimator");
  const auto split = split_of(load_data(o.data), model.config().window, kv);
  const auto rep = attention_noise_report(split.test, *model.estimator(), model.params(), o.threshold);
  char buf[256];
  std::snprintf(buf, sizeof buf, "correlation,%.17g\nnoisy_steps,%zu\nnormal_steps,%zu\nattention_ratio,%s\n",
                rep.correlation, rep.noisy_steps, rep.normal_steps,
                rep.attention_ratio ? std::to_string(*rep.attention_ratio).c_str() : "");
  emit(o.out, std::string("metric,value\n") + buf, out);
  if (!o.trace.empty() && !split.test.empty()) {
    const auto [stats, trace] = estimate_attention(split.test.front(), *model.estimator(), model.params());
    auto f = open_out(o.trace);
    f << attention_trace_csv(trace);
  }
  return kExitOk;
}

int cmd_drift_check(const Options& o, std::ostream& out, std::ostream&) {
  const std::uint64_t seed = o.seed.value_or(0);
  const double frac = drift_ratio_diagnostic({o.m_hat, o.sigma_hat, 0.0}, o.draws, seed);
  char buf[160];
  std::snprintf(buf, sizeof buf, "m_hat=%.10g sigma_hat=%.10g draws=%zu fraction_below_one_fifth=%.6f\n", o.m_hat,
                o.sigma_hat, o.draws, frac);
  out << buf;
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  const KeyValueConfig kv = effective_config(o);
  const TrainConfig base = train_config_from(kv);
  echo_config(kv, err);
  SweepGrid grid = o.full_grid ? default_grid() : SweepGrid{};
  auto sizes = [&](const char* key) {
    std::vector<std::size_t> v;
    for (double d : kv.get_doubles(key)) v.push_back(static_cast<std::size_t>(d));
    return v;
  };
  if (kv.contains("grid_lr")) grid.lr = kv.get_doubles("grid_lr");
  if (kv.contains("grid_weight_decay")) grid.weight_decay = kv.get_doubles("grid_weight_decay");
  if (kv.contains("grid_beta")) grid.beta = kv.get_doubles("grid_beta");
  if (kv.contains("grid_hidden")) grid.hidden = sizes("grid_hidden");
  if (kv.contains("grid_w")) grid.window = sizes("grid_w");
  const auto data = load_data(o.data);
  std::ostringstream csv;
  csv << "w,hidden,lr,weight_decay,beta,best_epoch,best_val_ic\n";
  out << csv.str();
  auto row_text = [](const SweepRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%zu,%.17g\n", r.config.window, r.config.hidden,
                  r.config.lr, r.config.weight_decay, r.config.beta, r.best_epoch, r.best_val_ic);
    return std::string(buf);
  };
  sweep([&](std::size_t w) { return split_of(data, w, kv); }, base, grid,
        [&](const SweepRow& r) {
          const auto line = row_text(r);
          csv << line;
          out << line << std::flush;
        });
  if (!o.out.empty()) {
    auto f = open_out(o.out);
    f << csv.str();
  }
  return kExitOk;
}

int cmd_plot(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.data, "--data");
  const KeyValueConfig kv = effective_config(o);
  echo_config(kv, err);
  std::optional<Model> model;
  const auto estimator = estimator_for(o.checkpoint, model);
  const std::size_t w = model ? model->config().window : static_cast<std::size_t>(kv.get_int("w", 16));
  const auto split = split_of(load_data(o.data), w, kv);
  const auto train = feature_pools(split.train, estimator);
  const auto test = feature_pools(split.test, estimator);

  std::string csv = "series,bin_lo,bin_hi,count\n";
  auto add = [&](const char* name, const std::vector<double>& v, double lo, double hi) {
    const auto h = histogram(v, o.bins, lo, hi);
    char buf[160];
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%zu\n", name, h.edges[i], h.edges[i + 1], h.counts[i]);
      csv += buf;
    }
  };
  double lo = 0.0, hi = 0.0;
  for (const auto* v : {&train.raw_log_returns, &test.raw_log_returns}) {
    if (v->empty()) continue;
    const auto [mn, mx] = std::minmax_element(v->begin(), v->end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  add("raw_train", train.raw_log_returns, lo, hi);
  add("raw_test", test.raw_log_returns, lo, hi);
  add("instance_norm_train", train.instance_norm_close, -o.range, o.range);
  add("instance_norm_test", test.instance_norm_close, -o.range, o.range);
  add("rvn_train", train.rvn_close, -o.range, o.range);
  add("rvn_test", test.rvn_close, -o.range, o.range);
  emit(o.out, csv, out);
  return kExitOk;
}

}  // namespace

void configure_logging() {
  static bool done = false;
  if (!done) {
    auto logger = spdlog::stderr_color_mt("revol");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    done = true;
  }
  const char* env = std::getenv("REVOL_LOG_LEVEL");
  auto level = spdlog::level::warn;
  if (env && *env) {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to off
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::warn;
  }
  spdlog::set_level(level);
}

std::vector<SymbolSeries> load_data(const std::string& spec) {
  std::vector<fs::path> files;
  if (fs::is_directory(spec)) {
    for (const auto& e : fs::directory_iterator(spec))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw LoadError("no .csv files in '" + spec + "'");
  } else {
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) files.emplace_back(item);
  }
  if (files.empty()) throw ArgumentError("--data names no files");
  std::vector<SymbolSeries> out;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw LoadError("data file '" + f.string() + "' does not exist");
    out.push_back({f.stem().string(), std::make_shared<const BarSeries>(load_csv(f))});
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  Options o;
  CLI::App app{"Return-volatility normalization for OHLC return prediction", "revol"};
  app.require_subcommand(1);

  auto data_opts = [&](CLI::App* c) {
    c->add_option("--data", o.data, "CSV file, comma-separated list, or directory");
    c->add_option("--config", o.config, "key=value configuration file")->check(CLI::ExistingFile);
    c->add_option("--set", o.sets, "override a config key (key=value)");
    c->add_option("--seed", o.seed, "random seed");
    c->add_option("--w", o.window, "window length");
    c->add_option("--out", o.out, "output path");
  };

  auto* synth = app.add_subcommand("synth", "generate synthetic OHLC data");
  synth->add_option("--config", o.config, "synthetic spec")->check(CLI::ExistingFile);
  synth->add_option("--set", o.sets, "override a config key (key=value)");
  synth->add_option("--seed", o.seed, "random seed");
  synth->add_option("--out", o.out, "CSV file (single symbol) or directory");

  auto* normalize = app.add_subcommand("normalize", "emit one window's error terms");
  data_opts(normalize);
  normalize->add_option("--index", o.index, "window index (default: last with a target)");

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  data_opts(train_cmd);
  train_cmd->add_option("--mode", o.mode, "full, no_rvn, no_rve, no_rvd or baseline");
  train_cmd->add_option("--backbone", o.backbone, "recurrent or mlp");
  train_cmd->add_option("--beta", o.beta, "guidance loss weight");
  train_cmd->add_option("--pred", o.pred, "also write test-split predictions");

  auto* predict = app.add_subcommand("predict", "predict next-day returns from a checkpoint");
  data_opts(predict);
  predict->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  predict->add_option("--split", o.split, "train, validation, test or latest");

  auto* eval = app.add_subcommand("eval", "IC, RIC and Sharpe ratio of a prediction file");
  eval->add_option("--pred", o.pred, "prediction CSV")->required();
  eval->add_flag("--pooled", o.pooled, "pooled instead of daily cross-sectional IC");
  eval->add_option("--out", o.out, "metric report CSV");

  auto* shift = app.add_subcommand("shift-report", "KS statistics between train and test feature pools");
  data_opts(shift);
  shift->add_option("--checkpoint", o.checkpoint, "use the checkpoint's attention estimator");

  auto* attn = app.add_subcommand("attn-report", "attention weight vs. noisy returns on the test split");
  data_opts(attn);
  attn->add_option("--checkpoint", o.checkpoint, "checkpoint with an attention estimator")->required();
  attn->add_option("--threshold", o.threshold, "noisy step: |S_t/S_{t-1} - 1| >= threshold");
  attn->add_option("--trace", o.trace, "write the first test window's attention trace");

  auto* drift = app.add_subcommand("drift-check", "share of draws where the drift term is under 1/5 of the noise");
  drift->add_option("--m", o.m_hat, "daily log drift");
  drift->add_option("--sigma", o.sigma_hat, "daily volatility");
  drift->add_option("--draws", o.draws, "Monte-Carlo draws");
  drift->add_option("--seed", o.seed, "random seed");

  auto* sweep_cmd = app.add_subcommand("sweep", "train every configuration of a grid");
  data_opts(sweep_cmd);
  sweep_cmd->add_option("--mode", o.mode, "full, no_rvn, no_rve, no_rvd or baseline");
  sweep_cmd->add_option("--backbone", o.backbone, "recurrent or mlp");
  sweep_cmd->add_option("--beta", o.beta, "guidance loss weight");
  sweep_cmd->add_flag("--full-grid", o.full_grid, "start from the full default grid");

  auto* plot = app.add_subcommand("plot", "histogram CSV of raw and normalized feature pools");
  data_opts(plot);
  plot->add_option("--checkpoint", o.checkpoint, "use the checkpoint's attention estimator");
  plot->add_option("--bins", o.bins, "bins per series");
  plot->add_option("--range", o.range, "normalized series cover [-range, range]");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUserError;
  }

  try {
    if (*synth) return cmd_synth(o, out, err);
    if (*normalize) return cmd_normalize(o, out, err);
    if (*train_cmd) return cmd_train(o, out, err);
    if (*predict) return cmd_predict(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*shift) return cmd_shift_report(o, out, err);
    if (*attn) return cmd_attn_report(o, out, err);
    if (*drift) return cmd_drift_check(o, out, err);
    if (*sweep_cmd) return cmd_sweep(o, out, err);
    if (*plot) return cmd_plot(o, out, err);
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternalError;
  }
  return kExitInternalError;
}

}  // namespace revol::cli
