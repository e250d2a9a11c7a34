#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revol/backbone.hpp"
#include "revol/kv_config.hpp"
#include "revol/market_data.hpp"
#include "revol/nn/graph.hpp"
#include "revol/nn/param_store.hpp"
#include "revol/rvd_loss.hpp"
#include "revol/rve.hpp"
#include "revol/window_batch.hpp"

namespace revol {

/// full: attention stats -> error terms -> backbone -> exp(m + sigma * eps).
/// no_rve: arithmetic stats, otherwise full.
/// no_rvn: backbone reads ratio features; output still denormalized with arithmetic stats.
/// no_rvd: attention stats and error terms; backbone output is the simple return.
/// baseline: ratio features in, simple return out, plain MSE.
enum class Mode { full, no_rvn, no_rve, no_rvd, baseline };

Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

struct TrainConfig {
  Mode mode = Mode::full;
  std::size_t window = 16;
  BackboneKind backbone = BackboneKind::recurrent;
  std::size_t hidden = 128;
  std::size_t layers = 1;
  std::size_t rve_embed = 32;
  std::size_t rve_hidden = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta = 0.25;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  /// Minibatches per epoch; 0 means one full pass over the training samples.
  std::size_t batches_per_epoch = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keys: mode, w, backbone, hidden, layers, rve_embed, rve_hidden, lr,
/// weight_decay, beta, batch_size, max_epochs, patience, batches_per_epoch, seed.
TrainConfig train_config_from(const KeyValueConfig& cfg, TrainConfig defaults = {});
KeyValueConfig to_key_values(const TrainConfig& cfg);

/// Estimator, backbone and their parameters plus the per-symbol r_hat table.
class Model {
 public:
  explicit Model(const TrainConfig& cfg);

  void init(std::uint64_t seed);

  bool uses_attention() const;
  bool uses_error_terms() const;
  bool denormalizes() const;

  struct Forward {
    nn::Var predicted_ratio;  // B x 1
    nn::Var backbone_output;  // B x 1
    StatVars stats;
  };
  Forward forward(nn::Graph& g, const WindowBatch& batch);
  nn::Var loss(const Forward& f, const WindowBatch& batch, double beta);

  /// One record per non-degenerate sample; `skipped` counts the rest.
  std::vector<PredictionRecord> predict(std::span<const WindowSample> samples, std::size_t* skipped = nullptr);

  nn::Checkpoint to_checkpoint() const;
  /// Throws LoadError when the stored tensors do not match the stored config.
  static Model from_checkpoint(const nn::Checkpoint& ckpt);

  const TrainConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  RHatTable& r_hats() { return r_hats_; }
  const RHatTable& r_hats() const { return r_hats_; }
  const std::optional<AttentionEstimator>& estimator() const { return estimator_; }
  const Backbone& backbone() const { return backbone_; }

  /// Extra checkpoint metadata (split fingerprint, best epoch, ...).
  std::map<std::string, std::string> meta;

 private:
  TrainConfig cfg_;
  std::optional<AttentionEstimator> estimator_;
  Backbone backbone_;
  nn::ParamStore params_;
  RHatTable r_hats_;
};

/// r_hat per symbol from the bars its training samples cover.
RHatTable estimate_r_hats(std::span<const WindowSample> train);

/// Samples whose arithmetic volatility is below kMinSigma.
bool is_degenerate(const WindowSample& sample);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// NaN when undefined.
  double val_ic = 0.0;
  bool improved = false;
  std::size_t skipped_batches = 0;
};

std::string format_epoch_log(const EpochLog& e);

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_ic = 0.0;
  std::size_t dropped_samples = 0;
  std::uint64_t split_fingerprint = 0;
  /// "daily" or "pooled".
  std::string validation_metric;
};

/// Mixed shuffled minibatches, Adam, validation IC after every epoch, best
/// epoch kept, stop after `patience` epochs without improvement. Throws
/// DataError when no usable training sample remains and DivergenceError on a
/// non-finite loss.
TrainResult train(const DatasetSplit& split, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Validation IC used for model selection: daily when the validation set has
/// at least two symbols, pooled otherwise. NaN when undefined.
double validation_ic(std::span<const PredictionRecord> records, bool daily);

struct SweepGrid {
  std::vector<double> lr;
  std::vector<double> weight_decay;
  std::vector<double> beta;
  std::vector<std::size_t> hidden;
  std::vector<std::size_t> window;
};

/// lr {1e-5, 1e-4, 1e-3}, weight decay {0, 1e-4, 1e-3, 1e-2},
/// beta {0, 0.25, 0.5, 1}, hidden {128, 256, 512}, w {8, 16, 24, 32, 40}.
SweepGrid default_grid();

struct SweepRow {
  TrainConfig config;
  double best_val_ic = 0.0;
  std::size_t best_epoch = 0;
};

using SplitFactory = std::function<DatasetSplit(std::size_t window)>;

/// Trains every grid combination in turn (empty axes keep the base value).
std::vector<SweepRow> sweep(const SplitFactory& make_split, const TrainConfig& base, const SweepGrid& grid,
                            const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace revol
