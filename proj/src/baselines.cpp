#include "revol/baselines.hpp"

#include "revol/errors.hpp"

namespace revol {

TrainResult train_baseline(const DatasetSplit& split, TrainConfig config,
                           std::optional<std::uint64_t> expected_fingerprint) {
  if (expected_fingerprint && split_fingerprint(split) != *expected_fingerprint) {
    throw ArgumentError("baseline split differs from the reference split");
  }
  config.mode = Mode::baseline;
  return train(split, config);
}

}  // namespace revol
