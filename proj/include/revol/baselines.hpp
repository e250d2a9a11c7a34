#pragma once

#include <cstdint>
#include <optional>

#include "revol/pipeline.hpp"

namespace revol {

/// Backbone on ratio features predicting S_{T+1}/S_T - 1 with MSE; same
/// trainer, batching and evaluation as the ReVol modes. When
/// `expected_fingerprint` is given the split must hash to it (ArgumentError
/// otherwise), so a comparison run cannot silently use different data.
TrainResult train_baseline(const DatasetSplit& split, TrainConfig config,
                           std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

}  // namespace revol
