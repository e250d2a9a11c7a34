#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "revol/nn/tensor.hpp"

namespace revol::nn {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step = 0;
};

/// Named trainable tensors with their gradients and Adam state.
class ParamStore {
 public:
  /// Throws ArgumentError on duplicate names.
  ParamEntry& add(const std::string& name, Tensor init);
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, ParamEntry> entries_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled: value *= (1 - lr * weight_decay) before the Adam update.
  double weight_decay = 0.0;
};

/// Bias-corrected Adam on every entry, then gradients are zeroed.
void adam_step(ParamStore& store, const AdamConfig& cfg);

/// Uniform(-bound, bound) fill.
Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng);

struct Checkpoint {
  std::map<std::string, std::string> meta;
  ParamStore params;
};

/// Layout: text manifest starting with `revol-ckpt-v1`, `meta <key> <value>`
/// lines, one `tensor <name> f64 <rows>x<cols> <byte offset>` line per entry,
/// `end`, then the little-endian float64 buffer. Gradients and Adam state are
/// not stored.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace revol::nn
