#include "revol/nn/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "revol/errors.hpp"

namespace revol::nn {
namespace {

constexpr const char* kCheckpointTag = "revol-ckpt-v1";

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return false;
  return true;
}

}  // namespace

ParamEntry& ParamStore::add(const std::string& name, Tensor init) {
  if (entries_.count(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  if (!init.all_finite()) throw NumericDomainError("parameter '" + name + "' initialized with non-finite values");
  ParamEntry e;
  e.grad = Tensor(init.rows(), init.cols());
  e.adam_m = Tensor(init.rows(), init.cols());
  e.adam_v = Tensor(init.rows(), init.cols());
  e.value = std::move(init);
  return entries_.emplace(name, std::move(e)).first->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  for (auto& [_, e] : store) {
    ++e.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.step));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    double* w = e.value.data();
    double* g = e.grad.data();
    double* m = e.adam_m.data();
    double* v = e.adam_v.data();
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] = w[i] * decay - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      g[i] = 0.0;
    }
  }
}

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string manifest = std::string(kCheckpointTag) + "\n";
  for (const auto& [k, v] : ckpt.meta) {
    if (!valid_token(k) || v.find('\n') != std::string::npos) {
      throw ArgumentError("checkpoint meta '" + k + "' is not serializable");
    }
    manifest += "meta " + k + " " + v + "\n";
  }
  std::string buffer;
  for (const auto& [name, e] : ckpt.params) {
    if (!valid_token(name)) throw ArgumentError("parameter name '" + name + "' is not serializable");
    manifest += "tensor " + name + " f64 " + e.value.shape_string() + " " + std::to_string(buffer.size()) + "\n";
    for (double v : e.value.values()) put_le(buffer, v);
  }
  manifest += "end\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write checkpoint " + path.string());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw LoadError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string raw = ss.str();

  struct Pending {
    std::string name;
    std::size_t rows, cols, offset;
  };
  std::vector<Pending> pending;
  Checkpoint ckpt;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool ended = false;
  auto next_line = [&]() -> std::string {
    const auto eol = raw.find('\n', pos);
    if (eol == std::string::npos) throw LoadError(path.string() + ": truncated manifest");
    std::string line = raw.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    return line;
  };

  if (next_line() != kCheckpointTag) throw LoadError(path.string() + ": not a revol-ckpt-v1 checkpoint");
  while (!ended) {
    const std::string line = next_line();
    if (line == "end") {
      ended = true;
    } else if (line.rfind("meta ", 0) == 0) {
      const auto sp = line.find(' ', 5);
      if (sp == std::string::npos) throw LoadError(path.string() + ": bad meta line " + std::to_string(line_no));
      ckpt.meta[line.substr(5, sp - 5)] = line.substr(sp + 1);
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      std::string name, dtype, shape;
      std::size_t offset = 0;
      if (!(ls >> name >> dtype >> shape >> offset) || dtype != "f64") {
        throw LoadError(path.string() + ": bad tensor line " + std::to_string(line_no));
      }
      const auto x = shape.find('x');
      if (x == std::string::npos) throw LoadError(path.string() + ": bad shape '" + shape + "'");
      pending.push_back({name, std::stoul(shape.substr(0, x)), std::stoul(shape.substr(x + 1)), offset});
    } else {
      throw LoadError(path.string() + ": unexpected manifest line " + std::to_string(line_no));
    }
  }

  const char* buffer = raw.data() + pos;
  const std::size_t buffer_size = raw.size() - pos;
  for (const auto& p : pending) {
    const std::size_t n = p.rows * p.cols;
    if (p.offset + 8 * n > buffer_size) throw LoadError(path.string() + ": tensor '" + p.name + "' out of range");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = get_le(buffer + p.offset + 8 * i);
    ckpt.params.add(p.name, Tensor(p.rows, p.cols, std::move(values)));
  }
  return ckpt;
}

}  // namespace revol::nn
