#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hyfair/error.hpp"
#include "hyfair/matrix.hpp"

namespace hyfair {

struct Parameter {
  DenseMatrix value;
  DenseMatrix gradient;
  bool trainable = true;
  // Adam moments
  DenseMatrix first_moment;
  DenseMatrix second_moment;
};

/// Deterministic uniform double in [0, 1) from a 64-bit engine draw.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Named trainable matrices. Iteration order is the lexicographic name order, which fixes
/// initialization and update order for a given seed.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Parameter& add(const std::string& name, DenseMatrix value, bool trainable = true) {
    Parameter p;
    p.gradient = DenseMatrix(value.rows(), value.cols());
    p.first_moment = DenseMatrix(value.rows(), value.cols());
    p.second_moment = DenseMatrix(value.rows(), value.cols());
    p.value = std::move(value);
    p.trainable = trainable;
    auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
    return it->second;
  }

  /// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  Parameter& add_glorot(const std::string& name, std::size_t rows, std::size_t cols, bool trainable = true) {
    DenseMatrix m(rows, cols);
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : m.data()) v = (2.0 * unit_uniform(rng_) - 1.0) * a;
    return add(name, std::move(m), trainable);
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorCode::ShapeMismatch, "unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorCode::ShapeMismatch, "unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Parameter>& entries() noexcept { return params_; }
  const std::map<std::string, Parameter>& entries() const noexcept { return params_; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.gradient.fill(0.0);
  }

  std::size_t step_count() const noexcept { return step_; }
  void advance_step() noexcept { ++step_; }

  /// True when values (not optimizer state) match exactly.
  bool same_values(const ParameterStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (auto a = params_.begin(), b = other.params_.begin(); a != params_.end(); ++a, ++b)
      if (a->first != b->first || !(a->second.value == b->second.value)) return false;
    return true;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::map<std::string, Parameter> params_;
  std::size_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every trainable parameter, then gradients are zeroed.
inline void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  store.advance_step();
  const double t = static_cast<double>(store.step_count());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [_, p] : store.entries()) {
    if (!p.trainable) continue;
    auto& g = p.gradient.data();
    auto& m = p.first_moment.data();
    auto& v = p.second_moment.data();
    auto& w = p.value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grad();
}

// Checkpoint layout (all integers little-endian):
//   "HYFCKPT\0"  u32 version
//   u32 meta_count, then per entry: u32 key_len, key bytes, u32 value_len, value bytes
//   u32 param_count, then per entry: u32 name_len, name bytes, u8 trainable, u64 rows, u64 cols,
//   rows*cols IEEE-754 binary64 values
namespace checkpoint_detail {

inline constexpr char kMagic[8] = {'H', 'Y', 'F', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T> || std::is_same_v<T, double>);
  unsigned char buf[sizeof(T)];
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) fail(ErrorCode::ParseError, "truncated checkpoint");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) fail(ErrorCode::ParseError, "truncated checkpoint string");
  return s;
}

}  // namespace checkpoint_detail

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  ParameterStore params;
};

inline void write_checkpoint(std::ostream& os, const ParameterStore& store, const std::map<std::string, std::string>& metadata) {
  using namespace checkpoint_detail;
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    put_string(os, k);
    put_string(os, v);
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& [name, p] : store.entries()) {
    put_string(os, name);
    put<std::uint8_t>(os, p.trainable ? 1 : 0);
    put<std::uint64_t>(os, p.value.rows());
    put<std::uint64_t>(os, p.value.cols());
    for (double v : p.value.data()) put<double>(os, v);
  }
}

inline Checkpoint read_checkpoint(std::istream& is) {
  using namespace checkpoint_detail;
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) fail(ErrorCode::ParseError, "not a checkpoint file");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) fail(ErrorCode::ParseError, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto meta_n = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < meta_n; ++i) {
    auto k = get_string(is);
    ck.metadata[k] = get_string(is);
  }
  const auto n = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = get_string(is);
    const bool trainable = get<std::uint8_t>(is) != 0;
    const auto rows = get<std::uint64_t>(is);
    const auto cols = get<std::uint64_t>(is);
    std::vector<double> data(rows * cols);
    for (double& v : data) v = get<double>(is);
    ck.params.add(name, DenseMatrix(rows, cols, std::move(data)), trainable);
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const ParameterStore& store, const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path);
  write_checkpoint(os, store, metadata);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return read_checkpoint(is);
}

}  // namespace hyfair
