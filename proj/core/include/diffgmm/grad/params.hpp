#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace diffgmm::grad {

struct Parameter {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// Ordered collection of named parameters. Indices are stable once added.
class ParamStore {
 public:
  /// Adds a zero-initialized parameter; returns its index.
  std::size_t add(std::string name, std::vector<std::size_t> dims);

  /// Adds a parameter initialized uniformly in +-sqrt(1/fan_in).
  std::size_t add_uniform(std::string name, std::vector<std::size_t> dims, std::size_t fan_in,
                          std::mt19937_64& rng);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t total_values() const noexcept;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws ContractError

  const std::vector<Parameter>& all() const noexcept { return params_; }

  bool operator==(const ParamStore&) const;

 private:
  std::vector<Parameter> params_;
};

/// Per-parameter gradients, aligned with a ParamStore.
struct Gradients {
  std::vector<std::vector<double>> per_param;

  static Gradients zeros_like(const ParamStore& params);

  void accumulate(const Gradients& other);
  void scale(double factor);
  bool all_finite() const noexcept;
  double squared_norm() const noexcept;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint layout (all integers little-endian):
///   magic "DGMMCKPT" (8 bytes), u32 version, u32 parameter count, then per
///   parameter: u32 name length, name bytes, u32 rank, rank x u64 dims,
///   u64 value count, value count x f64 (IEEE-754 binary64, little-endian).
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

std::vector<unsigned char> encode_checkpoint(const ParamStore& params);
ParamStore decode_checkpoint(const std::vector<unsigned char>& bytes);

}  // namespace diffgmm::grad
