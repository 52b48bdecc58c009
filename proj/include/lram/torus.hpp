#pragma once

#include "lram/e8.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace lram {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using Periods = std::array<int32_t, kDim>;

/// prod(K) / 256. Throws ConfigError unless every K_i is a positive multiple of 4.
uint64_t memory_location_count(const Periods& periods);

/// Torus R^8 / L_K with L_K = prod K_i Z, and its memory locations
/// M = Lambda / L_K. Every period is a multiple of 4 (so L_K lies in the
/// lattice) and at least 8 (so each kernel support ball embeds in the torus).
class TorusConfig {
 public:
  explicit TorusConfig(const Periods& periods);

  /// "base" (2^16 slots), "small" (2^18), "medium" (2^20), "large" (2^22).
  static TorusConfig preset(std::string_view name);

  const Periods& periods() const { return periods_; }
  int32_t period(int i) const { return periods_[i]; }
  uint64_t slot_count() const { return slot_count_; }

  friend bool operator==(const TorusConfig&, const TorusConfig&) = default;

 private:
  Periods periods_;
  uint64_t slot_count_;
};

/// Dense index of the coset k + L_K in [0, slot_count). Reduces k into the
/// period box and mixed-radix encodes (parity, half-coordinates a_1..a_7,
/// floor(a_8 / 2)); a_8's low bit is fixed by the sum condition.
/// Throws std::domain_error when k is not a lattice point.
uint64_t slot_index(const LatticePoint& k, const TorusConfig& config);

namespace detail {
/// slot_index without the membership check, for callers that produce lattice
/// points by construction.
uint64_t slot_index_unchecked(const LatticePoint& k, const TorusConfig& config);
}  // namespace detail

/// Representative of slot `slot` inside the period box [0, K).
LatticePoint slot_representative(uint64_t slot, const TorusConfig& config);

/// Coordinatewise reduction into [0, K_i).
Vec8 wrap(const Vec8& q, const TorusConfig& config);

enum class DType : uint8_t { f64 = 0, f32 = 1 };

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, double> || std::is_same_v<T, float>);
  return std::is_same_v<T, double> ? DType::f64 : DType::f32;
}

/// Trainable value vectors, one row of `dim` entries per slot, stored
/// row-major so each lookup reads whole contiguous rows.
template <class T>
class BasicValueTable {
 public:
  BasicValueTable(uint64_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, T{0}) {
    if (dim == 0) throw ConfigError("value table needs dim >= 1");
  }

  uint64_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<T> row(uint64_t slot) { return {data_.data() + slot * dim_, dim_}; }
  std::span<const T> row(uint64_t slot) const { return {data_.data() + slot * dim_, dim_}; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  /// i.i.d. N(0, 1/dim) entries.
  void init_gaussian(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
    for (auto& x : data_) x = static_cast<T>(dist(rng));
  }

  bool all_finite() const {
    for (auto x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  friend bool operator==(const BasicValueTable&, const BasicValueTable&) = default;

 private:
  uint64_t rows_;
  std::size_t dim_;
  std::vector<T> data_;
};

using ValueTable = BasicValueTable<double>;
using ValueTableF32 = BasicValueTable<float>;

inline constexpr uint32_t kCheckpointVersion = 1;

// Checkpoint layout (little-endian):
//   "LRAMVT\0\0", u32 version, 8 x i32 periods, u64 rows, u32 dim, u8 dtype,
//   rows*dim values, u32 CRC-32 over everything before it.
void save_checkpoint(const ValueTable& table, const TorusConfig& config, const std::filesystem::path& path);
void save_checkpoint(const ValueTableF32& table, const TorusConfig& config, const std::filesystem::path& path);

struct Checkpoint {
  TorusConfig config;
  ValueTable values;
  DType stored_dtype = DType::f64;
};

/// Loads a checkpoint; f32 payloads are widened exactly. Throws
/// std::runtime_error on a bad magic, version, size or checksum.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `ckpt` back in its stored dtype, reproducing the original bytes.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Per-slot access record: summed retained weight and raw touch count.
struct AccessStats {
  std::vector<double> accumulated_weight;
  std::vector<uint64_t> touch_count;

  explicit AccessStats(uint64_t slots) : accumulated_weight(slots, 0.0), touch_count(slots, 0) {}

  void record(uint64_t slot, double weight) {
    accumulated_weight[slot] += weight;
    ++touch_count[slot];
  }
  uint64_t total_touches() const;
};

}  // namespace lram
