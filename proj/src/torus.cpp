#include "lram/torus.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <numeric>

namespace lram {

namespace {

constexpr char kMagic[8] = {'L', 'R', 'A', 'M', 'V', 'T', '\0', '\0'};

inline int64_t floor_mod(int64_t a, int64_t m) {
  int64_t r = a % m;
  return r < 0 ? r + m : r;
}

class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_integral_v<U>);
    using Unsigned = std::make_unsigned_t<U>;
    auto u = static_cast<Unsigned>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<uint8_t>(u >> (8 * i)));
  }
  void put_raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
  std::vector<uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> b) : bytes_(b) {}
  template <class U>
  U get() {
    using Unsigned = std::make_unsigned_t<U>;
    need(sizeof(U));
    Unsigned u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<Unsigned>(Unsigned{bytes_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    return static_cast<U>(u);
  }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class T>
void save_impl(const BasicValueTable<T>& table, const TorusConfig& config, const std::filesystem::path& path) {
  if (table.rows() != config.slot_count()) throw ConfigError("value table rows do not match slot count");
  ByteWriter w;
  w.put_raw(kMagic, sizeof kMagic);
  w.put<uint32_t>(kCheckpointVersion);
  for (auto k : config.periods()) w.put<int32_t>(k);
  w.put<uint64_t>(table.rows());
  w.put<uint32_t>(static_cast<uint32_t>(table.dim()));
  w.put<uint8_t>(static_cast<uint8_t>(dtype_of<T>()));
  using Bits = std::conditional_t<sizeof(T) == 8, uint64_t, uint32_t>;
  w.bytes.reserve(w.bytes.size() + table.data().size() * sizeof(T) + 4);
  for (T x : table.data()) {
    Bits b;
    std::memcpy(&b, &x, sizeof b);
    w.put<Bits>(b);
  }
  uLong crc = crc32(crc32(0L, Z_NULL, 0), w.bytes.data(), static_cast<uInt>(w.bytes.size()));
  w.put<uint32_t>(static_cast<uint32_t>(crc));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
}

}  // namespace

uint64_t memory_location_count(const Periods& periods) {
  uint64_t prod = 1;
  for (auto k : periods) {
    if (k <= 0 || k % 4 != 0) throw ConfigError("torus periods must be positive multiples of 4");
    prod *= static_cast<uint64_t>(k);
  }
  return prod / 256;
}

TorusConfig::TorusConfig(const Periods& periods) : periods_(periods), slot_count_(memory_location_count(periods)) {
  for (auto k : periods_) {
    if (k < 8) throw ConfigError("torus periods must be at least 8");
  }
}

TorusConfig TorusConfig::preset(std::string_view name) {
  if (name == "base") return TorusConfig({8, 8, 8, 8, 8, 8, 8, 8});
  if (name == "small") return TorusConfig({16, 16, 8, 8, 8, 8, 8, 8});
  if (name == "medium") return TorusConfig({16, 16, 16, 16, 8, 8, 8, 8});
  if (name == "large") return TorusConfig({32, 32, 16, 16, 8, 8, 8, 8});
  throw ConfigError("unknown location preset '" + std::string(name) + "' (expected base|small|medium|large)");
}

uint64_t slot_index(const LatticePoint& k, const TorusConfig& config) {
  if (!is_lattice_point(k)) throw std::domain_error("slot_index: not a lattice point");
  return detail::slot_index_unchecked(k, config);
}

uint64_t detail::slot_index_unchecked(const LatticePoint& k, const TorusConfig& config) {
  const auto& K = config.periods();
  std::array<int64_t, kDim> a{};
  const int64_t parity = k[0] & 1;
  int64_t low_sum = 0;
  for (int i = 0; i < kDim; ++i) {
    int64_t r = k[i];
    if (r < 0 || r >= K[i]) {
      // Lookups stay within one period of the box, so a single add or
      // subtract usually suffices.
      r += r < 0 ? K[i] : -int64_t{K[i]};
      if (r < 0 || r >= K[i]) r = floor_mod(k[i], K[i]);
    }
    a[i] = (r - parity) / 2;
    if (i < kDim - 1) low_sum += a[i];
  }
  // sum(a) is even for lattice points, so a_8 and a_1 + ... + a_7 agree mod 2.
  const int64_t top = (a[kDim - 1] - (low_sum & 1)) / 2;

  uint64_t index = static_cast<uint64_t>(top);
  for (int i = kDim - 2; i >= 0; --i) index = index * static_cast<uint64_t>(K[i] / 2) + static_cast<uint64_t>(a[i]);
  return index * 2 + static_cast<uint64_t>(parity);
}

LatticePoint slot_representative(uint64_t slot, const TorusConfig& config) {
  if (slot >= config.slot_count()) throw std::out_of_range("slot_representative: slot out of range");
  const auto& K = config.periods();
  const int64_t parity = static_cast<int64_t>(slot & 1);
  slot >>= 1;
  std::array<int64_t, kDim> a{};
  int64_t low_sum = 0;
  for (int i = 0; i < kDim - 1; ++i) {
    const auto radix = static_cast<uint64_t>(K[i] / 2);
    a[i] = static_cast<int64_t>(slot % radix);
    slot /= radix;
    low_sum += a[i];
  }
  a[kDim - 1] = 2 * static_cast<int64_t>(slot) + (low_sum & 1);
  LatticePoint k;
  for (int i = 0; i < kDim; ++i) k[i] = static_cast<int32_t>(2 * a[i] + parity);
  return k;
}

Vec8 wrap(const Vec8& q, const TorusConfig& config) {
  Vec8 out{};
  for (int i = 0; i < kDim; ++i) {
    const double K = config.period(i);
    double r = std::fmod(q[i], K);
    if (r < 0.0) r += K;
    if (r >= K) r = 0.0;  // -tiny + K rounds up to K
    out[i] = r;
  }
  return out;
}

void save_checkpoint(const ValueTable& table, const TorusConfig& config, const std::filesystem::path& path) {
  save_impl(table, config, path);
}

void save_checkpoint(const ValueTableF32& table, const TorusConfig& config, const std::filesystem::path& path) {
  save_impl(table, config, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a value-table checkpoint");
  }
  const std::size_t body = bytes.size() - 4;
  ByteReader tail(std::span<const uint8_t>(bytes).subspan(body));
  const auto stored_crc = tail.get<uint32_t>();
  const auto crc = static_cast<uint32_t>(crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(body)));
  if (crc != stored_crc) throw std::runtime_error("checkpoint checksum mismatch");

  ByteReader r(std::span<const uint8_t>(bytes).first(body));
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<uint8_t>();
  if (r.get<uint32_t>() != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  Periods periods{};
  for (auto& k : periods) k = r.get<int32_t>();
  TorusConfig config(periods);
  const auto rows = r.get<uint64_t>();
  const auto dim = r.get<uint32_t>();
  const auto dtype = static_cast<DType>(r.get<uint8_t>());
  if (rows != config.slot_count()) throw std::runtime_error("checkpoint row count does not match periods");
  const std::size_t width = dtype == DType::f64 ? 8 : 4;
  if (dtype != DType::f64 && dtype != DType::f32) throw std::runtime_error("unknown checkpoint dtype");
  if (body - r.pos() != rows * dim * width) throw std::runtime_error("checkpoint payload size mismatch");

  ValueTable values(rows, dim);
  for (auto& x : values.data()) {
    if (dtype == DType::f64) {
      auto b = r.get<uint64_t>();
      std::memcpy(&x, &b, sizeof x);
    } else {
      auto b = r.get<uint32_t>();
      float f;
      std::memcpy(&f, &b, sizeof f);
      x = f;
    }
  }
  return {config, std::move(values), dtype};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.stored_dtype == DType::f64) {
    save_impl(ckpt.values, ckpt.config, path);
    return;
  }
  ValueTableF32 narrow(ckpt.values.rows(), ckpt.values.dim());
  auto src = ckpt.values.data();
  auto dst = narrow.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
  save_impl(narrow, ckpt.config, path);
}

uint64_t AccessStats::total_touches() const {
  return std::accumulate(touch_count.begin(), touch_count.end(), uint64_t{0});
}

}  // namespace lram
