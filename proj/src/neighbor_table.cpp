#include "lram/neighbor_table.hpp"

#include "lram/qp.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lram {

namespace {

constexpr std::array<int8_t, kDim> kEmbedded[] = {
#include "neighbor_table_data.inc"
};

constexpr double kSupportRadius2 = 8.0;
constexpr double kBoundaryTol = 1e-9;
constexpr double kAmbiguityBand = 1e-6;

// F is inside the Voronoi cell of the origin, so its points have norm <= 2
// (the covering radius) and any neighbour has norm < sqrt(8) + 2.
constexpr double kCandidateNorm = 2.8284271247461903 + 2.0;

void enumerate_coset(int parity, int limit, std::vector<LatticePoint>& out) {
  std::array<int32_t, kDim> x{};
  std::vector<int> values;
  for (int v = -limit; v <= limit; ++v) {
    if ((v & 1) == parity) values.push_back(v);
  }
  const std::size_t n = values.size();
  std::array<std::size_t, kDim> idx{};
  while (true) {
    for (int i = 0; i < kDim; ++i) x[i] = values[idx[i]];
    int64_t norm2 = 0;
    for (auto c : x) norm2 += int64_t{c} * c;
    if (norm2 < kCandidateNorm * kCandidateNorm && is_lattice_point(x)) out.push_back(LatticePoint{x});
    int i = 0;
    while (i < kDim && ++idx[i] == n) idx[i++] = 0;
    if (i == kDim) break;
  }
}

}  // namespace

bool NeighborTable::contains(const LatticePoint& k) const {
  return std::binary_search(points.begin(), points.end(), k);
}

uint32_t NeighborTable::checksum() const {
  auto bytes = encode_neighbor_table(*this);
  return crc32_bytes(bytes);
}

Halfspaces fundamental_region_constraints() {
  Halfspaces h{Eigen::MatrixXd::Zero(10, kDim), Eigen::VectorXd::Zero(10)};
  for (int i = 0; i < 7; ++i) {
    h.A(i, i + 1) = 1.0;
    h.A(i, i) = -1.0;
  }
  h.A(7, 6) = -1.0;
  h.A(7, 7) = -1.0;
  h.A(8, 0) = 1.0;
  h.A(8, 1) = 1.0;
  h.b(8) = 2.0;
  h.A.row(9).setOnes();
  h.b(9) = 4.0;
  return h;
}

double squared_distance_to_fundamental_region(const LatticePoint& k) {
  static const Halfspaces F = fundamental_region_constraints();
  Eigen::VectorXd target(kDim);
  for (int i = 0; i < kDim; ++i) target(i) = k[i];
  auto res = project_onto_polyhedron(F.A, F.b, target, Eigen::VectorXd::Zero(kDim));
  return res.squared_distance;
}

NeighborTable generate_neighbor_table() {
  std::vector<LatticePoint> candidates;
  enumerate_coset(0, 4, candidates);
  enumerate_coset(1, 3, candidates);

  NeighborTable table;
  for (const auto& k : candidates) {
    const double d2 = squared_distance_to_fundamental_region(k);
    if (d2 < kSupportRadius2 - kAmbiguityBand) {
      table.points.push_back(k);
    } else if (d2 < kSupportRadius2 - kBoundaryTol) {
      throw QpFailure("generate_neighbor_table: distance too close to the support boundary to classify");
    }
  }
  std::sort(table.points.begin(), table.points.end());
  return table;
}

std::string neighbor_table_source(const NeighborTable& table) {
  std::ostringstream os;
  os << "// Generated by `lram gen-table --emit-source`. Do not edit.\n";
  os << "// count=" << table.count() << " checksum=" << checksum_hex(table.checksum()) << "\n";
  for (const auto& k : table.points) {
    os << "{";
    for (int i = 0; i < kDim; ++i) os << (i ? ", " : "") << k[i];
    os << "},\n";
  }
  return os.str();
}

const NeighborTable& neighbor_table() {
  static const NeighborTable table = [] {
    NeighborTable t;
    t.points.reserve(std::size(kEmbedded));
    for (const auto& row : kEmbedded) {
      LatticePoint k;
      for (int i = 0; i < kDim; ++i) k[i] = row[i];
      t.points.push_back(k);
    }
    return t;
  }();
  return table;
}

std::span<const Vec8> neighbor_table_coords() {
  static const auto coords = [] {
    std::array<Vec8, std::size(kEmbedded)> out{};
    for (std::size_t r = 0; r < out.size(); ++r) {
      for (int i = 0; i < kDim; ++i) out[r][i] = kEmbedded[r][i];
    }
    return out;
  }();
  return coords;
}

void neighbor_squared_distances(const Vec8& z, std::span<double, kNeighborCount> out) {
  static_assert(std::size(kEmbedded) == kNeighborCount);
  // Column-major copy so the inner loop runs over table rows.
  struct Columns {
    alignas(64) double c[kDim][kNeighborCount];
  };
  static const Columns cols = [] {
    Columns t{};
    for (std::size_t r = 0; r < kNeighborCount; ++r) {
      for (int i = 0; i < kDim; ++i) t.c[i][r] = kEmbedded[r][i];
    }
    return t;
  }();
  double* __restrict d2 = out.data();
  for (std::size_t r = 0; r < kNeighborCount; ++r) d2[r] = 0.0;
  for (int i = 0; i < kDim; ++i) {
    const double zi = z[i];
    const double* __restrict col = cols.c[i];
    for (std::size_t r = 0; r < kNeighborCount; ++r) {
      const double d = zi - col[r];
      d2[r] += d * d;
    }
  }
}

std::vector<uint8_t> encode_neighbor_table(const NeighborTable& table) {
  std::vector<uint8_t> out;
  out.reserve(table.count() * kDim * 4);
  for (const auto& k : table.points) {
    for (int i = 0; i < kDim; ++i) {
      auto u = static_cast<uint32_t>(k[i]);
      for (int byte = 0; byte < 4; ++byte) out.push_back(static_cast<uint8_t>(u >> (8 * byte)));
    }
  }
  return out;
}

uint32_t crc32_bytes(std::span<const uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<uint32_t>(crc);
}

std::string checksum_hex(uint32_t crc) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc;
  return os.str();
}

void write_neighbor_table(const NeighborTable& table, const std::filesystem::path& bin_path,
                          const std::filesystem::path& json_path) {
  const auto bytes = encode_neighbor_table(table);
  {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + bin_path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::ordered_json header = {
      {"lattice", "2E8"},
      {"radius2", 8},
      {"count", table.count()},
      {"version", kNeighborTableVersion},
      {"checksum", checksum_hex(crc32_bytes(bytes))},
  };
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << header.dump(2) << "\n";
}

NeighborTable read_neighbor_table(const std::filesystem::path& bin_path,
                                  const std::filesystem::path& json_path) {
  std::ifstream jin(json_path);
  if (!jin) throw std::runtime_error("missing " + json_path.string());
  nlohmann::json header;
  try {
    jin >> header;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed table header: " + std::string(e.what()));
  }
  if (header.value("lattice", "") != "2E8" || header.value("radius2", 0) != 8) {
    throw std::runtime_error("table header does not describe the 2E8 radius^2=8 table");
  }
  const auto count = header.value("count", std::size_t{0});

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("missing " + bin_path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (bytes.size() != count * kDim * 4) throw std::runtime_error("table payload size does not match count");
  if (checksum_hex(crc32_bytes(bytes)) != header.value("checksum", "")) {
    throw std::runtime_error("table checksum mismatch");
  }

  NeighborTable table;
  table.points.resize(count);
  for (std::size_t r = 0; r < count; ++r) {
    for (int i = 0; i < kDim; ++i) {
      const uint8_t* p = &bytes[(r * kDim + i) * 4];
      uint32_t u = uint32_t{p[0]} | uint32_t{p[1]} << 8 | uint32_t{p[2]} << 16 | uint32_t{p[3]} << 24;
      table.points[r][i] = static_cast<int32_t>(u);
    }
  }
  return table;
}

}  // namespace lram
