#pragma once

#include "lram/e8.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lram {

inline constexpr std::size_t kNeighborCount = 232;
inline constexpr int kNeighborTableVersion = 1;

/// Lattice points within distance sqrt(8) of the fundamental region, in
/// lexicographic order. Translating a canonicalised query's neighbourhood
/// back through the inverse isometry yields every lattice point in its
/// kernel support.
struct NeighborTable {
  std::vector<LatticePoint> points;

  std::size_t count() const { return points.size(); }
  bool contains(const LatticePoint& k) const;
  /// CRC-32 of the little-endian int32 payload.
  uint32_t checksum() const;
};

struct Halfspaces {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// Halfspace form A z <= b of the fundamental region: seven ordering rows
/// z[i+1] - z[i] <= 0, then -z7 - z8 <= 0, z1 + z2 <= 2, sum(z) <= 4.
Halfspaces fundamental_region_constraints();

/// Squared distance from k to the fundamental region, via a small active-set
/// projection.
double squared_distance_to_fundamental_region(const LatticePoint& k);

/// Offline enumeration of the table. Candidates are classified against the
/// open ball with a 1e-9 margin; a candidate landing in (8 - 1e-6, 8 - 1e-9)
/// is treated as unresolvable. Throws QpFailure on that or on any projection
/// failure.
NeighborTable generate_neighbor_table();

/// C++ source for the embedded table (the contents of neighbor_table_data.inc).
std::string neighbor_table_source(const NeighborTable& table);

/// The precomputed table compiled into the library.
const NeighborTable& neighbor_table();

/// Embedded coordinates as contiguous 232 x 8 doubles.
std::span<const Vec8> neighbor_table_coords();

/// Squared distances from z to every embedded table point, in table order.
void neighbor_squared_distances(const Vec8& z, std::span<double, kNeighborCount> out);

// Artifact: `<stem>.bin` holds count*8 little-endian int32 values; `<stem>.json`
// holds {"lattice":"2E8","radius2":8,"count":232,"version":1,"checksum":"..."}.
void write_neighbor_table(const NeighborTable& table, const std::filesystem::path& bin_path,
                          const std::filesystem::path& json_path);

/// Reads and validates an artifact. Throws std::runtime_error on a missing
/// file, a malformed header, or a checksum mismatch.
NeighborTable read_neighbor_table(const std::filesystem::path& bin_path,
                                  const std::filesystem::path& json_path);

std::vector<uint8_t> encode_neighbor_table(const NeighborTable& table);
std::string checksum_hex(uint32_t crc);
uint32_t crc32_bytes(std::span<const uint8_t> bytes);

}  // namespace lram
