#ifndef MLSG_REFERENCE_CACHE_HPP
#define MLSG_REFERENCE_CACHE_HPP

#include <cstdint>
#include <string>

#include "mlsg/fem.hpp"

namespace mlsg {

// Text file:
//   mlsg-reference 1
//   level <L>
//   h0 <h0>
//   nodes <count>
//   hash <16 hex digits>
//   <one nodal value per line, 17 significant digits>
// The hash is FNV-1a over the little-endian IEEE bytes of the values.
struct ReferenceFile {
  FeField control;
  double h0 = 0.0;
  std::uint64_t hash = 0;
};

std::uint64_t content_hash(const Eigen::VectorXd& values);
std::string hash_hex(std::uint64_t hash);

void write_reference(const std::string& path, const FeField& control, double h0);
// Throws std::runtime_error on a missing file, malformed header or hash mismatch.
ReferenceFile read_reference(const std::string& path);

}  // namespace mlsg

#endif  // MLSG_REFERENCE_CACHE_HPP
