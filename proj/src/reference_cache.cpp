#include "mlsg/reference_cache.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mlsg {

std::uint64_t content_hash(const Eigen::VectorXd& values) {
  std::uint64_t h = 1469598103934665603ull;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void write_reference(const std::string& path, const FeField& control, double h0) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write reference file " + path);
  out << "mlsg-reference 1\n"
      << "level " << control.level << "\n"
      << "h0 " << std::setprecision(17) << h0 << "\n"
      << "nodes " << control.coeffs.size() << "\n"
      << "hash " << hash_hex(content_hash(control.coeffs)) << "\n";
  for (Eigen::Index i = 0; i < control.coeffs.size(); ++i) out << control.coeffs[i] << "\n";
  if (!out) throw std::runtime_error("failed writing reference file " + path);
}

ReferenceFile read_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("reference file not found: " + path);
  auto expect = [&](const char* key) {
    std::string word;
    if (!(in >> word) || word != key) throw std::runtime_error(path + ": expected '" + key + "' header");
  };
  int version = 0;
  expect("mlsg-reference");
  in >> version;
  if (version != 1) throw std::runtime_error(path + ": unsupported reference version");
  ReferenceFile ref;
  long long nodes = 0;
  std::string hex;
  expect("level");
  in >> ref.control.level;
  expect("h0");
  in >> ref.h0;
  expect("nodes");
  in >> nodes;
  expect("hash");
  in >> hex;
  if (!in || nodes <= 0) throw std::runtime_error(path + ": malformed header");
  ref.control.coeffs.resize(nodes);
  for (long long i = 0; i < nodes; ++i) {
    if (!(in >> ref.control.coeffs[i])) throw std::runtime_error(path + ": truncated value list");
  }
  ref.hash = content_hash(ref.control.coeffs);
  if (hash_hex(ref.hash) != hex) throw std::runtime_error(path + ": content hash mismatch");
  const int n = subdivisions(ref.control.level, ref.h0);
  if (static_cast<long long>(n + 1) * (n + 1) != nodes)
    throw std::runtime_error(path + ": node count does not match level");
  return ref;
}

}  // namespace mlsg
