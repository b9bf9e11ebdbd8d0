#include "mlsg/random_field.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlsg {

double FourModeField::variance_scale() { return std::exp(-1.125); }

double FourModeField::eval(const SampleVector& s, Point x) const {
  constexpr double pi = std::numbers::pi;
  const auto& xi = s.xi;
  const double arg = xi[0] * std::cos(1.1 * pi * x.x) + xi[1] * std::cos(1.2 * pi * x.x) +
                     xi[2] * std::sin(1.3 * pi * x.y) + xi[3] * std::sin(1.4 * pi * x.y);
  return 1.0 + std::exp(variance_scale() * arg);
}

// |argument| <= 4 since each mode is bounded by one.
double FourModeField::lower_bound() const { return 1.0 + std::exp(-4.0 * variance_scale()); }
double FourModeField::upper_bound() const { return 1.0 + std::exp(4.0 * variance_scale()); }

double eval_coeff(const SampleVector& xi, Point x) {
  static const FourModeField field;
  return field.eval(xi, x);
}

RandomStream::RandomStream(const StreamKey& key) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  const auto level = static_cast<std::uint64_t>(key.level);
  std::seed_seq seq{lo(key.seed),      hi(key.seed),      lo(key.repetition), hi(key.repetition),
                    lo(key.iteration), hi(key.iteration), lo(level),          hi(level),
                    lo(key.index),     hi(key.index)};
  engine_.seed(seq);
}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

SampleVector sample_xi(RandomStream& stream) {
  SampleVector s;
  for (double& v : s.xi) v = stream.uniform(-1.0, 1.0);
  return s;
}

XiSource keyed_xi_source(std::uint64_t seed, std::uint64_t repetition, std::uint64_t iteration) {
  return [=](int level, std::uint64_t index) {
    RandomStream stream({seed, repetition, iteration, level, index});
    return sample_xi(stream);
  };
}

void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights) {
  if (q <= 0) throw std::invalid_argument("Gauss-Legendre order must be positive");
  nodes.assign(static_cast<std::size_t>(q), 0.0);
  weights.assign(static_cast<std::size_t>(q), 0.0);
  for (int i = 0; i < (q + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      // three-term recurrence for P_q and its derivative
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double pq = q == 1 ? x : p1;
      const double pqm1 = q == 1 ? 1.0 : p0;
      dp = q * (x * pq - pqm1) / (x * x - 1.0);
      const double dx = pq / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= q; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    const double pq = q == 1 ? x : p1;
    const double pqm1 = q == 1 ? 1.0 : p0;
    dp = q * (x * pq - pqm1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(q - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(q - 1 - i)] = w;
  }
  if (q % 2 == 1) nodes[static_cast<std::size_t>(q / 2)] = 0.0;
}

QuadratureGrid gl_grid(int q) {
  std::vector<double> x, w;
  gauss_legendre(q, x, w);
  QuadratureGrid grid;
  const std::size_t m = x.size();
  grid.nodes.reserve(m * m * m * m);
  grid.weights.reserve(m * m * m * m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t c = 0; c < m; ++c)
        for (std::size_t d = 0; d < m; ++d) {
          grid.nodes.push_back({{x[a], x[b], x[c], x[d]}});
          grid.weights.push_back(w[a] * w[b] * w[c] * w[d] / 16.0);
        }
  return grid;
}

}  // namespace mlsg
