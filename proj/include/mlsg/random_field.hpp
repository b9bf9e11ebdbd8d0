#ifndef MLSG_RANDOM_FIELD_HPP
#define MLSG_RANDOM_FIELD_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mlsg/fem.hpp"

namespace mlsg {

// One realisation of the four uniform parameters, each in [-1, 1].
struct SampleVector {
  std::array<double, 4> xi{};

  static SampleVector zero() { return {}; }
  bool operator==(const SampleVector&) const = default;
};

// Parametric diffusion coefficient a(x, xi). Only the four-mode field ships.
class RandomField {
 public:
  virtual ~RandomField() = default;
  virtual double eval(const SampleVector& xi, Point x) const = 0;
  // Lower and upper bounds over the whole parameter box.
  virtual double lower_bound() const = 0;
  virtual double upper_bound() const = 0;
};

// a = 1 + exp(var * (xi1 cos(1.1 pi x) + xi2 cos(1.2 pi x) + xi3 sin(1.3 pi y) + xi4 sin(1.4 pi y)))
// with var = exp(-1.125).
class FourModeField final : public RandomField {
 public:
  static double variance_scale();
  double eval(const SampleVector& xi, Point x) const override;
  double lower_bound() const override;
  double upper_bound() const override;
};

double eval_coeff(const SampleVector& xi, Point x);

// Stream derivation key. A draw is a pure function of the full tuple, so
// results do not depend on execution order.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t repetition = 0;
  std::uint64_t iteration = 0;
  std::int64_t level = 0;
  std::uint64_t index = 0;
};

// Reserved level slot for the randomized estimator's level draw.
inline constexpr std::int64_t kLevelDrawSlot = -1;

class RandomStream {
 public:
  explicit RandomStream(const StreamKey& key);
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

SampleVector sample_xi(RandomStream& stream);

// Source of the realisation for sample `index` of level `level` within one
// estimator call.
using XiSource = std::function<SampleVector(int level, std::uint64_t index)>;

XiSource keyed_xi_source(std::uint64_t seed, std::uint64_t repetition, std::uint64_t iteration);

struct QuadratureGrid {
  std::vector<SampleVector> nodes;
  std::vector<double> weights;  // probability weights, sum to 1
};

// 1D Gauss-Legendre nodes and weights on [-1, 1] (weights sum to 2).
void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights);

// Tensor Gauss-Legendre grid over [-1,1]^4 with weights for the uniform measure.
QuadratureGrid gl_grid(int q);

}  // namespace mlsg

#endif  // MLSG_RANDOM_FIELD_HPP
