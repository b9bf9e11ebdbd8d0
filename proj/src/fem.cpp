#include "mlsg/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mlsg {

int subdivisions(int level, double h0) {
  if (level < 0) throw std::invalid_argument("mesh level must be nonnegative");
  if (!(h0 > 0.0) || !std::isfinite(h0)) throw std::invalid_argument("h0 must be positive");
  const double inv = 1.0 / h0;
  const int k = static_cast<int>(std::lround(std::log2(inv)));
  if (k < 1 || std::abs(inv - std::ldexp(1.0, k)) > 1e-12 * inv) {
    throw std::invalid_argument("h0 must be 2^-k with k >= 1, got " + std::to_string(h0));
  }
  if (k + level > 24) throw std::invalid_argument("mesh level too fine");
  return 1 << (k + level);
}

MeshLevel::MeshLevel(int level, double h0) : level_(level), n_(subdivisions(level, h0)) {
  h_ = 1.0 / n_;
  const int np = n_ + 1;
  nodes_.reserve(static_cast<std::size_t>(np) * np);
  boundary_.reserve(static_cast<std::size_t>(np) * np);
  for (int j = 0; j <= n_; ++j) {
    for (int i = 0; i <= n_; ++i) {
      nodes_.push_back({i * h_, j * h_});
      const bool on_boundary = i == 0 || j == 0 || i == n_ || j == n_;
      boundary_.push_back(on_boundary);
      if (!on_boundary) interior_.push_back(node_index(i, j));
    }
  }
  triangles_.reserve(2 * static_cast<std::size_t>(n_) * n_);
  for (int j = 0; j < n_; ++j) {
    for (int i = 0; i < n_; ++i) {
      const int bl = node_index(i, j), br = node_index(i + 1, j);
      const int tl = node_index(i, j + 1), tr = node_index(i + 1, j + 1);
      triangles_.push_back({bl, br, tr});
      triangles_.push_back({bl, tr, tl});
    }
  }
}

MeshLevel build_mesh(int level, double h0) { return MeshLevel(level, h0); }

FeField interpolate(const MeshLevel& mesh, const std::function<double(Point)>& fn) {
  FeField f = FeField::zero(mesh);
  for (std::size_t k = 0; k < mesh.num_nodes(); ++k) f.coeffs[static_cast<Eigen::Index>(k)] = fn(mesh.nodes()[k]);
  return f;
}

std::array<double, 9> element_stiffness(const Point& a, const Point& b, const Point& c) {
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const double area = 0.5 * det;
  const std::array<Point, 3> p{a, b, c};
  std::array<double, 3> gx{}, gy{};
  for (int i = 0; i < 3; ++i) {
    const Point& q1 = p[(i + 1) % 3];
    const Point& q2 = p[(i + 2) % 3];
    gx[i] = (q1.y - q2.y) / det;
    gy[i] = (q2.x - q1.x) / det;
  }
  std::array<double, 9> k{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[3 * i + j] = area * (gx[i] * gx[j] + gy[i] * gy[j]);
  return k;
}

namespace {

Point centroid(const MeshLevel& mesh, const std::array<int, 3>& tri) {
  const auto& n = mesh.nodes();
  return {(n[tri[0]].x + n[tri[1]].x + n[tri[2]].x) / 3.0,
          (n[tri[0]].y + n[tri[1]].y + n[tri[2]].y) / 3.0};
}

double checked_coefficient(const CoefficientFn& coeff, Point at) {
  const double a = coeff(at);
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::domain_error("diffusion coefficient must be positive, got " + std::to_string(a));
  }
  return a;
}

std::vector<int> reduced_index(const MeshLevel& mesh) {
  std::vector<int> red(mesh.num_nodes(), -1);
  const auto& interior = mesh.interior_nodes();
  for (std::size_t k = 0; k < interior.size(); ++k) red[interior[k]] = static_cast<int>(k);
  return red;
}

}  // namespace

SparseSpd assemble_stiffness(const MeshLevel& mesh, const CoefficientFn& coeff) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.triangles().size());
  const auto& nodes = mesh.nodes();
  for (const auto& tri : mesh.triangles()) {
    const double a = checked_coefficient(coeff, centroid(mesh, tri));
    const auto k = element_stiffness(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) triplets.emplace_back(tri[i], tri[j], a * k[3 * i + j]);
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  SparseSpd stiffness(n, n);
  stiffness.setFromTriplets(triplets.begin(), triplets.end());
  return stiffness;
}

SparseSpd assemble_mass(const MeshLevel& mesh) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.triangles().size());
  const auto& nodes = mesh.nodes();
  for (const auto& tri : mesh.triangles()) {
    const Point &a = nodes[tri[0]], &b = nodes[tri[1]], &c = nodes[tri[2]];
    const double area = 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        triplets.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  SparseSpd mass(n, n);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  return mass;
}

MeshHierarchy::MeshHierarchy(double h0, int max_level) : h0_(h0) {
  if (max_level < 0) throw std::invalid_argument("max_level must be nonnegative");
  levels_.reserve(static_cast<std::size_t>(max_level) + 1);
  for (int l = 0; l <= max_level; ++l) {
    MeshLevel mesh(l, h0);
    SparseSpd mass = assemble_mass(mesh);

    ReducedPattern reduced;
    const auto red = reduced_index(mesh);
    const auto& nodes = mesh.nodes();
    const auto ni = static_cast<Eigen::Index>(mesh.num_interior());
    std::vector<Eigen::Triplet<double>> triplets;
    reduced.local.reserve(mesh.triangles().size());
    reduced.centroids.reserve(mesh.triangles().size());
    for (const auto& tri : mesh.triangles()) {
      reduced.local.push_back(element_stiffness(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]));
      reduced.centroids.push_back(centroid(mesh, tri));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (red[tri[i]] >= 0 && red[tri[j]] >= 0)
            triplets.emplace_back(red[tri[i]], red[tri[j]], reduced.local.back()[3 * i + j]);
    }
    reduced.pattern.resize(ni, ni);
    reduced.pattern.setFromTriplets(triplets.begin(), triplets.end());
    reduced.pattern.makeCompressed();

    const int* outer = reduced.pattern.outerIndexPtr();
    const int* inner = reduced.pattern.innerIndexPtr();
    reduced.scatter.reserve(mesh.triangles().size());
    for (const auto& tri : mesh.triangles()) {
      std::array<int, 9> slots{};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const int r = red[tri[i]], c = red[tri[j]];
          if (r < 0 || c < 0) {
            slots[3 * i + j] = -1;
            continue;
          }
          const int* pos = std::lower_bound(inner + outer[c], inner + outer[c + 1], r);
          slots[3 * i + j] = static_cast<int>(pos - inner);
        }
      }
      reduced.scatter.push_back(slots);
    }
    levels_.push_back({std::move(mesh), std::move(mass), std::move(reduced)});
  }
}

const MeshLevel& MeshHierarchy::mesh(int level) const {
  if (level < 0 || level > max_level())
    throw std::out_of_range("level " + std::to_string(level) + " outside mesh hierarchy");
  return levels_[static_cast<std::size_t>(level)].mesh;
}

const SparseSpd& MeshHierarchy::mass(int level) const {
  mesh(level);
  return levels_[static_cast<std::size_t>(level)].mass;
}

const MeshHierarchy::ReducedPattern& MeshHierarchy::reduced(int level) const {
  mesh(level);
  return levels_[static_cast<std::size_t>(level)].reduced;
}

DirichletSolver::DirichletSolver(const SparseSpd& stiffness, const MeshLevel& mesh) : mesh_(&mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  if (stiffness.rows() != n || stiffness.cols() != n)
    throw std::invalid_argument("stiffness dimension does not match mesh");
  const auto red = reduced_index(mesh);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(stiffness.nonZeros()));
  for (Eigen::Index c = 0; c < stiffness.outerSize(); ++c) {
    for (SparseSpd::InnerIterator it(stiffness, c); it; ++it) {
      const int r2 = red[static_cast<std::size_t>(it.row())], c2 = red[static_cast<std::size_t>(it.col())];
      if (r2 >= 0 && c2 >= 0) triplets.emplace_back(r2, c2, it.value());
    }
  }
  const auto ni = static_cast<Eigen::Index>(mesh.num_interior());
  SparseSpd reduced(ni, ni);
  reduced.setFromTriplets(triplets.begin(), triplets.end());
  factorize(std::move(reduced));
}

DirichletSolver::DirichletSolver(const MeshHierarchy& hierarchy, int level, const CoefficientFn& coeff)
    : mesh_(&hierarchy.mesh(level)) {
  const auto& rp = hierarchy.reduced(level);
  SparseSpd reduced = rp.pattern;
  double* values = reduced.valuePtr();
  std::fill(values, values + reduced.nonZeros(), 0.0);
  for (std::size_t t = 0; t < rp.scatter.size(); ++t) {
    const double a = checked_coefficient(coeff, rp.centroids[t]);
    const auto& slots = rp.scatter[t];
    const auto& k = rp.local[t];
    for (int e = 0; e < 9; ++e)
      if (slots[e] >= 0) values[slots[e]] += a * k[e];
  }
  factorize(std::move(reduced));
}

void DirichletSolver::factorize(SparseSpd reduced) {
  reduced_ = std::move(reduced);
  if (reduced_.rows() == 0) return;
  if (static_cast<std::size_t>(reduced_.rows()) > kDirectLimit) {
    auto& cg = solver_.emplace<1>();
    cg.setTolerance(1e-10);
    cg.setMaxIterations(static_cast<Eigen::Index>(10 * reduced_.rows()));
    cg.compute(reduced_);
    if (cg.info() != Eigen::Success) throw std::runtime_error("CG setup failed");
    return;
  }
  auto& llt = solver_.emplace<0>();
  llt.compute(reduced_);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Cholesky breakdown: operator is not SPD after Dirichlet elimination");
}

FeField DirichletSolver::solve(const Eigen::VectorXd& rhs) const {
  const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
  if (rhs.size() != n) throw std::invalid_argument("rhs length does not match mesh");
  FeField out = FeField::zero(*mesh_);
  const auto& interior = mesh_->interior_nodes();
  if (interior.empty()) return out;
  Eigen::VectorXd b(static_cast<Eigen::Index>(interior.size()));
  for (std::size_t k = 0; k < interior.size(); ++k) b[static_cast<Eigen::Index>(k)] = rhs[interior[k]];
  Eigen::VectorXd x;
  if (solver_.index() == 0) {
    x = std::get<0>(solver_).solve(b);
  } else {
    const auto& cg = std::get<1>(solver_);
    x = cg.solve(b);
    if (cg.info() != Eigen::Success) throw std::runtime_error("CG did not converge");
  }
  for (std::size_t k = 0; k < interior.size(); ++k) out.coeffs[interior[k]] = x[static_cast<Eigen::Index>(k)];
  return out;
}

FeField solve_dirichlet(const SparseSpd& stiffness, const Eigen::VectorXd& rhs, const MeshLevel& mesh) {
  return DirichletSolver(stiffness, mesh).solve(rhs);
}

namespace {

Eigen::VectorXd prolong_once(const Eigen::VectorXd& coarse, int nc) {
  const int nf = 2 * nc;
  const int cp = nc + 1, fp = nf + 1;
  Eigen::VectorXd fine(static_cast<Eigen::Index>(fp) * fp);
  auto c = [&](int i, int j) { return coarse[j * cp + i]; };
  for (int J = 0; J <= nf; ++J) {
    for (int I = 0; I <= nf; ++I) {
      double v;
      if (I % 2 == 0 && J % 2 == 0) {
        v = c(I / 2, J / 2);
      } else if (J % 2 == 0) {
        v = 0.5 * (c((I - 1) / 2, J / 2) + c((I + 1) / 2, J / 2));
      } else if (I % 2 == 0) {
        v = 0.5 * (c(I / 2, (J - 1) / 2) + c(I / 2, (J + 1) / 2));
      } else {
        // midpoint of the coarse cell diagonal
        v = 0.5 * (c((I - 1) / 2, (J - 1) / 2) + c((I + 1) / 2, (J + 1) / 2));
      }
      fine[J * fp + I] = v;
    }
  }
  return fine;
}

Eigen::VectorXd restrict_once(const Eigen::VectorXd& fine, int nc) {
  const int nf = 2 * nc;
  const int cp = nc + 1, fp = nf + 1;
  Eigen::VectorXd coarse = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cp) * cp);
  auto c = [&](int i, int j) -> double& { return coarse[j * cp + i]; };
  for (int J = 0; J <= nf; ++J) {
    for (int I = 0; I <= nf; ++I) {
      const double v = fine[J * fp + I];
      if (I % 2 == 0 && J % 2 == 0) {
        c(I / 2, J / 2) += v;
      } else if (J % 2 == 0) {
        c((I - 1) / 2, J / 2) += 0.5 * v;
        c((I + 1) / 2, J / 2) += 0.5 * v;
      } else if (I % 2 == 0) {
        c(I / 2, (J - 1) / 2) += 0.5 * v;
        c(I / 2, (J + 1) / 2) += 0.5 * v;
      } else {
        c((I - 1) / 2, (J - 1) / 2) += 0.5 * v;
        c((I + 1) / 2, (J + 1) / 2) += 0.5 * v;
      }
    }
  }
  return coarse;
}

void check_length(const Eigen::VectorXd& v, int level, double h0) {
  const auto np = static_cast<Eigen::Index>(subdivisions(level, h0) + 1);
  if (v.size() != np * np)
    throw std::invalid_argument("field length does not match level " + std::to_string(level));
}

}  // namespace

FeField prolong(const FeField& f, int target_level, double h0) {
  if (target_level < f.level)
    throw std::invalid_argument("cannot prolong from level " + std::to_string(f.level) + " to " +
                                std::to_string(target_level));
  check_length(f.coeffs, f.level, h0);
  FeField out = f;
  while (out.level < target_level) {
    out.coeffs = prolong_once(out.coeffs, subdivisions(out.level, h0));
    ++out.level;
  }
  return out;
}

Eigen::VectorXd restrict_load(const Eigen::VectorXd& fine_load, int fine_level, int target_level,
                              double h0) {
  if (target_level > fine_level) throw std::invalid_argument("restriction target is finer than source");
  check_length(fine_load, fine_level, h0);
  Eigen::VectorXd out = fine_load;
  for (int l = fine_level; l > target_level; --l) out = restrict_once(out, subdivisions(l - 1, h0));
  return out;
}

double l2_inner(const MeshHierarchy& hierarchy, const FeField& u, const FeField& v) {
  if (u.level != v.level) throw std::invalid_argument("l2_inner: level mismatch");
  const SparseSpd& mass = hierarchy.mass(u.level);
  if (u.coeffs.size() != mass.rows() || v.coeffs.size() != mass.rows())
    throw std::invalid_argument("l2_inner: field length does not match level");
  return u.coeffs.dot(mass * v.coeffs);
}

double l2_norm(const MeshHierarchy& hierarchy, const FeField& u) {
  return std::sqrt(std::max(0.0, l2_inner(hierarchy, u, u)));
}

double l2_distance(const MeshHierarchy& hierarchy, const FeField& u, const FeField& v) {
  const int level = std::max(u.level, v.level);
  FeField diff = prolong(u, level, hierarchy.h0());
  diff.coeffs -= prolong(v, level, hierarchy.h0()).coeffs;
  return l2_norm(hierarchy, diff);
}

}  // namespace mlsg
