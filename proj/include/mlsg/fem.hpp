#ifndef MLSG_FEM_HPP
#define MLSG_FEM_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace mlsg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using SparseSpd = Eigen::SparseMatrix<double>;
using CoefficientFn = std::function<double(Point)>;

// Uniform right-triangle mesh of the unit square at h = h0 * 2^-level. Every
// grid cell is split along its bottom-left to top-right diagonal, so meshes
// with the same h0 are nested.
class MeshLevel {
 public:
  MeshLevel(int level, double h0);

  int level() const { return level_; }
  double h() const { return h_; }
  int n() const { return n_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_interior() const { return interior_.size(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<bool>& boundary_mask() const { return boundary_; }
  // Global node index of every interior unknown, in reduced-system order.
  const std::vector<int>& interior_nodes() const { return interior_; }

  int node_index(int i, int j) const { return j * (n_ + 1) + i; }

 private:
  int level_;
  double h_;
  int n_;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<bool> boundary_;
  std::vector<int> interior_;
};

MeshLevel build_mesh(int level, double h0);

// Number of subdivisions per side at a level; throws unless 1/h0 is a power of two >= 2.
int subdivisions(int level, double h0);

// P1 function on one mesh level, stored as nodal values.
struct FeField {
  int level = 0;
  Eigen::VectorXd coeffs;

  static FeField zero(const MeshLevel& mesh) {
    return {mesh.level(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()))};
  }
};

FeField interpolate(const MeshLevel& mesh, const std::function<double(Point)>& fn);

// Unit-coefficient element stiffness of a triangle (gradients dotted, times area).
std::array<double, 9> element_stiffness(const Point& a, const Point& b, const Point& c);

SparseSpd assemble_stiffness(const MeshLevel& mesh, const CoefficientFn& coeff);
SparseSpd assemble_mass(const MeshLevel& mesh);

// Immutable per-level data shared by every solve: meshes, mass matrices and
// the reduced interior sparsity pattern used by fast per-sample assembly.
class MeshHierarchy {
 public:
  MeshHierarchy(double h0, int max_level);

  double h0() const { return h0_; }
  int max_level() const { return static_cast<int>(levels_.size()) - 1; }
  const MeshLevel& mesh(int level) const;
  const SparseSpd& mass(int level) const;

  struct ReducedPattern {
    SparseSpd pattern;                              // interior stiffness, unit coefficient
    std::vector<std::array<int, 9>> scatter;        // per triangle: value slot or -1
    std::vector<std::array<double, 9>> local;       // unit-coefficient element matrices
    std::vector<Point> centroids;
  };
  const ReducedPattern& reduced(int level) const;

 private:
  struct Level {
    MeshLevel mesh;
    SparseSpd mass;
    ReducedPattern reduced;
  };
  double h0_;
  std::vector<Level> levels_;
};

// Factorised homogeneous-Dirichlet system for one operator on one level.
class DirichletSolver {
 public:
  // Interior systems above this size use Jacobi-preconditioned CG instead of Cholesky.
  static constexpr std::size_t kDirectLimit = 300000;

  // Eliminates boundary rows/columns of a full stiffness matrix.
  DirichletSolver(const SparseSpd& stiffness, const MeshLevel& mesh);
  // Assembles the reduced operator directly from the level's cached pattern.
  DirichletSolver(const MeshHierarchy& hierarchy, int level, const CoefficientFn& coeff);

  // rhs is a full-length load vector; boundary entries are ignored.
  FeField solve(const Eigen::VectorXd& rhs) const;
  int level() const { return mesh_->level(); }

 private:
  void factorize(SparseSpd reduced);

  const MeshLevel* mesh_;
  SparseSpd reduced_;
  std::variant<Eigen::SimplicialLLT<SparseSpd>,
               Eigen::ConjugateGradient<SparseSpd, Eigen::Lower | Eigen::Upper,
                                        Eigen::DiagonalPreconditioner<double>>>
      solver_;
};

FeField solve_dirichlet(const SparseSpd& stiffness, const Eigen::VectorXd& rhs,
                        const MeshLevel& mesh);

// Nodal interpolation onto a finer nested level; exact for P1.
FeField prolong(const FeField& f, int target_level, double h0);
// Transpose of prolongation: maps a load vector tested against fine basis
// functions to the one tested against the coarse basis.
Eigen::VectorXd restrict_load(const Eigen::VectorXd& fine_load, int fine_level, int target_level,
                              double h0);

double l2_inner(const MeshHierarchy& hierarchy, const FeField& u, const FeField& v);
double l2_norm(const MeshHierarchy& hierarchy, const FeField& u);

// Brings two fields to the finer of their levels and returns the L2 norm of u - v.
double l2_distance(const MeshHierarchy& hierarchy, const FeField& u, const FeField& v);

}  // namespace mlsg

#endif  // MLSG_FEM_HPP
