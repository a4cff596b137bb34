#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <span>
#include <vector>

#include "scgoal/mesh.hpp"

namespace scgoal {

using SpMat = Eigen::SparseMatrix<double>;

/// Planar Fourier mode a*cos(2*pi*b1*x1)*cos(2*pi*b2*x2).
struct FourierMode {
  double amplitude;
  int beta1;
  int beta2;
};

enum class Transform { affine, exponential };

/// Diffusion coefficient a(x,y) = h(x,y) or exp(h(x,y)) with
/// h(x,y) = h0(x) + sum_m y_m h_m(x) over Fourier modes.
class CoefficientField {
 public:
  CoefficientField(Transform transform, std::vector<FourierMode> modes);

  Transform transform() const { return transform_; }
  int dimension() const { return static_cast<int>(modes_.size()) - 1; }  // M

  double mode_value(int m, Vec2 x) const;  // h_m(x), m = 0..M
  double h(Vec2 x, std::span<const double> y) const;
  double value(Vec2 x, std::span<const double> y) const;

 private:
  Transform transform_;
  std::vector<FourierMode> modes_;  // modes_[0] = h0
};

struct RhsDescriptor {
  enum class Kind { constant_one, div_field };
  Kind kind = Kind::constant_one;
  Polygon field_support;  // div_field: the triangle T_f

  static RhsDescriptor constant_one() { return {Kind::constant_one, {}}; }
  static RhsDescriptor div_field(Polygon tri) { return {Kind::div_field, std::move(tri)}; }
};

/// Goal weight q(x): normalized characteristic function of a resolved polygon
/// or a smooth bump of unit mass.
struct WeightFn {
  enum class Kind { indicator, mollifier };
  Kind kind = Kind::indicator;
  Polygon support;                 // indicator: q = chi_support / |support|
  Vec2 center{};                   // mollifier parameters
  double radius = 0.0;
  double moll_scale = 0.0;

  static WeightFn indicator(Polygon poly);
  static WeightFn mollifier(Vec2 center, double radius);

  double eval(Vec2 x) const;
};

/// Coefficient vector over the interior vertices of one specific mesh.
struct FemVector {
  Eigen::VectorXd coeffs;
  std::uint64_t mesh_id = 0;

  FemVector() = default;
  FemVector(Eigen::VectorXd c, std::uint64_t id) : coeffs(std::move(c)), mesh_id(id) {}
};

struct SolveOptions {
  double rtol = 1e-10;
  int max_iterations = 10000;
};

/// SPD solve with the residual contract ||Ax-b|| <= rtol*||b||. Small systems
/// use diagonally preconditioned CG; large ones a sparse LDLT factorization
/// (shared across right-hand sides), still verified against the contract.
class SpdSolver {
 public:
  explicit SpdSolver(const SpMat& A, const SolveOptions& opt = {});
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b, const Eigen::VectorXd& guess) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Samplewise stiffness matrices for one (mesh, coefficient) pair. For the
/// affine transform the per-mode matrices are assembled once and combined per
/// sample; the exponential transform assembles per sample.
class StiffnessCache {
 public:
  StiffnessCache(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const CoefficientField> coeff);

  const Mesh& mesh() const { return *mesh_; }
  const CoefficientField& coefficient() const { return *coeff_; }

  /// Mode-m stiffness (affine transform only), m = 0..M.
  const SpMat& mode_matrix(int m) const;
  /// Unit-coefficient stiffness (the H1 seminorm Gram matrix).
  const SpMat& unit_matrix() const;
  /// Full samplewise matrix; checks coefficient positivity at the quadrature
  /// points for the affine transform.
  SpMat matrix(std::span<const double> y) const;

  double min_sampled_coefficient(std::span<const double> y) const;

 private:
  SpMat assemble(int mode, bool unit) const;

  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const CoefficientField> coeff_;
  mutable std::vector<SpMat> modes_;
  mutable std::vector<char> mode_ready_;
  mutable SpMat unit_;
  mutable bool unit_ready_ = false;
  mutable std::vector<double> quad_mode_values_;  // (tri,quad) x (M+1), affine positivity
};

SpMat assemble_stiffness(const Mesh& mesh, const CoefficientField& coeff,
                         std::span<const double> y);

Eigen::VectorXd assemble_load(const Mesh& mesh, const RhsDescriptor& rhs);
Eigen::VectorXd weight_load(const Mesh& mesh, const WeightFn& q);  // entries int q*phi
SpMat convection_matrix(const Mesh& mesh, const WeightFn& q);

Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& b, const SolveOptions& = {});
Eigen::VectorXd solve_spd_guess(const SpMat& A, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& guess, const SolveOptions& = {});

double h1_inner(const Mesh& mesh, const FemVector& u, const FemVector& v);
double weighted_integral(const Mesh& mesh, const WeightFn& q, const FemVector& u);
double convection_pair(const Mesh& mesh, const WeightFn& q, const FemVector& u,
                       const FemVector& v);

/// P1 nodal interpolation onto the bisection refinement of the mesh.
FemVector prolong(const Mesh& coarse, const RefineResult& fine, const FemVector& u);

/// Everything needed to evaluate two-level indicators on a mesh: the fine hat
/// functions at detail nodes, their energy norms, and local integrals of the
/// sampled coefficient over the bisection children.
class TwoLevelContext {
 public:
  TwoLevelContext(std::shared_ptr<const Mesh> mesh,
                  std::shared_ptr<const CoefficientField> coeff);

  const DetailNodeSet& details() const { return details_; }
  int node_count() const { return static_cast<int>(details_.nodes.size()); }
  double hat_norm(int i) const { return hat_norms_[i]; }

  /// F(hat_xi) for the PDE right-hand side.
  std::vector<double> hat_loads(const RhsDescriptor& rhs) const;
  /// int q * hat_xi for a weight function.
  std::vector<double> hat_loads(const WeightFn& q) const;
  /// <Q'(u), hat_xi> for the convection goal (q indicator).
  std::vector<double> hat_loads_convection(const WeightFn& q, const FemVector& u) const;

  /// |load_xi - B_y(u, hat_xi)| for every detail node.
  std::vector<double> residual_numerators(std::span<const double> y, const FemVector& u,
                                          const std::vector<double>& loads) const;

  /// Single-node variant: (numerator, hat_norm).
  std::pair<double, double> two_level_residual(std::span<const double> y, const FemVector& u,
                                               const std::vector<double>& loads, int node) const;

 private:
  struct Child {
    int coarse_tri;
    double area;
    Vec2 grad_hat;
    std::array<Vec2, 3> pts;
    std::array<double, 3> hat_vals;
  };
  struct NodeCtx {
    std::vector<Child> children;
  };

  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const CoefficientField> coeff_;
  std::vector<NodeCtx> nodes_;
  std::vector<double> hat_norms_;
  DetailNodeSet details_;
  // Affine path: per child, integrals of every mode over the child.
  std::vector<std::vector<std::vector<double>>> child_mode_integrals_;
};

}  // namespace scgoal
