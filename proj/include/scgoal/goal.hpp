#pragma once

#include <map>
#include <memory>
#include <string>

#include "scgoal/fem.hpp"
#include "scgoal/sparse_grid.hpp"

namespace scgoal {

struct GoalDescriptor {
  enum class Kind { linear_weight, second_moment, convection };
  Kind kind = Kind::linear_weight;
  WeightFn weight;
  double scale = 1.0;  // second_moment prefactor

  bool linear() const { return kind == Kind::linear_weight; }

  static GoalDescriptor linear_weight(WeightFn q) {
    return {Kind::linear_weight, std::move(q), 1.0};
  }
  static GoalDescriptor second_moment(WeightFn q, double scale) {
    return {Kind::second_moment, std::move(q), scale};
  }
  static GoalDescriptor convection(WeightFn q) {
    return {Kind::convection, std::move(q), 1.0};
  }
};

struct QoiRecord {
  double q_interp = 0.0;     // Q(u_SC)
  double f_dual = 0.0;       // F(z_SC)
  double b_form = 0.0;       // B(u_SC, z_SC)
  double q_corrected = 0.0;  // q_interp + f_dual - b_form
  enum class Path { affine_exact, quadrature } path = Path::affine_exact;
};

/// Map from collocation point to Galerkin coefficient vector on one mesh.
using SolutionMap = std::map<PointKey, FemVector>;

/// Per-mesh cache for evaluating one goal functional and its derivative.
class GoalContext {
 public:
  GoalContext(std::shared_ptr<const Mesh> mesh, GoalDescriptor goal);

  const GoalDescriptor& descriptor() const { return goal_; }
  const Mesh& mesh() const { return *mesh_; }
  const Eigen::VectorXd& weight_vector() const;  // entries int q*phi
  const SpMat& convection() const;

  double value(const FemVector& u) const;                       // Q(u)
  double derivative(const FemVector& u, const FemVector& v) const;  // <Q'(u), v>
  /// Dual right-hand side: Q(.) for linear goals, <Q'(u), .> otherwise.
  Eigen::VectorXd dual_load(const FemVector* u) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  GoalDescriptor goal_;
  mutable Eigen::VectorXd wvec_;  // filled in the constructor for the kinds that use it
  mutable SpMat conv_;
};

double qoi_on_interpolant(const GoalContext& goal, const CollocationGrid& grid,
                          const SolutionMap& primal);

double f_of_dual(const Mesh& mesh, const RhsDescriptor& rhs, const CollocationGrid& grid,
                 const SolutionMap& dual);

double bform_affine(const StiffnessCache& stiffness, const CollocationGrid& grid,
                    const SolutionMap& primal, const SolutionMap& dual);

double bform_quadrature(const StiffnessCache& stiffness, const CollocationGrid& grid,
                        const CollocationGrid& enriched, const SolutionMap& primal,
                        const SolutionMap& dual);

QoiRecord corrected_qoi(const GoalContext& goal, const RhsDescriptor& rhs,
                        const StiffnessCache& stiffness, const CollocationGrid& grid,
                        const CollocationGrid& enriched, const SolutionMap& primal,
                        const SolutionMap& dual);

}  // namespace scgoal
