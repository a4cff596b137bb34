#include "scgoal/goal.hpp"

#include <stdexcept>

namespace scgoal {

namespace {

const FemVector& at(const SolutionMap& m, const PointKey& key, const char* what) {
  auto it = m.find(key);
  if (it == m.end()) throw std::runtime_error(std::string(what) + ": missing solution value");
  return it->second;
}

}  // namespace

GoalContext::GoalContext(std::shared_ptr<const Mesh> mesh, GoalDescriptor goal)
    : mesh_(std::move(mesh)), goal_(std::move(goal)) {
  if (goal_.kind == GoalDescriptor::Kind::second_moment && goal_.scale <= 0.0)
    throw std::invalid_argument("goal: second-moment scale must be positive");
  // Built eagerly: evaluation runs concurrently across collocation points.
  if (goal_.kind == GoalDescriptor::Kind::convection)
    conv_ = convection_matrix(*mesh_, goal_.weight);
  else
    wvec_ = weight_load(*mesh_, goal_.weight);
}

const Eigen::VectorXd& GoalContext::weight_vector() const {
  if (wvec_.size() == 0) wvec_ = weight_load(*mesh_, goal_.weight);
  return wvec_;
}

const SpMat& GoalContext::convection() const {
  if (conv_.rows() == 0) conv_ = convection_matrix(*mesh_, goal_.weight);
  return conv_;
}

double GoalContext::value(const FemVector& u) const {
  if (u.mesh_id != mesh_->id()) throw std::invalid_argument("goal: mesh mismatch");
  switch (goal_.kind) {
    case GoalDescriptor::Kind::linear_weight:
      return weight_vector().dot(u.coeffs);
    case GoalDescriptor::Kind::second_moment: {
      const double g = weight_vector().dot(u.coeffs);
      return goal_.scale * g * g;
    }
    case GoalDescriptor::Kind::convection:
      return u.coeffs.dot(convection() * u.coeffs);
  }
  return 0.0;
}

double GoalContext::derivative(const FemVector& u, const FemVector& v) const {
  switch (goal_.kind) {
    case GoalDescriptor::Kind::linear_weight:
      return weight_vector().dot(v.coeffs);
    case GoalDescriptor::Kind::second_moment:
      return 2.0 * goal_.scale * weight_vector().dot(u.coeffs) * weight_vector().dot(v.coeffs);
    case GoalDescriptor::Kind::convection:
      return v.coeffs.dot(convection() * u.coeffs) + u.coeffs.dot(convection() * v.coeffs);
  }
  return 0.0;
}

Eigen::VectorXd GoalContext::dual_load(const FemVector* u) const {
  if (goal_.linear()) return weight_vector();
  if (u == nullptr)
    throw std::invalid_argument("dual_load: nonlinear goal needs the primal sample");
  if (u->mesh_id != mesh_->id()) throw std::invalid_argument("dual_load: mesh mismatch");
  if (goal_.kind == GoalDescriptor::Kind::second_moment)
    return 2.0 * goal_.scale * weight_vector().dot(u->coeffs) * weight_vector();
  return convection() * u->coeffs + convection().transpose() * u->coeffs;
}

double qoi_on_interpolant(const GoalContext& goal, const CollocationGrid& grid,
                          const SolutionMap& primal) {
  const int n = grid.size();
  switch (goal.descriptor().kind) {
    case GoalDescriptor::Kind::linear_weight: {
      double s = 0.0;
      for (int p = 0; p < n; ++p)
        s += goal.value(at(primal, grid.point(p).key, "qoi")) * grid.mean(p);
      return s;
    }
    case GoalDescriptor::Kind::second_moment: {
      std::vector<double> g(n);
      for (int p = 0; p < n; ++p)
        g[p] = goal.weight_vector().dot(at(primal, grid.point(p).key, "qoi").coeffs);
      double s = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) s += g[p] * g[q] * grid.gram(p, q);
      return goal.descriptor().scale * s;
    }
    case GoalDescriptor::Kind::convection: {
      std::vector<const FemVector*> u(n);
      std::vector<Eigen::VectorXd> Bu(n);
      for (int p = 0; p < n; ++p) {
        u[p] = &at(primal, grid.point(p).key, "qoi");
        Bu[p] = goal.convection() * u[p]->coeffs;
      }
      double s = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) s += u[p]->coeffs.dot(Bu[q]) * grid.gram(p, q);
      return s;
    }
  }
  return 0.0;
}

double f_of_dual(const Mesh& mesh, const RhsDescriptor& rhs, const CollocationGrid& grid,
                 const SolutionMap& dual) {
  const Eigen::VectorXd load = assemble_load(mesh, rhs);
  double s = 0.0;
  for (int p = 0; p < grid.size(); ++p)
    s += load.dot(at(dual, grid.point(p).key, "f_of_dual").coeffs) * grid.mean(p);
  return s;
}

double bform_affine(const StiffnessCache& stiffness, const CollocationGrid& grid,
                    const SolutionMap& primal, const SolutionMap& dual) {
  if (stiffness.coefficient().transform() != Transform::affine)
    throw std::invalid_argument("bform_affine: coefficient is not affine");
  const int n = grid.size();
  const int M = stiffness.coefficient().dimension();
  std::vector<const FemVector*> u(n), z(n);
  for (int p = 0; p < n; ++p) {
    u[p] = &at(primal, grid.point(p).key, "bform");
    z[p] = &at(dual, grid.point(p).key, "bform");
  }
  double s = 0.0;
  for (int m = 0; m <= M; ++m) {
    const SpMat& Am = stiffness.mode_matrix(m);
    std::vector<Eigen::VectorXd> Az(n);
    for (int q = 0; q < n; ++q) Az[q] = Am * z[q]->coeffs;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        const double gram = m == 0 ? grid.gram(p, q) : grid.weighted_gram(m, p, q);
        if (gram != 0.0) s += u[p]->coeffs.dot(Az[q]) * gram;
      }
  }
  return s;
}

double bform_quadrature(const StiffnessCache& stiffness, const CollocationGrid& grid,
                        const CollocationGrid& enriched, const SolutionMap& primal,
                        const SolutionMap& dual) {
  if (enriched.size() <= grid.size())
    throw std::invalid_argument("bform_quadrature: quadrature grid must be enriched");
  const int n = grid.size();
  std::vector<const FemVector*> u(n), z(n);
  for (int p = 0; p < n; ++p) {
    u[p] = &at(primal, grid.point(p).key, "bform");
    z[p] = &at(dual, grid.point(p).key, "bform");
  }
  double s = 0.0;
  for (int e = 0; e < enriched.size(); ++e) {
    const GridPoint& pt = enriched.point(e);
    const double w = enriched.mean(e);
    const SpMat A = stiffness.matrix(pt.coords);
    const int base_id = grid.find(pt.key);
    if (base_id >= 0) {
      s += w * u[base_id]->coeffs.dot(A * z[base_id]->coeffs);
    } else {
      const auto L = grid.basis_at(pt.coords);
      Eigen::VectorXd ui = Eigen::VectorXd::Zero(u[0]->coeffs.size());
      Eigen::VectorXd zi = Eigen::VectorXd::Zero(ui.size());
      for (int p = 0; p < n; ++p) {
        if (L[p] != 0.0) {
          ui += L[p] * u[p]->coeffs;
          zi += L[p] * z[p]->coeffs;
        }
      }
      s += w * ui.dot(A * zi);
    }
  }
  return s;
}

QoiRecord corrected_qoi(const GoalContext& goal, const RhsDescriptor& rhs,
                        const StiffnessCache& stiffness, const CollocationGrid& grid,
                        const CollocationGrid& enriched, const SolutionMap& primal,
                        const SolutionMap& dual) {
  QoiRecord rec;
  rec.q_interp = qoi_on_interpolant(goal, grid, primal);
  rec.f_dual = f_of_dual(stiffness.mesh(), rhs, grid, dual);
  const bool affine = stiffness.coefficient().transform() == Transform::affine;
  rec.path = affine ? QoiRecord::Path::affine_exact : QoiRecord::Path::quadrature;
  rec.b_form = affine ? bform_affine(stiffness, grid, primal, dual)
                      : bform_quadrature(stiffness, grid, enriched, primal, dual);
  rec.q_corrected = rec.q_interp + rec.f_dual - rec.b_form;
  return rec;
}

}  // namespace scgoal
