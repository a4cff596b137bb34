#include "scgoal/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "scgoal/parallel.hpp"

namespace scgoal {

namespace {

const FemVector& at(const SolutionMap& m, const PointKey& key, const char* what) {
  auto it = m.find(key);
  if (it == m.end()) throw std::runtime_error(std::string(what) + ": missing solution value");
  return it->second;
}

}  // namespace

std::vector<PointIndicatorBlock> spatial_indicators(
    const TwoLevelContext& ctx, const GoalContext& goal, const RhsDescriptor& rhs,
    const CollocationGrid& grid, const SolutionMap& primal, const SolutionMap& dual,
    int threads) {
  const int n = grid.size();
  const int nodes = ctx.node_count();
  std::vector<PointIndicatorBlock> out(n);

  const std::vector<double> rhs_loads = ctx.hat_loads(rhs);
  // Dual hat loads: fixed for linear and second-moment goals (the latter up to
  // a per-sample scalar), per-sample for the convection goal.
  std::vector<double> weight_loads;
  if (goal.descriptor().kind != GoalDescriptor::Kind::convection)
    weight_loads = ctx.hat_loads(goal.descriptor().weight);

  parallel_for(n, threads, [&](int p) {
    PointIndicatorBlock& blk = out[p];
    blk.key = grid.point(p).key;
    blk.L_norm = grid.l2norm(p);
    const auto& y = grid.point(p).coords;
    const FemVector& u = at(primal, blk.key, "spatial_indicators");
    const FemVector& z = at(dual, blk.key, "spatial_indicators");

    std::vector<double> dual_loads;
    switch (goal.descriptor().kind) {
      case GoalDescriptor::Kind::linear_weight:
        dual_loads = weight_loads;
        break;
      case GoalDescriptor::Kind::second_moment: {
        const double c = 2.0 * goal.descriptor().scale * goal.weight_vector().dot(u.coeffs);
        dual_loads.resize(nodes);
        for (int i = 0; i < nodes; ++i) dual_loads[i] = c * weight_loads[i];
        break;
      }
      case GoalDescriptor::Kind::convection:
        dual_loads = ctx.hat_loads_convection(goal.descriptor().weight, u);
        break;
    }

    blk.mu_local = ctx.residual_numerators(y, u, rhs_loads);
    blk.eta_local = ctx.residual_numerators(y, z, dual_loads);
    double mu2 = 0.0, eta2 = 0.0;
    for (int i = 0; i < nodes; ++i) {
      blk.mu_local[i] /= ctx.hat_norm(i);
      blk.eta_local[i] /= ctx.hat_norm(i);
      mu2 += blk.mu_local[i] * blk.mu_local[i];
      eta2 += blk.eta_local[i] * blk.eta_local[i];
    }
    blk.mu = std::sqrt(mu2);
    blk.eta = std::sqrt(eta2);
  });
  return out;
}

std::vector<ParamIndicatorBlock> parametric_indicators(
    const SpMat& unit_stiffness, const CollocationGrid& grid,
    const CollocationGrid& enriched, const SolutionMap& primal, const SolutionMap& dual) {
  std::vector<ParamIndicatorBlock> out;
  const int n = grid.size();
  std::vector<const FemVector*> u(n), z(n);
  for (int p = 0; p < n; ++p) {
    u[p] = &at(primal, grid.point(p).key, "parametric_indicators");
    z[p] = &at(dual, grid.point(p).key, "parametric_indicators");
  }
  auto xnorm = [&](const Eigen::VectorXd& d) { return std::sqrt(d.dot(unit_stiffness * d)); };

  for (const MultiIndex& nu : reduced_margin(grid.index_set())) {
    ParamIndicatorBlock blk;
    blk.nu = nu;
    for (const GridPoint& gp : new_points(grid, nu)) {
      const int eid = enriched.find(gp.key);
      if (eid < 0)
        throw std::logic_error("parametric_indicators: generated point missing from enriched grid");
      const double Lhat = enriched.l2norm(eid);
      const auto L = grid.basis_at(gp.coords);
      Eigen::VectorXd du = at(primal, gp.key, "parametric_indicators").coeffs;
      Eigen::VectorXd dz = at(dual, gp.key, "parametric_indicators").coeffs;
      for (int p = 0; p < n; ++p) {
        if (L[p] != 0.0) {
          du -= L[p] * u[p]->coeffs;
          dz -= L[p] * z[p]->coeffs;
        }
      }
      blk.tau += xnorm(du) * Lhat;
      blk.sigma += xnorm(dz) * Lhat;
    }
    out.push_back(std::move(blk));
  }
  return out;
}

void cumulative(EstimatorReport& report) {
  report.mu_bar = report.eta_bar = report.tau_bar = report.sigma_bar = 0.0;
  for (const PointIndicatorBlock& blk : report.spatial) {
    report.mu_bar += blk.mu * blk.L_norm;
    report.eta_bar += blk.eta * blk.L_norm;
  }
  for (const ParamIndicatorBlock& blk : report.parametric) {
    report.tau_bar += blk.tau;
    report.sigma_bar += blk.sigma;
  }
}

double interpolant_bochner_norm(const SpMat& h1_gram, const std::vector<const FemVector*>& w,
                                const CollocationGrid& grid, const std::vector<int>& basis_ids) {
  if (w.size() != basis_ids.size())
    throw std::invalid_argument("bochner_norm: term count mismatch");
  const int k = static_cast<int>(w.size());
  for (int i = 1; i < k; ++i)
    if (w[i]->mesh_id != w[0]->mesh_id || w[i]->coeffs.size() != h1_gram.rows())
      throw std::invalid_argument("bochner_norm: incompatible meshes");
  std::vector<Eigen::VectorXd> Aw(k);
  for (int i = 0; i < k; ++i) Aw[i] = h1_gram * w[i]->coeffs;
  double s = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      s += w[i]->coeffs.dot(Aw[j]) * grid.gram(basis_ids[i], basis_ids[j]);
  return std::sqrt(std::max(0.0, s));
}

std::pair<double, double> bochner_estimates(const BochnerInputs& in, const SolutionMap& coarse,
                                            const SolutionMap& fine_solutions) {
  const CollocationGrid& grid = *in.grid;
  const CollocationGrid& enriched = *in.enriched;

  // Spatial estimate: || sum_y (u_hat_y - u_y) L_y || with both terms on the
  // refined mesh.
  std::vector<FemVector> diffs;
  std::vector<int> ids;
  diffs.reserve(grid.size());
  for (int p = 0; p < grid.size(); ++p) {
    const PointKey& key = grid.point(p).key;
    const FemVector& uh = at(fine_solutions, key, "bochner_estimates");
    FemVector pu = prolong(*in.coarse_mesh, *in.fine, at(coarse, key, "bochner_estimates"));
    pu.coeffs = uh.coeffs - pu.coeffs;
    diffs.push_back(std::move(pu));
    ids.push_back(p);
  }
  std::vector<const FemVector*> ptrs;
  for (const auto& d : diffs) ptrs.push_back(&d);
  const double mu = interpolant_bochner_norm(*in.unit_fine, ptrs, grid, ids);

  // Parametric estimate: || sum_{y' in enriched\base} (u_y' - u_SC(y')) L_hat_y' ||.
  std::vector<FemVector> pdiffs;
  std::vector<int> pids;
  const int n = grid.size();
  std::vector<const FemVector*> base(n);
  for (int p = 0; p < n; ++p) base[p] = &at(coarse, grid.point(p).key, "bochner_estimates");
  for (int e = 0; e < enriched.size(); ++e) {
    const GridPoint& pt = enriched.point(e);
    if (grid.find(pt.key) >= 0) continue;
    const auto L = grid.basis_at(pt.coords);
    FemVector d = at(coarse, pt.key, "bochner_estimates");
    Eigen::VectorXd v = d.coeffs;
    for (int p = 0; p < n; ++p)
      if (L[p] != 0.0) v -= L[p] * base[p]->coeffs;
    d.coeffs = std::move(v);
    pdiffs.push_back(std::move(d));
    pids.push_back(e);
  }
  std::vector<const FemVector*> pptrs;
  for (const auto& d : pdiffs) pptrs.push_back(&d);
  const double tau =
      pptrs.empty() ? 0.0 : interpolant_bochner_norm(*in.unit_coarse, pptrs, enriched, pids);
  return {mu, tau};
}

}  // namespace scgoal
