#pragma once

#include <optional>
#include <vector>

#include "scgoal/fem.hpp"
#include "scgoal/goal.hpp"
#include "scgoal/sparse_grid.hpp"

namespace scgoal {

struct PointIndicatorBlock {
  PointKey key;
  double L_norm = 0.0;   // ||L_y||_{L2_pi} on the base grid
  double mu = 0.0;       // aggregate spatial indicator, primal
  double eta = 0.0;      // aggregate spatial indicator, dual
  std::vector<double> mu_local;   // per detail node
  std::vector<double> eta_local;  // per detail node
};

struct ParamIndicatorBlock {
  MultiIndex nu;
  double tau = 0.0;    // primal parametric indicator
  double sigma = 0.0;  // dual parametric indicator
};

struct BochnerEstimates {
  double mu = 0.0, tau = 0.0, eta = 0.0, sigma = 0.0;
};

struct EstimatorReport {
  int iteration = 0;
  std::vector<PointIndicatorBlock> spatial;     // one per base-grid point
  std::vector<ParamIndicatorBlock> parametric;  // one per reduced-margin index
  double mu_bar = 0.0, tau_bar = 0.0, eta_bar = 0.0, sigma_bar = 0.0;
  std::optional<BochnerEstimates> bochner;
};

/// Spatial two-level indicators for every base-grid point, primal and dual.
std::vector<PointIndicatorBlock> spatial_indicators(
    const TwoLevelContext& ctx, const GoalContext& goal, const RhsDescriptor& rhs,
    const CollocationGrid& grid, const SolutionMap& primal, const SolutionMap& dual,
    int threads = 1);

/// Parametric indicators for every reduced-margin index; solutions must be
/// available at the points generated by each index.
std::vector<ParamIndicatorBlock> parametric_indicators(
    const SpMat& unit_stiffness, const CollocationGrid& grid,
    const CollocationGrid& enriched, const SolutionMap& primal, const SolutionMap& dual);

/// Cumulative indicators (mu_bar, tau_bar) or (eta_bar, sigma_bar).
void cumulative(EstimatorReport& report);

/// Norm of sum_i w_i (x) L_{basis_ids[i]} in L2_pi(Gamma; H1_0(D)); all w_i on
/// the mesh whose H1 Gram matrix is given.
double interpolant_bochner_norm(const SpMat& h1_gram, const std::vector<const FemVector*>& w,
                                const CollocationGrid& grid, const std::vector<int>& basis_ids);

/// The spatial/parametric error estimates for one solution family: mu uses the
/// enhanced solves on the refined mesh, tau the direct solves at the new
/// collocation points.
struct BochnerInputs {
  const Mesh* coarse_mesh;
  const RefineResult* fine;      // uniform refinement of the coarse mesh
  const SpMat* unit_coarse;      // H1 Gram on the coarse mesh
  const SpMat* unit_fine;        // H1 Gram on the fine mesh
  const CollocationGrid* grid;
  const CollocationGrid* enriched;
};

std::pair<double, double> bochner_estimates(const BochnerInputs& in, const SolutionMap& coarse,
                                            const SolutionMap& fine_solutions);

}  // namespace scgoal
