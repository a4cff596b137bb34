#pragma once

#include <functional>
#include <optional>
#include <string>

#include "scgoal/estimators.hpp"
#include "scgoal/goal.hpp"

namespace scgoal {

struct ProblemDefinition {
  std::string name;
  std::shared_ptr<const Mesh> initial_mesh;
  std::shared_ptr<const CoefficientField> coefficient;
  RhsDescriptor rhs;
  GoalDescriptor goal;
  NodeFamily::Kind family = NodeFamily::Kind::clenshaw_curtis;
};

struct RunConfig {
  double tol = 1e-5;
  double theta_x = 0.3;
  double theta_y = 0.3;
  int estimate_period = 3;
  long long dof_cap = 200000;
  int iteration_cap = 200;
  int threads = 0;  // 0: hardware concurrency
  bool record_q_every_iteration = true;
  unsigned seed = 0;  // consumed by property tests only

  void validate() const;
  int worker_count() const;
};

enum class RefineType { spatial, parametric };

struct MarkingOutcome {
  RefineType type = RefineType::spatial;
  std::vector<int> marked_nodes;            // detail-node indices into the report order
  std::vector<MultiIndex> marked_indices;   // reduced-margin subset
  bool empty() const { return marked_nodes.empty() && marked_indices.empty(); }
};

struct HistoryRow {
  int iter = 0;
  long long dofs = 0;
  int n_points = 0;
  int n_vertices = 0;
  RefineType refine_type = RefineType::spatial;
  double mu_bar = 0, tau_bar = 0, eta_bar = 0, sigma_bar = 0;
  std::optional<double> mu, tau, eta, sigma;
  std::optional<double> q_uncorrected, q_corrected;
  std::optional<double> estimate;
};

struct AdaptiveState {
  AdaptiveState(std::shared_ptr<const Mesh> mesh_in, MultiIndexSet iset_in,
                std::shared_ptr<const NodeFamily> family_in);

  int iteration = 0;
  std::shared_ptr<const Mesh> mesh;
  MultiIndexSet iset;
  std::shared_ptr<const NodeFamily> family;
  std::shared_ptr<const CollocationGrid> grid;      // Y over the index set
  std::shared_ptr<const CollocationGrid> enriched;  // Y over index set + reduced margin
  SolutionMap primal, dual;                         // Galerkin solves on the enriched grid
  EstimatorReport report;
  std::vector<HistoryRow> history;

  long long dofs() const {
    return static_cast<long long>(mesh->interior_count()) * grid->size();
  }
};

RefineType choose_refinement_type(double mu_bar, double tau_bar, double eta_bar,
                                  double sigma_bar);

struct DoerflerResult {
  std::vector<int> selected;
  bool all_zero = false;
};

/// Minimal-cardinality subset with weight sum >= theta * total; ties in weight
/// resolved by ascending id.
DoerflerResult doerfler_min(const std::vector<double>& weights, double theta);

MarkingOutcome mark_linear(const EstimatorReport& report, double theta_x, double theta_y);
MarkingOutcome mark_nonlinear(const EstimatorReport& report, double theta_x, double theta_y);

struct RunResult {
  AdaptiveState state;  // at the stopping iteration
  QoiRecord qoi;
  std::vector<std::pair<int, QoiRecord>> qoi_records;
  bool converged = false;
  std::string stop_reason;
};

/// One full iteration: solve, estimate, mark, refine. Returns the next state.
AdaptiveState step(const AdaptiveState& state, const ProblemDefinition& problem,
                   const RunConfig& config);

AdaptiveState make_initial_state(const ProblemDefinition& problem, int M);

using IterationCallback = std::function<void(const AdaptiveState&, const HistoryRow&)>;

RunResult run(const ProblemDefinition& problem, const RunConfig& config,
              const IterationCallback& on_iteration = {});

}  // namespace scgoal
