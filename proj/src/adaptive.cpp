#include "scgoal/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "scgoal/parallel.hpp"

namespace scgoal {

void RunConfig::validate() const {
  if (!(theta_x > 0.0 && theta_x <= 1.0) || !(theta_y > 0.0 && theta_y <= 1.0))
    throw std::invalid_argument("config: marking parameters must satisfy 0 < theta <= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("config: tol must be positive");
  if (estimate_period < 1) throw std::invalid_argument("config: estimate_period must be >= 1");
  if (dof_cap < 1 || iteration_cap < 0) throw std::invalid_argument("config: bad caps");
}

int RunConfig::worker_count() const {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

RefineType choose_refinement_type(double mu_bar, double tau_bar, double eta_bar,
                                  double sigma_bar) {
  return (mu_bar * mu_bar + eta_bar * eta_bar >= tau_bar * tau_bar + sigma_bar * sigma_bar)
             ? RefineType::spatial
             : RefineType::parametric;
}

DoerflerResult doerfler_min(const std::vector<double>& weights, double theta) {
  DoerflerResult r;
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("doerfler: negative weight");
    total += w;
  }
  if (total <= 0.0) {
    r.all_zero = true;
    return r;
  }
  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a < b;
  });
  const double threshold = theta * total;
  double acc = 0.0;
  for (int id : order) {
    r.selected.push_back(id);
    acc += weights[id];
    if (acc >= threshold) break;
  }
  std::sort(r.selected.begin(), r.selected.end());
  return r;
}

namespace {

struct Family {
  std::vector<int> units;  // detail-node ids or parametric block ids
  bool all_zero = false;
};

Family spatial_family(const EstimatorReport& rep, double theta,
                      const std::function<double(const PointIndicatorBlock&, int)>& weight) {
  const int nodes = rep.spatial.empty() ? 0 : static_cast<int>(rep.spatial[0].mu_local.size());
  std::vector<double> w;
  w.reserve(rep.spatial.size() * nodes);
  for (const auto& blk : rep.spatial)
    for (int i = 0; i < nodes; ++i) w.push_back(weight(blk, i));
  const DoerflerResult dr = doerfler_min(w, theta);
  Family fam;
  fam.all_zero = dr.all_zero;
  std::set<int> marked;
  for (int id : dr.selected) marked.insert(id % nodes);
  fam.units.assign(marked.begin(), marked.end());
  return fam;
}

Family parametric_family(const EstimatorReport& rep, double theta,
                         const std::function<double(const ParamIndicatorBlock&)>& weight) {
  std::vector<double> w;
  w.reserve(rep.parametric.size());
  for (const auto& blk : rep.parametric) w.push_back(weight(blk));
  const DoerflerResult dr = doerfler_min(w, theta);
  Family fam;
  fam.all_zero = dr.all_zero;
  fam.units = dr.selected;
  return fam;
}

// Minimum-cardinality choice between the two candidate marking sets; a family
// with vanishing indicators is disqualified.
const Family& pick(const Family& a, const Family& b) {
  if (a.all_zero && !b.all_zero) return b;
  if (b.all_zero && !a.all_zero) return a;
  return a.units.size() <= b.units.size() ? a : b;
}

MarkingOutcome mark_impl(const EstimatorReport& rep, double theta_x, double theta_y,
                         bool combined_second_family) {
  MarkingOutcome out;
  out.type = choose_refinement_type(rep.mu_bar, rep.tau_bar, rep.eta_bar, rep.sigma_bar);
  if (out.type == RefineType::spatial) {
    const Family f1 = spatial_family(rep, theta_x, [](const PointIndicatorBlock& b, int i) {
      return b.mu_local[i] * b.L_norm;
    });
    const Family f2 =
        combined_second_family
            ? spatial_family(rep, theta_x,
                             [](const PointIndicatorBlock& b, int i) {
                               return (b.mu_local[i] + b.eta_local[i]) * b.L_norm;
                             })
            : spatial_family(rep, theta_x, [](const PointIndicatorBlock& b, int i) {
                return b.eta_local[i] * b.L_norm;
              });
    const Family& chosen = pick(f1, f2);
    if (!(f1.all_zero && f2.all_zero)) out.marked_nodes = chosen.units;
  } else {
    const Family f1 =
        parametric_family(rep, theta_y, [](const ParamIndicatorBlock& b) { return b.tau; });
    const Family f2 = combined_second_family
                          ? parametric_family(rep, theta_y,
                                              [](const ParamIndicatorBlock& b) {
                                                return b.tau + b.sigma;
                                              })
                          : parametric_family(rep, theta_y, [](const ParamIndicatorBlock& b) {
                              return b.sigma;
                            });
    const Family& chosen = pick(f1, f2);
    if (!(f1.all_zero && f2.all_zero))
      for (int id : chosen.units) out.marked_indices.push_back(rep.parametric[id].nu);
  }
  return out;
}

}  // namespace

MarkingOutcome mark_linear(const EstimatorReport& report, double theta_x, double theta_y) {
  return mark_impl(report, theta_x, theta_y, false);
}

MarkingOutcome mark_nonlinear(const EstimatorReport& report, double theta_x, double theta_y) {
  return mark_impl(report, theta_x, theta_y, true);
}

AdaptiveState::AdaptiveState(std::shared_ptr<const Mesh> mesh_in, MultiIndexSet iset_in,
                             std::shared_ptr<const NodeFamily> family_in)
    : mesh(std::move(mesh_in)), iset(std::move(iset_in)), family(std::move(family_in)) {
  grid = std::make_shared<CollocationGrid>(iset, family);
  enriched = std::make_shared<CollocationGrid>(iset.with(reduced_margin(iset)), family);
}

AdaptiveState make_initial_state(const ProblemDefinition& problem, int M) {
  return AdaptiveState(problem.initial_mesh, MultiIndexSet::root(M),
                       std::make_shared<NodeFamily>(problem.family));
}

namespace {

class Driver {
 public:
  Driver(const ProblemDefinition& problem, const RunConfig& config)
      : prob_(problem), cfg_(config) {
    cfg_.validate();
  }

  AdaptiveState initial() const {
    return make_initial_state(prob_, prob_.coefficient->dimension());
  }

  void ensure_contexts(const AdaptiveState& s) {
    if (stiffness_ && &stiffness_->mesh() == s.mesh.get()) return;
    stiffness_ = std::make_unique<StiffnessCache>(s.mesh, prob_.coefficient);
    twolevel_ = std::make_unique<TwoLevelContext>(s.mesh, prob_.coefficient);
    goal_ = std::make_unique<GoalContext>(s.mesh, prob_.goal);
    load_ = assemble_load(*s.mesh, prob_.rhs);
    matrices_.clear();
  }

  void solve_all(AdaptiveState& s) {
    ensure_contexts(s);
    std::vector<int> missing;
    for (int p = 0; p < s.enriched->size(); ++p)
      if (!s.primal.count(s.enriched->point(p).key)) missing.push_back(p);
    std::vector<SpMat> mats(missing.size());
    std::vector<FemVector> us(missing.size()), zs(missing.size());
    const std::uint64_t mesh_id = s.mesh->id();
    parallel_for(static_cast<int>(missing.size()), cfg_.worker_count(), [&](int i) {
      const GridPoint& pt = s.enriched->point(missing[i]);
      mats[i] = stiffness_->matrix(pt.coords);
      const SpdSolver solver(mats[i]);
      FemVector u(solver.solve(load_, warm_start(prev_primal_, pt.key, s)), mesh_id);
      const Eigen::VectorXd zload = goal_->dual_load(prob_.goal.linear() ? nullptr : &u);
      FemVector z(solver.solve(zload, warm_start(prev_dual_, pt.key, s)), mesh_id);
      us[i] = std::move(u);
      zs[i] = std::move(z);
    });
    for (std::size_t i = 0; i < missing.size(); ++i) {
      const PointKey& key = s.enriched->point(missing[i]).key;
      s.primal.emplace(key, std::move(us[i]));
      s.dual.emplace(key, std::move(zs[i]));
      matrices_[key] = std::move(mats[i]);
    }
  }

  EstimatorReport compute_report(const AdaptiveState& s) {
    EstimatorReport rep;
    rep.iteration = s.iteration;
    rep.spatial = spatial_indicators(*twolevel_, *goal_, prob_.rhs, *s.grid, s.primal, s.dual,
                                     cfg_.worker_count());
    rep.parametric = parametric_indicators(stiffness_->unit_matrix(), *s.grid, *s.enriched,
                                           s.primal, s.dual);
    cumulative(rep);
    return rep;
  }

  QoiRecord compute_qoi(const AdaptiveState& s) {
    return corrected_qoi(*goal_, prob_.rhs, *stiffness_, *s.grid, *s.enriched, s.primal,
                         s.dual);
  }

  BochnerEstimates bochner(const AdaptiveState& s) {
    const RefineResult fine = uniform_refine(*s.mesh);
    StiffnessCache fine_stiffness(fine.mesh, prob_.coefficient);
    GoalContext fine_goal(fine.mesh, prob_.goal);
    const Eigen::VectorXd fine_load = assemble_load(*fine.mesh, prob_.rhs);

    const int n = s.grid->size();
    std::vector<FemVector> ufs(n), zfs(n);
    parallel_for(n, cfg_.worker_count(), [&](int p) {
      const GridPoint& pt = s.grid->point(p);
      const SpMat A = fine_stiffness.matrix(pt.coords);
      const SpdSolver solver(A);
      const FemVector pu = prolong(*s.mesh, fine, s.primal.at(pt.key));
      const FemVector pz = prolong(*s.mesh, fine, s.dual.at(pt.key));
      ufs[p] = FemVector(solver.solve(fine_load, pu.coeffs), fine.mesh->id());
      const Eigen::VectorXd zload = fine_goal.dual_load(prob_.goal.linear() ? nullptr : &pu);
      zfs[p] = FemVector(solver.solve(zload, pz.coeffs), fine.mesh->id());
    });
    SolutionMap fine_primal, fine_dual;
    for (int p = 0; p < n; ++p) {
      fine_primal.emplace(s.grid->point(p).key, std::move(ufs[p]));
      fine_dual.emplace(s.grid->point(p).key, std::move(zfs[p]));
    }
    BochnerInputs in{s.mesh.get(),        &fine,
                     &stiffness_->unit_matrix(), &fine_stiffness.unit_matrix(),
                     s.grid.get(),        s.enriched.get()};
    BochnerEstimates est;
    std::tie(est.mu, est.tau) = bochner_estimates(in, s.primal, fine_primal);
    std::tie(est.eta, est.sigma) = bochner_estimates(in, s.dual, fine_dual);
    return est;
  }

  MarkingOutcome mark(const EstimatorReport& rep) const {
    return prob_.goal.linear() ? mark_linear(rep, cfg_.theta_x, cfg_.theta_y)
                               : mark_nonlinear(rep, cfg_.theta_x, cfg_.theta_y);
  }

  AdaptiveState advance(const AdaptiveState& s, const MarkingOutcome& mk) {
    if (mk.empty()) throw std::logic_error("advance: empty marking");
    if (mk.type == RefineType::spatial) {
      const MarkedNodeSet marked = make_marked(twolevel_->details(), mk.marked_nodes);
      RefineResult rr = nvb_refine(*s.mesh, marked);
      prev_mesh_ = s.mesh;
      prev_refine_ = rr;
      prev_primal_ = s.primal;
      prev_dual_ = s.dual;
      AdaptiveState next(rr.mesh, s.iset, s.family);
      next.iteration = s.iteration + 1;
      next.history = s.history;
      return next;
    }
    AdaptiveState next(s.mesh, s.iset.with(mk.marked_indices), s.family);
    next.iteration = s.iteration + 1;
    next.history = s.history;
    next.primal = s.primal;  // same mesh: all existing samplewise solves stay valid
    next.dual = s.dual;
    return next;
  }

  double stopping_product(const BochnerEstimates& e) const {
    const double primal = e.mu + e.tau;
    return prob_.goal.linear() ? primal * (e.eta + e.sigma)
                               : primal * (primal + e.eta + e.sigma);
  }

  const StiffnessCache& stiffness() const { return *stiffness_; }

 private:
  Eigen::VectorXd warm_start(const SolutionMap& prev, const PointKey& key,
                             const AdaptiveState& s) const {
    if (prev_mesh_ && prev_refine_.mesh == s.mesh) {
      auto it = prev.find(key);
      if (it != prev.end()) return prolong(*prev_mesh_, prev_refine_, it->second).coeffs;
    }
    return Eigen::VectorXd::Zero(s.mesh->interior_count());
  }

  ProblemDefinition prob_;
  RunConfig cfg_;
  std::unique_ptr<StiffnessCache> stiffness_;
  std::unique_ptr<TwoLevelContext> twolevel_;
  std::unique_ptr<GoalContext> goal_;
  Eigen::VectorXd load_;
  std::map<PointKey, SpMat> matrices_;
  std::shared_ptr<const Mesh> prev_mesh_;
  RefineResult prev_refine_;
  SolutionMap prev_primal_, prev_dual_;
};

HistoryRow base_row(const AdaptiveState& s) {
  HistoryRow row;
  row.iter = s.iteration;
  row.dofs = s.dofs();
  row.n_points = s.grid->size();
  row.n_vertices = s.mesh->vertex_count();
  row.mu_bar = s.report.mu_bar;
  row.tau_bar = s.report.tau_bar;
  row.eta_bar = s.report.eta_bar;
  row.sigma_bar = s.report.sigma_bar;
  return row;
}

}  // namespace

AdaptiveState step(const AdaptiveState& state, const ProblemDefinition& problem,
                   const RunConfig& config) {
  Driver driver(problem, config);
  AdaptiveState s = state;
  driver.solve_all(s);
  s.report = driver.compute_report(s);
  const MarkingOutcome mk = driver.mark(s.report);
  HistoryRow row = base_row(s);
  row.refine_type = mk.type;
  s.history.push_back(row);
  if (mk.empty())
    throw std::runtime_error("step: stagnation, nothing marked at iteration " +
                             std::to_string(s.iteration));
  return driver.advance(s, mk);
}

RunResult run(const ProblemDefinition& problem, const RunConfig& config,
              const IterationCallback& on_iteration) {
  Driver driver(problem, config);
  AdaptiveState state = driver.initial();
  std::vector<std::pair<int, QoiRecord>> qoi_records;
  bool converged = false;
  std::string stop_reason;

  for (;;) {
    driver.solve_all(state);
    state.report = driver.compute_report(state);
    HistoryRow row = base_row(state);

    std::optional<QoiRecord> qrec;
    if (config.record_q_every_iteration) qrec = driver.compute_qoi(state);

    const MarkingOutcome mk = driver.mark(state.report);
    row.refine_type = mk.type;

    bool stop = false;
    if (state.iteration % config.estimate_period == 0) {
      const BochnerEstimates est = driver.bochner(state);
      state.report.bochner = est;
      row.mu = est.mu;
      row.tau = est.tau;
      row.eta = est.eta;
      row.sigma = est.sigma;
      row.estimate = driver.stopping_product(est);
      if (*row.estimate < config.tol) {
        stop = true;
        converged = true;
        stop_reason = "tolerance reached";
      }
    }
    if (stop && !qrec) qrec = driver.compute_qoi(state);
    if (qrec) {
      row.q_uncorrected = qrec->q_interp;
      row.q_corrected = qrec->q_corrected;
      qoi_records.emplace_back(state.iteration, *qrec);
    }
    state.history.push_back(row);
    if (on_iteration) on_iteration(state, row);

    if (stop) break;

    if (mk.empty()) {
      const double bars = state.report.mu_bar + state.report.eta_bar + state.report.tau_bar +
                          state.report.sigma_bar;
      throw std::runtime_error("run: stagnation at iteration " +
                               std::to_string(state.iteration) + " (cumulative indicators " +
                               std::to_string(bars) + ", estimates above tolerance)");
    }

    AdaptiveState next = driver.advance(state, mk);
    if (next.iteration >= config.iteration_cap + 1) {
      stop_reason = "iteration cap";
      break;
    }
    if (next.dofs() > config.dof_cap) {
      stop_reason = "dof cap";
      break;
    }
    state = std::move(next);
  }

  if (qoi_records.empty()) qoi_records.emplace_back(state.iteration, driver.compute_qoi(state));
  RunResult result{std::move(state), qoi_records.back().second, std::move(qoi_records),
                   converged, stop_reason};
  return result;
}

}  // namespace scgoal
