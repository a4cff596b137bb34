#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <set>

#include "scgoal/problems.hpp"
#include "scgoal/run_io.hpp"

namespace fs = std::filesystem;
using namespace scgoal;

namespace {

struct CommonOpts {
  int setup_id = 0;
  std::string config_file;
  std::string out_dir = "out";
  RunConfig run;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--setup", opts.setup_id, "benchmark problem id (1-4)");
  cmd->add_option("--config", opts.config_file, "flat key=value configuration file");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--tol", opts.run.tol, "stopping tolerance");
  cmd->add_option("--theta-x", opts.run.theta_x, "spatial marking parameter");
  cmd->add_option("--theta-y", opts.run.theta_y, "parametric marking parameter");
  cmd->add_option("--estimate-period", opts.run.estimate_period,
                  "iterations between error-estimate checkpoints");
  cmd->add_option("--dof-cap", opts.run.dof_cap, "stop when total dof exceeds this");
  cmd->add_option("--iteration-cap", opts.run.iteration_cap, "maximum iterations");
  cmd->add_option("--threads", opts.run.threads, "worker threads (0 = hardware)");
  cmd->add_flag("--no-q-records", "skip recording the corrected QoI every iteration");
}

// Returns (problem, config, out_dir); CLI flags override config-file values.
std::tuple<ProblemDefinition, RunConfig, std::string> resolve(const CommonOpts& opts,
                                                              CLI::App* cmd) {
  FileConfig fc;
  if (!opts.config_file.empty()) fc = parse_config_file(opts.config_file);
  RunConfig run = fc.run;
  std::string out_dir = fc.out_dir;
  int setup_id = opts.setup_id > 0 ? opts.setup_id : fc.setup_id;

  auto used = [&](const std::string& flag) { return cmd->count(flag) > 0; };
  if (used("--out")) out_dir = opts.out_dir;
  if (used("--tol")) run.tol = opts.run.tol;
  if (used("--theta-x")) run.theta_x = opts.run.theta_x;
  if (used("--theta-y")) run.theta_y = opts.run.theta_y;
  if (used("--estimate-period")) run.estimate_period = opts.run.estimate_period;
  if (used("--dof-cap")) run.dof_cap = opts.run.dof_cap;
  if (used("--iteration-cap")) run.iteration_cap = opts.run.iteration_cap;
  if (used("--threads")) run.threads = opts.run.threads;
  if (used("--no-q-records")) run.record_q_every_iteration = false;
  run.validate();

  ProblemDefinition problem;
  if (setup_id > 0)
    problem = setup(setup_id);
  else if (fc.has_custom)
    problem = fc.custom;
  else
    throw std::invalid_argument("no problem selected: pass --setup or a custom config");
  return {std::move(problem), run, std::move(out_dir)};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

int cmd_run(const CommonOpts& opts, CLI::App* cmd, bool emit_reports) {
  auto [problem, config, out_dir] = resolve(opts, cmd);
  fs::create_directories(out_dir);
  const RunResult result =
      run(problem, config, [&](const AdaptiveState& s, const HistoryRow& r) {
        if (emit_reports) {
          char name[64];
          std::snprintf(name, sizeof name, "report_iter%04d.json", r.iter);
          write_file(fs::path(out_dir) / name, report_json(s.report));
        }
        std::cout << "iter " << r.iter << "  dofs " << r.dofs << "  points " << r.n_points
                  << "  type "
                  << (r.refine_type == RefineType::spatial ? "spatial" : "parametric");
        if (r.estimate) std::cout << "  estimate " << *r.estimate;
        std::cout << "\n";
      });
  write_file(fs::path(out_dir) / "history.csv", history_csv(result.state.history));
  write_file(fs::path(out_dir) / "qoi.json", qoi_json(result.qoi_records));
  write_file(fs::path(out_dir) / "summary.json", summary_json(problem, config, result));
  write_file(fs::path(out_dir) / "report_final.json", report_json(result.state.report));
  result.state.mesh->save((fs::path(out_dir) / "final_mesh.txt").string());
  std::cout << (result.converged ? "converged" : "not converged: " + result.stop_reason)
            << "  Q_corrected = " << format_double(result.qoi.q_corrected) << "\n";
  return result.converged ? 0 : 1;
}

int cmd_reference(const CommonOpts& opts, CLI::App* cmd, int refinements) {
  auto [problem, config, out_dir] = resolve(opts, cmd);
  fs::create_directories(out_dir);
  const RunResult result = run(problem, config);
  const ReferenceResult ref = reference_solve(problem, result.state, config, refinements);
  nlohmann::json j{{"problem", problem.name},
                   {"Q_ref", ref.q_ref},
                   {"reference_dofs", ref.dofs},
                   {"description", ref.description},
                   {"Q_corrected_final", result.qoi.q_corrected},
                   {"error_vs_reference", std::abs(ref.q_ref - result.qoi.q_corrected)}};
  write_file(fs::path(out_dir) / "reference.json", j.dump(2));
  std::cout << "Q_ref = " << format_double(ref.q_ref) << "  (" << ref.description << ")\n";
  return result.converged ? 0 : 1;
}

int cmd_mesh_dump(const CommonOpts& opts, CLI::App* cmd, const std::vector<int>& iterations) {
  auto [problem, config, out_dir] = resolve(opts, cmd);
  fs::create_directories(out_dir);
  const std::set<int> wanted(iterations.begin(), iterations.end());
  if (!wanted.empty()) config.iteration_cap = *wanted.rbegin();
  run(problem, config, [&](const AdaptiveState& s, const HistoryRow& r) {
    if (wanted.empty() || wanted.count(r.iter)) {
      char name[64];
      std::snprintf(name, sizeof name, "mesh_iter%04d.txt", r.iter);
      s.mesh->save((fs::path(out_dir) / name).string());
    }
  });
  return 0;
}

int cmd_gen_meshes(const std::string& dir) {
  fs::create_directories(dir);
  build_lshape_mesh(4).save(dir + "/setup1_lshape.mesh");
  build_slit_mesh(0.005).save(dir + "/setup2_slit.mesh");
  build_square_mesh(0.0, 0.0, 1.0, 1.0, 4).save(dir + "/setup3_square.mesh");
  build_lshape_mesh(4).save(dir + "/setup4_lshape.mesh");
  std::cout << "wrote benchmark meshes to " << dir << "\n";
  return 0;
}

// Standing invariants checked on small random instances.
int cmd_verify() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
  };
  std::mt19937 rng(12345);

  // Mesh: conformity and shape regularity under random refinement.
  {
    auto mesh = std::make_shared<Mesh>(build_lshape_mesh(2));
    const double angle0 = mesh->min_angle();
    bool conforming = true;
    double min_angle = angle0;
    for (int it = 0; it < 6; ++it) {
      const DetailNodeSet details = detail_nodes(*mesh);
      std::vector<int> marked;
      for (int i = 0; i < static_cast<int>(details.nodes.size()); ++i)
        if (rng() % 3 == 0) marked.push_back(i);
      if (marked.empty()) marked.push_back(0);
      RefineResult rr = nvb_refine(*mesh, make_marked(details, marked));
      mesh = std::make_shared<Mesh>(*rr.mesh);
      conforming = conforming && is_conforming(*mesh);
      min_angle = std::min(min_angle, mesh->min_angle());
    }
    check(conforming, "mesh conformity under random NVB refinement");
    check(min_angle > 0.4 * angle0, "NVB shape regularity (min angle bounded)");
  }

  // Sparse grids: monotone enrichment, delta property, partition of unity.
  {
    bool monotone_ok = true, delta_ok = true, partition_ok = true;
    const auto family = std::make_shared<NodeFamily>(NodeFamily::Kind::clenshaw_curtis);
    for (int trial = 0; trial < 25; ++trial) {
      const int M = 1 + static_cast<int>(rng() % 3);
      MultiIndexSet iset = MultiIndexSet::root(M);
      for (int g = 0; g < 4; ++g) {
        auto rm = reduced_margin(iset);
        std::vector<MultiIndex> add;
        for (const auto& nu : rm)
          if (rng() % 2 == 0) add.push_back(nu);
        if (add.empty()) add.push_back(rm.front());
        iset = iset.with(add);
        monotone_ok = monotone_ok && MultiIndexSet::is_monotone(M, iset.indices());
      }
      CollocationGrid grid(iset, family);
      for (int p = 0; p < grid.size(); ++p) {
        const auto L = grid.basis_at(grid.point(p).coords);
        for (int q = 0; q < grid.size(); ++q)
          if (L[q] != (p == q ? 1.0 : 0.0)) delta_ok = false;
      }
      double wsum = 0.0;
      for (double w : grid.quadrature_weights()) wsum += w;
      partition_ok = partition_ok && std::abs(wsum - 1.0) < 1e-12;
    }
    check(monotone_ok, "index sets stay downward closed under reduced-margin enrichment");
    check(delta_ok, "sparse interpolation delta property at grid points");
    check(partition_ok, "quadrature weights sum to one");
  }

  // Determinism of a small run.
  {
    const ProblemDefinition problem = setup(1);
    RunConfig config;
    config.tol = 1e-3;
    config.dof_cap = 2000;
    config.iteration_cap = 12;
    const RunResult a = run(problem, config);
    const RunResult b = run(problem, config);
    check(history_csv(a.state.history) == history_csv(b.state.history),
          "repeated runs produce identical history");
  }

  std::cout << (failures == 0 ? "all invariants hold\n" : "invariant failures\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-oriented adaptive sparse-grid collocation FEM"};
  app.require_subcommand(1);

  CommonOpts run_opts, ref_opts, dump_opts;
  bool emit_reports = false;
  int ref_refinements = 2;
  std::vector<int> dump_iterations;
  std::string gen_dir = "data";

  CLI::App* c_run = app.add_subcommand("run", "adaptive run: history CSV + QoI records");
  add_common(c_run, run_opts);
  c_run->add_flag("--emit-reports", emit_reports, "write per-iteration estimator reports");

  CLI::App* c_ref = app.add_subcommand("reference", "adaptive run plus reference solve");
  add_common(c_ref, ref_opts);
  c_ref->add_option("--refinements", ref_refinements, "uniform refinements for the reference");

  CLI::App* c_dump = app.add_subcommand("mesh-dump", "mesh snapshots at chosen iterations");
  add_common(c_dump, dump_opts);
  c_dump->add_option("--iterations", dump_iterations, "iterations to snapshot (default: all)");

  CLI::App* c_verify = app.add_subcommand("verify", "run the invariant suite");
  CLI::App* c_gen = app.add_subcommand("gen-meshes", "regenerate the benchmark mesh files");
  c_gen->add_option("--dir", gen_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_run->parsed()) return cmd_run(run_opts, c_run, emit_reports);
    if (c_ref->parsed()) return cmd_reference(ref_opts, c_ref, ref_refinements);
    if (c_dump->parsed()) return cmd_mesh_dump(dump_opts, c_dump, dump_iterations);
    if (c_verify->parsed()) return cmd_verify();
    if (c_gen->parsed()) return cmd_gen_meshes(gen_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
