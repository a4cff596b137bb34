#include "scgoal/run_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace scgoal {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream out;
  out << kHistoryHeader << "\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : ""; };
  for (const HistoryRow& r : rows) {
    out << r.iter << "," << r.dofs << "," << r.n_points << "," << r.n_vertices << ","
        << (r.refine_type == RefineType::spatial ? "spatial" : "parametric") << ","
        << format_double(r.mu_bar) << "," << format_double(r.tau_bar) << ","
        << format_double(r.eta_bar) << "," << format_double(r.sigma_bar) << "," << opt(r.mu)
        << "," << opt(r.tau) << "," << opt(r.eta) << "," << opt(r.sigma) << ","
        << opt(r.q_uncorrected) << "," << opt(r.q_corrected) << "," << opt(r.estimate) << "\n";
  }
  return out.str();
}

namespace {

json qoi_to_json(const QoiRecord& q) {
  return json{{"Q_interp", q.q_interp},
              {"F_dual", q.f_dual},
              {"B_form", q.b_form},
              {"Q_corrected", q.q_corrected},
              {"path", q.path == QoiRecord::Path::affine_exact ? "affine_exact" : "quadrature"}};
}

}  // namespace

std::string qoi_json(const std::vector<std::pair<int, QoiRecord>>& records) {
  json arr = json::array();
  for (const auto& [iter, rec] : records) {
    json j = qoi_to_json(rec);
    j["iter"] = iter;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::string report_json(const EstimatorReport& report) {
  json spatial = json::array();
  for (const auto& blk : report.spatial) {
    spatial.push_back(json{{"point", blk.key},
                           {"L_norm", blk.L_norm},
                           {"mu", blk.mu},
                           {"eta", blk.eta},
                           {"mu_local", blk.mu_local},
                           {"eta_local", blk.eta_local}});
  }
  json parametric = json::array();
  for (const auto& blk : report.parametric)
    parametric.push_back(json{{"nu", blk.nu}, {"tau", blk.tau}, {"sigma", blk.sigma}});
  json j{{"iter", report.iteration},
         {"spatial", std::move(spatial)},
         {"parametric", std::move(parametric)},
         {"mu_bar", report.mu_bar},
         {"tau_bar", report.tau_bar},
         {"eta_bar", report.eta_bar},
         {"sigma_bar", report.sigma_bar}};
  if (report.bochner) {
    j["bochner"] = json{{"mu", report.bochner->mu},
                        {"tau", report.bochner->tau},
                        {"eta", report.bochner->eta},
                        {"sigma", report.bochner->sigma}};
  }
  return j.dump(2);
}

std::string index_set_json(const MultiIndexSet& iset) {
  json arr = json::array();
  for (const MultiIndex& nu : iset.indices()) arr.push_back(nu);
  return arr.dump();
}

std::string summary_json(const ProblemDefinition& problem, const RunConfig& config,
                         const RunResult& result) {
  json j{{"problem", problem.name},
         {"converged", result.converged},
         {"stop_reason", result.stop_reason},
         {"iterations", result.state.iteration + 1},
         {"dofs", result.state.dofs()},
         {"n_points", result.state.grid->size()},
         {"n_vertices", result.state.mesh->vertex_count()},
         {"index_set", json::parse(index_set_json(result.state.iset))},
         {"tol", config.tol},
         {"qoi", qoi_to_json(result.qoi)}};
  if (!result.state.history.empty()) {
    const HistoryRow& last = result.state.history.back();
    if (last.estimate) j["estimate"] = *last.estimate;
  }
  return j.dump(2);
}

namespace {

Polygon parse_polygon(const std::string& s) {
  Polygon poly;
  std::istringstream in(s);
  double x, y;
  char sep;
  while (in >> x >> sep >> y) {
    poly.pts.push_back({x, y});
    in >> std::ws;
    if (in.peek() == ';') in.get();
  }
  if (poly.pts.size() < 3) throw std::invalid_argument("config: polygon needs >= 3 points");
  return poly;
}

}  // namespace

void apply_config_line(FileConfig& cfg, const std::string& key, const std::string& value) {
  auto& run = cfg.run;
  if (key == "setup") cfg.setup_id = std::stoi(value);
  else if (key == "tol") run.tol = std::stod(value);
  else if (key == "theta_x") run.theta_x = std::stod(value);
  else if (key == "theta_y") run.theta_y = std::stod(value);
  else if (key == "estimate_period") run.estimate_period = std::stoi(value);
  else if (key == "dof_cap") run.dof_cap = std::stoll(value);
  else if (key == "iteration_cap") run.iteration_cap = std::stoi(value);
  else if (key == "threads") run.threads = std::stoi(value);
  else if (key == "record_q_every_iteration") run.record_q_every_iteration = value != "0";
  else if (key == "seed") run.seed = static_cast<unsigned>(std::stoul(value));
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "family") {
    if (value != "clenshaw_curtis" && value != "leja")
      throw std::invalid_argument("config: unknown node family " + value);
    cfg.custom.family = value == "leja" ? NodeFamily::Kind::leja
                                        : NodeFamily::Kind::clenshaw_curtis;
    if (cfg.setup_id == 0) cfg.has_custom = true;
  } else if (key == "mesh_file") {
    cfg.custom.initial_mesh = std::make_shared<Mesh>(Mesh::load(value));
    cfg.has_custom = true;
  } else if (key == "transform" || key == "M" || key == "amplitude_scale") {
    // stashed; the coefficient is built once the whole file is read
    cfg.has_custom = true;
    if (key == "transform") cfg.custom_transform = value;
    else if (key == "M") cfg.custom_M = std::stoi(value);
    else cfg.custom_amplitude = std::stod(value);
  } else if (key == "modes") {
    // explicit mode table: amplitude,beta1,beta2; amplitude,beta1,beta2; ...
    cfg.has_custom = true;
    cfg.custom_modes.clear();
    std::istringstream in(value);
    std::string entry;
    while (std::getline(in, entry, ';')) {
      std::istringstream e(entry);
      double amp;
      int b1, b2;
      char c;
      if (e >> amp >> c >> b1 >> c >> b2) cfg.custom_modes.push_back({amp, b1, b2});
    }
    if (cfg.custom_modes.empty()) throw std::invalid_argument("config: empty mode table");
  } else if (key == "rhs") {
    cfg.has_custom = true;
    if (value == "constant_one") cfg.custom.rhs = RhsDescriptor::constant_one();
    else if (value.rfind("div_field:", 0) == 0)
      cfg.custom.rhs = RhsDescriptor::div_field(parse_polygon(value.substr(10)));
    else throw std::invalid_argument("config: unknown rhs " + value);
  } else if (key == "goal") {
    cfg.has_custom = true;
    if (value.rfind("linear_weight:", 0) == 0)
      cfg.custom.goal = GoalDescriptor::linear_weight(
          WeightFn::indicator(parse_polygon(value.substr(14))));
    else if (value.rfind("mollifier:", 0) == 0) {
      std::istringstream in(value.substr(10));
      double x, y, r;
      char c;
      in >> x >> c >> y >> c >> r;
      cfg.custom.goal = GoalDescriptor::linear_weight(WeightFn::mollifier({x, y}, r));
    } else if (value.rfind("second_moment:", 0) == 0) {
      const std::string rest = value.substr(14);
      const auto at = rest.find('@');
      const double scale = at == std::string::npos ? 1.0 : std::stod(rest.substr(at + 1));
      cfg.custom.goal = GoalDescriptor::second_moment(
          WeightFn::indicator(parse_polygon(rest.substr(0, at))), scale);
    } else if (value.rfind("convection:", 0) == 0)
      cfg.custom.goal =
          GoalDescriptor::convection(WeightFn::indicator(parse_polygon(value.substr(11))));
    else throw std::invalid_argument("config: unknown goal " + value);
  } else {
    throw std::invalid_argument("config: unknown key " + key);
  }
}

FileConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  FileConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) apply_config_line(cfg, key, value);
  }
  if (cfg.has_custom) {
    if (!cfg.custom.initial_mesh)
      throw std::invalid_argument("config: custom problem needs mesh_file");
    const Transform tr =
        cfg.custom_transform == "exponential" ? Transform::exponential : Transform::affine;
    if (cfg.custom_modes.empty()) {
      cfg.custom.coefficient = fourier_coefficient(tr, cfg.custom_M, cfg.custom_amplitude);
    } else {
      std::vector<FourierMode> modes;
      modes.push_back({1.0, 0, 0});
      for (const FourierMode& f : cfg.custom_modes) modes.push_back(f);
      cfg.custom.coefficient = std::make_shared<CoefficientField>(tr, std::move(modes));
    }
    cfg.custom.name = "custom";
  }
  return cfg;
}

}  // namespace scgoal
