#include "scgoal/problems.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>

#include "scgoal/parallel.hpp"

namespace scgoal {

FourierMode fourier_mode(int m) {
  if (m < 1) throw std::invalid_argument("fourier_mode: m must be >= 1");
  // k(m) brackets m between consecutive triangular numbers:
  // k(k+1)/2 <= m <= (k+1)(k+2)/2 - 1, so that 0 <= beta1 <= k.
  int k = static_cast<int>(std::floor(-0.5 + std::sqrt(0.25 + 2.0 * m)));
  while ((k + 1) * (k + 2) / 2 - 1 < m) ++k;
  while (k * (k + 1) / 2 > m) --k;
  const int beta1 = m - k * (k + 1) / 2;
  const int beta2 = k - beta1;
  return {0.547 / (static_cast<double>(m) * m), beta1, beta2};
}

std::shared_ptr<CoefficientField> fourier_coefficient(Transform transform, int M,
                                                      double amplitude_scale) {
  std::vector<FourierMode> modes;
  modes.push_back({1.0, 0, 0});  // h0 = 1
  for (int m = 1; m <= M; ++m) {
    FourierMode f = fourier_mode(m);
    f.amplitude *= amplitude_scale;
    modes.push_back(f);
  }
  return std::make_shared<CoefficientField>(transform, std::move(modes));
}

namespace {

// Reorder triangle vertices so the longest edge (ties: smallest sorted vertex
// pair) is the refinement edge (v1, v2), keeping positive orientation.
Triangle orient_triangle(const std::vector<Vec2>& verts, int a, int b, int c) {
  if (signed_area(verts[a], verts[b], verts[c]) < 0.0) std::swap(b, c);
  const int v[3] = {a, b, c};
  int best = 0;  // index of the vertex opposite the refinement edge
  double best_len = -1.0;
  std::array<int, 2> best_pair{};
  for (int i = 0; i < 3; ++i) {
    const int p = v[(i + 1) % 3], q = v[(i + 2) % 3];
    const double len = norm(verts[p] - verts[q]);
    std::array<int, 2> pair{std::min(p, q), std::max(p, q)};
    if (len > best_len + 1e-14 ||
        (std::abs(len - best_len) <= 1e-14 && pair < best_pair)) {
      best_len = len;
      best = i;
      best_pair = pair;
    }
  }
  return Triangle{{v[best], v[(best + 1) % 3], v[(best + 2) % 3]}, 0};
}

Mesh finish_mesh(const std::vector<Vec2>& verts, const std::vector<std::array<int, 3>>& tris) {
  std::vector<Triangle> oriented;
  oriented.reserve(tris.size());
  for (const auto& t : tris) oriented.push_back(orient_triangle(verts, t[0], t[1], t[2]));
  // boundary flags from edge incidence
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : oriented)
    for (int e = 0; e < 3; ++e) {
      int p = t.v[e], q = t.v[(e + 1) % 3];
      if (p > q) std::swap(p, q);
      edge_count[{p, q}]++;
    }
  std::vector<std::uint8_t> bnd(verts.size(), 0);
  for (const auto& [edge, count] : edge_count)
    if (count == 1) bnd[edge.first] = bnd[edge.second] = 1;
  return Mesh(verts, bnd, oriented);
}

}  // namespace

Mesh build_square_mesh(double x0, double y0, double x1, double y1, int n) {
  std::vector<Vec2> verts;
  const double hx = (x1 - x0) / n, hy = (y1 - y0) / n;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) verts.push_back({x0 + i * hx, y0 + j * hy});
  auto vid = [&](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      // split along the anti-diagonal so the benchmark subdomains are resolved
      tris.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
      tris.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return finish_mesh(verts, tris);
}

Mesh build_lshape_mesh(int n) {
  // (-1,1)^2 without the closed quadrant (-1,0]^2; n cells per unit length.
  const double h = 1.0 / n;
  std::vector<Vec2> verts;
  std::map<std::pair<int, int>, int> id;
  for (int j = 0; j <= 2 * n; ++j)
    for (int i = 0; i <= 2 * n; ++i) {
      if (i >= n || j >= n) {  // x >= 0 or y >= 0
        id[{i, j}] = static_cast<int>(verts.size());
        verts.push_back({-1.0 + i * h, -1.0 + j * h});
      }
    }
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < 2 * n; ++j)
    for (int i = 0; i < 2 * n; ++i) {
      if (i < n && j < n) continue;  // cell in the removed quadrant
      const int a = id.at({i, j}), b = id.at({i + 1, j});
      const int c = id.at({i + 1, j + 1}), d = id.at({i, j + 1});
      tris.push_back({a, b, d});
      tris.push_back({b, c, d});
    }
  return finish_mesh(verts, tris);
}

Mesh build_slit_mesh(double delta) {
  // Rays from the slit tip to the outer boundary, with two interior rings for
  // grading toward the tip.
  const std::vector<Vec2> outer = {{-1.0, delta}, {-1.0, 1.0}, {0.0, 1.0},
                                   {1.0, 1.0},    {1.0, 0.0},  {1.0, -1.0},
                                   {0.0, -1.0},   {-1.0, -1.0}, {-1.0, -delta}};
  std::vector<Vec2> verts;
  verts.push_back({0.0, 0.0});
  const std::vector<double> rings = {0.25, 0.5, 1.0};
  std::vector<std::vector<int>> ring_ids(rings.size());
  for (std::size_t r = 0; r < rings.size(); ++r)
    for (const Vec2& p : outer) {
      ring_ids[r].push_back(static_cast<int>(verts.size()));
      verts.push_back({rings[r] * p.x, rings[r] * p.y});
    }
  std::vector<std::array<int, 3>> tris;
  const int k = static_cast<int>(outer.size());
  for (int i = 0; i + 1 < k; ++i) tris.push_back({0, ring_ids[0][i], ring_ids[0][i + 1]});
  for (std::size_t r = 0; r + 1 < rings.size(); ++r)
    for (int i = 0; i + 1 < k; ++i) {
      const int a = ring_ids[r][i], b = ring_ids[r][i + 1];
      const int c = ring_ids[r + 1][i + 1], d = ring_ids[r + 1][i];
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  return finish_mesh(verts, tris);
}

std::string data_dir() {
  if (const char* env = std::getenv("SCGOAL_DATA_DIR")) return env;
#ifdef SCGOAL_DATA_PATH
  return SCGOAL_DATA_PATH;
#else
  return "data";
#endif
}

ProblemDefinition setup(int id) {
  ProblemDefinition p;
  switch (id) {
    case 1: {
      p.name = "setup1";
      p.initial_mesh = std::make_shared<Mesh>(Mesh::load(data_dir() + "/setup1_lshape.mesh"));
      p.coefficient = fourier_coefficient(Transform::affine, 4);
      p.rhs = RhsDescriptor::constant_one();
      p.goal = GoalDescriptor::linear_weight(
          WeightFn::indicator({{{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}}}));
      break;
    }
    case 2: {
      p.name = "setup2";
      p.initial_mesh = std::make_shared<Mesh>(Mesh::load(data_dir() + "/setup2_slit.mesh"));
      p.coefficient = fourier_coefficient(Transform::exponential, 4);
      p.rhs = RhsDescriptor::constant_one();
      p.goal = GoalDescriptor::linear_weight(WeightFn::mollifier({0.4, -0.5}, 0.15));
      break;
    }
    case 3: {
      p.name = "setup3";
      p.initial_mesh = std::make_shared<Mesh>(Mesh::load(data_dir() + "/setup3_square.mesh"));
      p.coefficient = fourier_coefficient(Transform::affine, 4);
      p.rhs = RhsDescriptor::div_field({{{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}}});
      p.goal = GoalDescriptor::second_moment(
          WeightFn::indicator({{{0.5, 1.0}, {1.0, 0.5}, {1.0, 1.0}}}), 100.0);
      break;
    }
    case 4: {
      p.name = "setup4";
      p.initial_mesh = std::make_shared<Mesh>(Mesh::load(data_dir() + "/setup4_lshape.mesh"));
      p.coefficient = fourier_coefficient(Transform::exponential, 10);
      p.rhs = RhsDescriptor::constant_one();
      p.goal = GoalDescriptor::convection(
          WeightFn::indicator({{{0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}}));
      break;
    }
    default:
      throw std::invalid_argument("setup: unknown id " + std::to_string(id));
  }
  p.family = NodeFamily::Kind::clenshaw_curtis;
  return p;
}

ReferenceResult reference_solve(const ProblemDefinition& problem, const AdaptiveState& state,
                                const RunConfig& config, int extra_refinements) {
  // Enrich the index set by its full margin.
  MultiIndexSet ref_iset = state.iset.with(margin(state.iset));
  std::shared_ptr<const Mesh> mesh = state.mesh;
  for (int r = 0; r < extra_refinements; ++r) mesh = uniform_refine(*mesh).mesh;

  const auto family = state.family;
  const auto grid = std::make_shared<CollocationGrid>(ref_iset, family);
  const auto enriched =
      std::make_shared<CollocationGrid>(ref_iset.with(reduced_margin(ref_iset)), family);

  StiffnessCache stiffness(mesh, problem.coefficient);
  GoalContext goal(mesh, problem.goal);
  const Eigen::VectorXd load = assemble_load(*mesh, problem.rhs);

  const int n = grid->size();
  std::vector<FemVector> us(n), zs(n);
  parallel_for(n, config.worker_count(), [&](int p) {
    const GridPoint& pt = grid->point(p);
    const SpMat A = stiffness.matrix(pt.coords);
    const SpdSolver solver(A);
    FemVector u(solver.solve(load), mesh->id());
    const Eigen::VectorXd zload = goal.dual_load(problem.goal.linear() ? nullptr : &u);
    zs[p] = FemVector(solver.solve(zload), mesh->id());
    us[p] = std::move(u);
  });
  SolutionMap primal, dual;
  for (int p = 0; p < n; ++p) {
    primal.emplace(grid->point(p).key, std::move(us[p]));
    dual.emplace(grid->point(p).key, std::move(zs[p]));
  }

  const QoiRecord rec =
      corrected_qoi(goal, problem.rhs, stiffness, *grid, *enriched, primal, dual);
  ReferenceResult out;
  out.q_ref = rec.q_corrected;
  out.dofs = static_cast<long long>(mesh->interior_count()) * grid->size();
  out.description = "index set + full margin (" + std::to_string(grid->size()) +
                    " points), P1 on " + std::to_string(extra_refinements) +
                    " uniform refinements (" + std::to_string(mesh->interior_count()) +
                    " interior vertices)";
  if (out.dofs <= state.dofs())
    throw std::logic_error("reference_solve: reference is not richer than the final state");
  return out;
}

}  // namespace scgoal
