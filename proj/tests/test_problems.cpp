#include <doctest.h>

#include <random>

#include "scgoal/problems.hpp"

using namespace scgoal;

namespace {

// High-order composite quadrature of f over the mesh.
double integrate(const Mesh& mesh, const std::function<double(Vec2)>& f) {
  double s = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto p = mesh.triangle_points(t);
    for (const QuadPoint& q : triangle_rule(7))
      s += q.w * mesh.triangle_area(t) *
           f({q.l0 * p[0].x + q.l1 * p[1].x + q.l2 * p[2].x,
              q.l0 * p[0].y + q.l1 * p[1].y + q.l2 * p[2].y});
  }
  return s;
}

double covered_area(const Mesh& mesh, const Polygon& poly) {
  double s = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t)
    if (poly.contains(mesh.centroid(t))) s += mesh.triangle_area(t);
  return s;
}

}  // namespace

TEST_CASE("fourier mode table") {
  const FourierMode m1 = fourier_mode(1);
  CHECK(m1.amplitude == doctest::Approx(0.547).epsilon(1e-15));
  CHECK(m1.beta1 == 0);
  CHECK(m1.beta2 == 1);
  const FourierMode m2 = fourier_mode(2);
  CHECK(m2.amplitude == doctest::Approx(0.547 / 4.0).epsilon(1e-15));
  CHECK(m2.beta1 == 1);
  CHECK(m2.beta2 == 0);
  const FourierMode m3 = fourier_mode(3);
  CHECK(m3.amplitude == doctest::Approx(0.547 / 9.0).epsilon(1e-15));
  CHECK(m3.beta1 == 0);
  CHECK(m3.beta2 == 2);
  SUBCASE("frequency pairs stay within their total order") {
    for (int m = 1; m <= 40; ++m) {
      const FourierMode f = fourier_mode(m);
      CHECK(f.beta1 >= 0);
      CHECK(f.beta2 >= 0);
      CHECK(f.beta1 + f.beta2 >= 1);
    }
  }
}

TEST_CASE("modes are orthogonal over the unit square") {
  const Mesh mesh = build_square_mesh(0, 0, 1, 1, 16);
  auto coeff = fourier_coefficient(Transform::affine, 5);
  for (int m = 1; m <= 5; ++m)
    for (int n = m + 1; n <= 5; ++n) {
      const double v = integrate(
          mesh, [&](Vec2 x) { return coeff->mode_value(m, x) * coeff->mode_value(n, x); });
      CHECK(std::abs(v) <= 1e-6);
    }
}

TEST_CASE("benchmark problem definitions") {
  SUBCASE("setup 1: linear goal over the square subdomain") {
    const ProblemDefinition p = setup(1);
    CHECK(p.goal.kind == GoalDescriptor::Kind::linear_weight);
    CHECK(p.goal.weight.kind == WeightFn::Kind::indicator);
    CHECK(p.goal.weight.support.area() == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p.coefficient->dimension() == 4);
    CHECK(p.coefficient->transform() == Transform::affine);
    CHECK(p.rhs.kind == RhsDescriptor::Kind::constant_one);
  }
  SUBCASE("setup 2: mollified point value on the slit domain") {
    const ProblemDefinition p = setup(2);
    CHECK(p.goal.weight.kind == WeightFn::Kind::mollifier);
    CHECK(p.goal.weight.center.x == doctest::Approx(0.4));
    CHECK(p.goal.weight.center.y == doctest::Approx(-0.5));
    CHECK(p.goal.weight.radius == doctest::Approx(0.15));
    CHECK(p.coefficient->transform() == Transform::exponential);
  }
  SUBCASE("setup 3: divergence forcing and second-moment goal") {
    const ProblemDefinition p = setup(3);
    CHECK(p.rhs.kind == RhsDescriptor::Kind::div_field);
    REQUIRE(p.rhs.field_support.pts.size() == 3);
    CHECK(p.rhs.field_support.area() == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(p.goal.kind == GoalDescriptor::Kind::second_moment);
    CHECK(p.goal.scale == 100.0);
  }
  SUBCASE("setup 4: convection goal with ten parameters") {
    const ProblemDefinition p = setup(4);
    CHECK(p.goal.kind == GoalDescriptor::Kind::convection);
    CHECK(p.coefficient->dimension() == 10);
    CHECK(p.coefficient->transform() == Transform::exponential);
    // coefficient bounds: exp(-hbar) <= a <= exp(hbar)
    double hbar = 0.0;
    for (int m = 1; m <= 10; ++m) hbar += 0.547 / (m * m);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> y(10);
      for (double& v : y) v = unif(rng);
      const Vec2 x = {unif(rng), unif(rng)};
      const double a = p.coefficient->value(x, y);
      CHECK(a >= std::exp(-1.0 - hbar) - 1e-12);
      CHECK(a <= std::exp(1.0 + hbar) + 1e-12);
    }
  }
}

TEST_CASE("setup-1 coefficient bounds hold at assembly points") {
  const ProblemDefinition p = setup(1);
  double spread = 0.0;
  for (int m = 1; m <= 4; ++m) spread += 0.547 / (m * m);
  const double a_min = 1.0 - spread, a_max = 1.0 + spread;
  const StiffnessCache cache(p.initial_mesh, p.coefficient);
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y(4);
    for (double& v : y) v = unif(rng);
    const double lo = cache.min_sampled_coefficient(y);
    CHECK(lo >= a_min - 1e-12);
    CHECK(lo <= a_max + 1e-12);
  }
}

TEST_CASE("initial meshes resolve their feature subdomains") {
  const ProblemDefinition p1 = setup(1);
  CHECK(covered_area(*p1.initial_mesh, p1.goal.weight.support) ==
        doctest::Approx(p1.goal.weight.support.area()).epsilon(1e-12));
  const ProblemDefinition p3 = setup(3);
  CHECK(covered_area(*p3.initial_mesh, p3.rhs.field_support) ==
        doctest::Approx(p3.rhs.field_support.area()).epsilon(1e-12));
  CHECK(covered_area(*p3.initial_mesh, p3.goal.weight.support) ==
        doctest::Approx(p3.goal.weight.support.area()).epsilon(1e-12));
  const ProblemDefinition p4 = setup(4);
  CHECK(covered_area(*p4.initial_mesh, p4.goal.weight.support) ==
        doctest::Approx(p4.goal.weight.support.area()).epsilon(1e-12));
  SUBCASE("slit mesh conforms to the notch") {
    const ProblemDefinition p2 = setup(2);
    CHECK(is_conforming(*p2.initial_mesh));
    // no triangle crosses into the removed notch
    const Polygon notch{{{0, 0}, {-1, 0.005}, {-1, -0.005}}};
    for (int t = 0; t < p2.initial_mesh->triangle_count(); ++t)
      CHECK_FALSE(notch.contains(p2.initial_mesh->centroid(t)));
  }
}

TEST_CASE("reference solve") {
  // deterministic problem: the reference lands within the final error estimate
  ProblemDefinition p;
  p.name = "deterministic";
  p.initial_mesh = std::make_shared<Mesh>(build_lshape_mesh(2));
  p.coefficient = fourier_coefficient(Transform::affine, 1, 0.0);
  p.rhs = RhsDescriptor::constant_one();
  p.goal = GoalDescriptor::linear_weight(
      WeightFn::indicator({{{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}}}));

  RunConfig config;
  config.tol = 1e-7;
  config.dof_cap = 3000;
  config.threads = 1;
  const RunResult r = run(p, config);
  const ReferenceResult ref = reference_solve(p, r.state, config);
  CHECK(ref.dofs > r.state.dofs());

  double estimate = 0.0;
  for (const HistoryRow& row : r.state.history)
    if (row.estimate) estimate = *row.estimate;
  CHECK(std::abs(ref.q_ref - r.qoi.q_corrected) <= estimate);

  SUBCASE("a richer reference moves the value by less than the gap") {
    const ReferenceResult ref3 = reference_solve(p, r.state, config, 3);
    CHECK(std::abs(ref3.q_ref - ref.q_ref) <=
          0.1 * std::abs(ref.q_ref - r.qoi.q_corrected) + 1e-14);
  }
}
