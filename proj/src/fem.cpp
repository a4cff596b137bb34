#include "scgoal/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <stdexcept>

namespace scgoal {

namespace {

constexpr int kAffineQuadDegree = 4;
constexpr int kExpQuadDegree = 7;
constexpr int kMollifierQuadDegree = 7;

Vec2 bary_point(const std::array<Vec2, 3>& p, const QuadPoint& q) {
  return {q.l0 * p[0].x + q.l1 * p[1].x + q.l2 * p[2].x,
          q.l0 * p[0].y + q.l1 * p[1].y + q.l2 * p[2].y};
}

bool triangle_inside(const Mesh& mesh, int t, const Polygon& poly) {
  return poly.contains(mesh.centroid(t));
}

}  // namespace

CoefficientField::CoefficientField(Transform transform, std::vector<FourierMode> modes)
    : transform_(transform), modes_(std::move(modes)) {
  if (modes_.empty()) throw std::invalid_argument("coefficient: needs h0");
}

double CoefficientField::mode_value(int m, Vec2 x) const {
  const FourierMode& f = modes_[m];
  return f.amplitude * std::cos(2.0 * M_PI * f.beta1 * x.x) *
         std::cos(2.0 * M_PI * f.beta2 * x.y);
}

double CoefficientField::h(Vec2 x, std::span<const double> y) const {
  if (static_cast<int>(y.size()) != dimension())
    throw std::invalid_argument("coefficient: parameter dimension mismatch");
  double s = mode_value(0, x);
  for (int m = 1; m <= dimension(); ++m) s += y[m - 1] * mode_value(m, x);
  return s;
}

double CoefficientField::value(Vec2 x, std::span<const double> y) const {
  const double hv = h(x, y);
  return transform_ == Transform::affine ? hv : std::exp(hv);
}

WeightFn WeightFn::indicator(Polygon poly) {
  WeightFn w;
  w.kind = Kind::indicator;
  w.support = std::move(poly);
  return w;
}

WeightFn WeightFn::mollifier(Vec2 center, double radius) {
  WeightFn w;
  w.kind = Kind::mollifier;
  w.center = center;
  w.radius = radius;
  // Normalize to unit mass: int_0^{r^2} exp(-r^2/(r^2-t)) dt times pi.
  const GaussRule& gr = gauss_legendre(200);
  const double r2 = radius * radius;
  double integral = 0.0;
  for (std::size_t i = 0; i < gr.x.size(); ++i) {
    const double t = 0.5 * r2 * (gr.x[i] + 1.0);
    integral += 0.5 * r2 * gr.w[i] * std::exp(-r2 / (r2 - t));
  }
  w.moll_scale = 1.0 / (M_PI * integral);
  return w;
}

double WeightFn::eval(Vec2 x) const {
  if (kind == Kind::indicator)
    return support.contains(x) ? 1.0 / support.area() : 0.0;
  const Vec2 d = x - center;
  const double s2 = dot(d, d);
  const double r2 = radius * radius;
  if (s2 >= r2) return 0.0;
  return moll_scale * std::exp(-r2 / (r2 - s2));
}

StiffnessCache::StiffnessCache(std::shared_ptr<const Mesh> mesh,
                               std::shared_ptr<const CoefficientField> coeff)
    : mesh_(std::move(mesh)), coeff_(std::move(coeff)) {
  const int M = coeff_->dimension();
  modes_.resize(M + 1);
  mode_ready_.assign(M + 1, 0);
  // Built eagerly: matrix() runs concurrently across collocation points.
  unit_ = assemble(0, true);
  unit_ready_ = true;
  if (coeff_->transform() == Transform::affine) {
    for (int m = 0; m <= M; ++m) {
      modes_[m] = assemble(m, false);
      mode_ready_[m] = 1;
    }
    const auto& rule = triangle_rule(kAffineQuadDegree);
    const int nq = static_cast<int>(rule.size());
    quad_mode_values_.resize(static_cast<std::size_t>(mesh_->triangle_count()) * nq * (M + 1));
    std::size_t idx = 0;
    for (int t = 0; t < mesh_->triangle_count(); ++t) {
      const auto p = mesh_->triangle_points(t);
      for (int q = 0; q < nq; ++q) {
        const Vec2 x = bary_point(p, rule[q]);
        for (int m = 0; m <= M; ++m) quad_mode_values_[idx++] = coeff_->mode_value(m, x);
      }
    }
  }
}

SpMat StiffnessCache::assemble(int mode, bool unit) const {
  const Mesh& mesh = *mesh_;
  const int n = mesh.interior_count();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.triangle_count() * 9);
  const auto& rule = triangle_rule(kAffineQuadDegree);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto p = mesh.triangle_points(t);
    const auto g = p1_gradients(p[0], p[1], p[2]);
    const double area = mesh.triangle_area(t);
    double coeff_int = area;
    if (!unit) {
      double s = 0.0;
      for (const QuadPoint& q : rule) s += q.w * coeff_->mode_value(mode, bary_point(p, q));
      coeff_int = area * s;
    }
    const auto& v = mesh.triangle(t).v;
    for (int i = 0; i < 3; ++i) {
      const int gi = mesh.interior_index(v[i]);
      if (gi < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int gj = mesh.interior_index(v[j]);
        if (gj < 0) continue;
        trips.emplace_back(gi, gj, coeff_int * dot(g[i], g[j]));
      }
    }
  }
  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

const SpMat& StiffnessCache::mode_matrix(int m) const {
  if (coeff_->transform() != Transform::affine)
    throw std::logic_error("mode_matrix: affine transform only");
  if (!mode_ready_[m]) {
    modes_[m] = assemble(m, false);
    mode_ready_[m] = 1;
  }
  return modes_[m];
}

const SpMat& StiffnessCache::unit_matrix() const {
  if (!unit_ready_) {
    unit_ = assemble(0, true);
    unit_ready_ = true;
  }
  return unit_;
}

double StiffnessCache::min_sampled_coefficient(std::span<const double> y) const {
  const Mesh& mesh = *mesh_;
  const int M = coeff_->dimension();
  const auto& rule = triangle_rule(coeff_->transform() == Transform::affine ? kAffineQuadDegree
                                                                            : kExpQuadDegree);
  const int nq = static_cast<int>(rule.size());
  double lo = std::numeric_limits<double>::infinity();
  if (coeff_->transform() == Transform::affine) {
    std::size_t idx = 0;
    const std::size_t cells = static_cast<std::size_t>(mesh.triangle_count()) * nq;
    for (std::size_t c = 0; c < cells; ++c) {
      double s = quad_mode_values_[idx++];
      for (int m = 0; m < M; ++m) s += y[m] * quad_mode_values_[idx++];
      lo = std::min(lo, s);
    }
  } else {
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const auto p = mesh.triangle_points(t);
      for (const QuadPoint& q : rule)
        lo = std::min(lo, coeff_->value(bary_point(p, q), y));
    }
  }
  return lo;
}

SpMat StiffnessCache::matrix(std::span<const double> y) const {
  const int M = coeff_->dimension();
  if (static_cast<int>(y.size()) != M)
    throw std::invalid_argument("stiffness: parameter dimension mismatch");
  if (coeff_->transform() == Transform::affine) {
    if (min_sampled_coefficient(y) <= 0.0)
      throw std::runtime_error("stiffness: sampled coefficient is not positive");
    SpMat A = mode_matrix(0);
    for (int m = 1; m <= M; ++m) {
      const SpMat& Am = mode_matrix(m);
      // identical sparsity pattern by construction
      Eigen::Map<Eigen::VectorXd>(A.valuePtr(), A.nonZeros()) +=
          y[m - 1] * Eigen::Map<const Eigen::VectorXd>(Am.valuePtr(), Am.nonZeros());
    }
    return A;
  }
  return assemble_stiffness(*mesh_, *coeff_, y);
}

SpMat assemble_stiffness(const Mesh& mesh, const CoefficientField& coeff,
                         std::span<const double> y) {
  const int n = mesh.interior_count();
  const bool affine = coeff.transform() == Transform::affine;
  const auto& rule = triangle_rule(affine ? kAffineQuadDegree : kExpQuadDegree);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.triangle_count() * 9);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto p = mesh.triangle_points(t);
    const auto g = p1_gradients(p[0], p[1], p[2]);
    const double area = mesh.triangle_area(t);
    double s = 0.0;
    for (const QuadPoint& q : rule) {
      const double a = coeff.value(bary_point(p, q), y);
      if (a <= 0.0)
        throw std::runtime_error("stiffness: sampled coefficient is not positive");
      s += q.w * a;
    }
    const double coeff_int = area * s;
    const auto& v = mesh.triangle(t).v;
    for (int i = 0; i < 3; ++i) {
      const int gi = mesh.interior_index(v[i]);
      if (gi < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int gj = mesh.interior_index(v[j]);
        if (gj < 0) continue;
        trips.emplace_back(gi, gj, coeff_int * dot(g[i], g[j]));
      }
    }
  }
  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const RhsDescriptor& rhs) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.interior_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& v = mesh.triangle(t).v;
    const double area = mesh.triangle_area(t);
    if (rhs.kind == RhsDescriptor::Kind::constant_one) {
      for (int i = 0; i < 3; ++i) {
        const int gi = mesh.interior_index(v[i]);
        if (gi >= 0) b[gi] += area / 3.0;
      }
    } else {
      if (!triangle_inside(mesh, t, rhs.field_support)) continue;
      const auto p = mesh.triangle_points(t);
      const auto g = p1_gradients(p[0], p[1], p[2]);
      for (int i = 0; i < 3; ++i) {
        const int gi = mesh.interior_index(v[i]);
        if (gi >= 0) b[gi] -= area * g[i].x;
      }
    }
  }
  if (rhs.kind == RhsDescriptor::Kind::div_field) {
    // T_f must be resolved by the mesh: covered triangle area equals |T_f|.
    double covered = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t)
      if (triangle_inside(mesh, t, rhs.field_support)) covered += mesh.triangle_area(t);
    if (std::abs(covered - rhs.field_support.area()) > 1e-10 * rhs.field_support.area())
      throw std::runtime_error("load: div-field triangle is not resolved by the mesh");
  }
  return b;
}

Eigen::VectorXd weight_load(const Mesh& mesh, const WeightFn& q) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.interior_count());
  if (q.kind == WeightFn::Kind::indicator) {
    const double inv_area = 1.0 / q.support.area();
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      if (!triangle_inside(mesh, t, q.support)) continue;
      const auto& v = mesh.triangle(t).v;
      const double w = mesh.triangle_area(t) / 3.0 * inv_area;
      for (int i = 0; i < 3; ++i) {
        const int gi = mesh.interior_index(v[i]);
        if (gi >= 0) b[gi] += w;
      }
    }
  } else {
    const auto& rule = triangle_rule(kMollifierQuadDegree);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const auto p = mesh.triangle_points(t);
      // skip triangles clearly outside the bump support
      double dmin = std::numeric_limits<double>::infinity();
      for (const Vec2& pt : p) dmin = std::min(dmin, norm(pt - q.center));
      if (dmin > q.radius + norm(p[1] - p[0]) + norm(p[2] - p[0])) continue;
      const double area = mesh.triangle_area(t);
      const auto& v = mesh.triangle(t).v;
      for (const QuadPoint& qp : rule) {
        const double qv = q.eval(bary_point(p, qp));
        if (qv == 0.0) continue;
        const double lam[3] = {qp.l0, qp.l1, qp.l2};
        for (int i = 0; i < 3; ++i) {
          const int gi = mesh.interior_index(v[i]);
          if (gi >= 0) b[gi] += area * qp.w * qv * lam[i];
        }
      }
    }
  }
  return b;
}

SpMat convection_matrix(const Mesh& mesh, const WeightFn& q) {
  if (q.kind != WeightFn::Kind::indicator)
    throw std::invalid_argument("convection: indicator weights only");
  const int n = mesh.interior_count();
  const double inv_area = 1.0 / q.support.area();
  std::vector<Eigen::Triplet<double>> trips;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (!triangle_inside(mesh, t, q.support)) continue;
    const auto p = mesh.triangle_points(t);
    const auto g = p1_gradients(p[0], p[1], p[2]);
    const double area = mesh.triangle_area(t);
    const auto& v = mesh.triangle(t).v;
    for (int i = 0; i < 3; ++i) {
      const int gi = mesh.interior_index(v[i]);
      if (gi < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int gj = mesh.interior_index(v[j]);
        if (gj < 0) continue;
        trips.emplace_back(gi, gj, inv_area * area / 3.0 * (g[j].x + g[j].y));
      }
    }
  }
  SpMat B(n, n);
  B.setFromTriplets(trips.begin(), trips.end());
  B.makeCompressed();
  return B;
}

namespace {
// Sparse factorization pays off over diagonal CG from roughly this size.
constexpr int kDirectSolveThreshold = 50000;
}  // namespace

struct SpdSolver::Impl {
  const SpMat* A = nullptr;
  SolveOptions opt;
  std::unique_ptr<Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper>> cg;
  std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt;
};

SpdSolver::SpdSolver(const SpMat& A, const SolveOptions& opt) : impl_(new Impl) {
  impl_->A = &A;
  impl_->opt = opt;
  if (A.rows() >= kDirectSolveThreshold) {
    impl_->ldlt = std::make_unique<Eigen::SimplicialLDLT<SpMat>>();
    impl_->ldlt->compute(A);
    if (impl_->ldlt->info() != Eigen::Success)
      throw std::runtime_error("solve: factorization failed");
  } else {
    impl_->cg =
        std::make_unique<Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper>>();
    impl_->cg->setTolerance(opt.rtol);
    impl_->cg->setMaxIterations(opt.max_iterations);
    impl_->cg->compute(A);
  }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const {
  return solve(b, Eigen::VectorXd::Zero(b.size()));
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b, const Eigen::VectorXd& guess) const {
  if (b.size() == 0) return b;
  if (impl_->ldlt) {
    Eigen::VectorXd x = impl_->ldlt->solve(b);
    const double bnorm = b.norm();
    double res = (b - *impl_->A * x).norm();
    if (res > impl_->opt.rtol * bnorm) {
      // one step of iterative refinement, then enforce the contract
      x += impl_->ldlt->solve(b - *impl_->A * x);
      res = (b - *impl_->A * x).norm();
      if (res > impl_->opt.rtol * bnorm)
        throw std::runtime_error("solve: residual " + std::to_string(res) +
                                 " exceeds tolerance");
    }
    return x;
  }
  Eigen::VectorXd x = impl_->cg->solveWithGuess(b, guess);
  if (impl_->cg->info() != Eigen::Success)
    throw std::runtime_error("solve: CG did not converge, residual " +
                             std::to_string(impl_->cg->error()));
  return x;
}

Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& b, const SolveOptions& opt) {
  return SpdSolver(A, opt).solve(b);
}

Eigen::VectorXd solve_spd_guess(const SpMat& A, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& guess, const SolveOptions& opt) {
  return SpdSolver(A, opt).solve(b, guess);
}

double h1_inner(const Mesh& mesh, const FemVector& u, const FemVector& v) {
  if (u.mesh_id != mesh.id() || v.mesh_id != mesh.id())
    throw std::invalid_argument("h1_inner: mesh mismatch");
  double s = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto p = mesh.triangle_points(t);
    const auto g = p1_gradients(p[0], p[1], p[2]);
    const auto& vv = mesh.triangle(t).v;
    Vec2 gu{0, 0}, gv{0, 0};
    for (int i = 0; i < 3; ++i) {
      const int gi = mesh.interior_index(vv[i]);
      if (gi < 0) continue;
      gu = gu + u.coeffs[gi] * g[i];
      gv = gv + v.coeffs[gi] * g[i];
    }
    s += mesh.triangle_area(t) * dot(gu, gv);
  }
  return s;
}

double weighted_integral(const Mesh& mesh, const WeightFn& q, const FemVector& u) {
  if (u.mesh_id != mesh.id()) throw std::invalid_argument("weighted_integral: mesh mismatch");
  return weight_load(mesh, q).dot(u.coeffs);
}

double convection_pair(const Mesh& mesh, const WeightFn& q, const FemVector& u,
                       const FemVector& v) {
  if (u.mesh_id != mesh.id() || v.mesh_id != mesh.id())
    throw std::invalid_argument("convection_pair: mesh mismatch");
  return u.coeffs.dot(convection_matrix(mesh, q) * v.coeffs);
}

FemVector prolong(const Mesh& coarse, const RefineResult& fine, const FemVector& u) {
  if (u.mesh_id != coarse.id()) throw std::invalid_argument("prolong: mesh mismatch");
  const Mesh& fm = *fine.mesh;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(fm.vertex_count());
  for (int v = 0; v < coarse.vertex_count(); ++v) {
    const int gi = coarse.interior_index(v);
    full[v] = gi >= 0 ? u.coeffs[gi] : 0.0;
  }
  for (std::size_t i = 0; i < fine.midpoint_parents.size(); ++i) {
    const auto& pr = fine.midpoint_parents[i];
    full[coarse.vertex_count() + i] = 0.5 * (full[pr[0]] + full[pr[1]]);
  }
  Eigen::VectorXd out(fm.interior_count());
  for (int v = 0; v < fm.vertex_count(); ++v) {
    const int gi = fm.interior_index(v);
    if (gi >= 0) out[gi] = full[v];
  }
  return FemVector(std::move(out), fm.id());
}

TwoLevelContext::TwoLevelContext(std::shared_ptr<const Mesh> mesh,
                                 std::shared_ptr<const CoefficientField> coeff)
    : mesh_(std::move(mesh)), coeff_(std::move(coeff)) {
  const Mesh& m = *mesh_;
  details_ = detail_nodes(m);
  const int N = node_count();
  nodes_.resize(N);
  hat_norms_.resize(N);
  const bool affine = coeff_->transform() == Transform::affine;
  const int M = coeff_->dimension();
  if (affine) child_mode_integrals_.resize(N);
  const auto& rule = triangle_rule(affine ? kAffineQuadDegree : kExpQuadDegree);

  for (int i = 0; i < N; ++i) {
    const DetailNode& d = details_.nodes[i];
    NodeCtx& ctx = nodes_[i];
    double norm2 = 0.0;
    for (int t : d.tris) {
      const auto& tv = m.triangle(t).v;
      const auto p = m.triangle_points(t);
      const Vec2 w = midpoint(p[1], p[2]);
      const Vec2 m01 = midpoint(p[0], p[1]);
      const Vec2 m20 = midpoint(p[2], p[0]);
      // fine-node ids within the parent: corners 0..2, then w=3, m01=4, m20=5
      const std::array<std::array<Vec2, 3>, 4> child_pts = {
          std::array<Vec2, 3>{m01, w, p[0]}, std::array<Vec2, 3>{m01, p[1], w},
          std::array<Vec2, 3>{m20, w, p[2]}, std::array<Vec2, 3>{m20, p[0], w}};
      const std::array<std::array<int, 3>, 4> child_ids = {
          std::array<int, 3>{4, 3, 0}, std::array<int, 3>{4, 1, 3},
          std::array<int, 3>{5, 3, 2}, std::array<int, 3>{5, 0, 3}};
      // which fine node is the detail midpoint
      auto sorted_pair = [](int a, int b) { return std::array<int, 2>{std::min(a, b), std::max(a, b)}; };
      int mid_id = -1;
      if (sorted_pair(tv[1], tv[2]) == d.edge) mid_id = 3;
      else if (sorted_pair(tv[0], tv[1]) == d.edge) mid_id = 4;
      else if (sorted_pair(tv[2], tv[0]) == d.edge) mid_id = 5;
      else throw std::logic_error("two-level: detail edge not on adjacent triangle");

      for (int c = 0; c < 4; ++c) {
        std::array<double, 3> vals{0, 0, 0};
        bool nonzero = false;
        for (int k = 0; k < 3; ++k) {
          if (child_ids[c][k] == mid_id) {
            vals[k] = 1.0;
            nonzero = true;
          }
        }
        if (!nonzero) continue;
        const auto& cp = child_pts[c];
        const auto g = p1_gradients(cp[0], cp[1], cp[2]);
        Vec2 gh{0, 0};
        for (int k = 0; k < 3; ++k) gh = gh + vals[k] * g[k];
        const double area = signed_area(cp[0], cp[1], cp[2]);
        ctx.children.push_back({t, area, gh, cp, vals});
        norm2 += area * dot(gh, gh);
        if (affine) {
          std::vector<double> ints(M + 1, 0.0);
          for (const QuadPoint& q : rule) {
            const Vec2 x = bary_point(cp, q);
            for (int mm = 0; mm <= M; ++mm) ints[mm] += q.w * coeff_->mode_value(mm, x);
          }
          for (double& v : ints) v *= area;
          child_mode_integrals_[i].push_back(std::move(ints));
        }
      }
    }
    hat_norms_[i] = std::sqrt(norm2);
  }
}

std::vector<double> TwoLevelContext::hat_loads(const RhsDescriptor& rhs) const {
  const int N = node_count();
  std::vector<double> out(N, 0.0);
  for (int i = 0; i < N; ++i) {
    double s = 0.0;
    for (const Child& c : nodes_[i].children) {
      if (rhs.kind == RhsDescriptor::Kind::constant_one) {
        s += c.area / 3.0 * (c.hat_vals[0] + c.hat_vals[1] + c.hat_vals[2]);
      } else if (triangle_inside(*mesh_, c.coarse_tri, rhs.field_support)) {
        s -= c.area * c.grad_hat.x;
      }
    }
    out[i] = s;
  }
  return out;
}

std::vector<double> TwoLevelContext::hat_loads(const WeightFn& q) const {
  const int N = node_count();
  std::vector<double> out(N, 0.0);
  const auto& rule = triangle_rule(kMollifierQuadDegree);
  for (int i = 0; i < N; ++i) {
    double s = 0.0;
    for (const Child& c : nodes_[i].children) {
      if (q.kind == WeightFn::Kind::indicator) {
        if (triangle_inside(*mesh_, c.coarse_tri, q.support))
          s += c.area / 3.0 * (c.hat_vals[0] + c.hat_vals[1] + c.hat_vals[2]) /
               q.support.area();
      } else {
        for (const QuadPoint& qp : rule) {
          const double qv = q.eval(bary_point(c.pts, qp));
          if (qv == 0.0) continue;
          s += c.area * qp.w * qv *
               (qp.l0 * c.hat_vals[0] + qp.l1 * c.hat_vals[1] + qp.l2 * c.hat_vals[2]);
        }
      }
    }
    out[i] = s;
  }
  return out;
}

std::vector<double> TwoLevelContext::hat_loads_convection(const WeightFn& q,
                                                          const FemVector& u) const {
  if (q.kind != WeightFn::Kind::indicator)
    throw std::invalid_argument("convection: indicator weights only");
  if (u.mesh_id != mesh_->id()) throw std::invalid_argument("convection: mesh mismatch");
  const Mesh& m = *mesh_;
  const double inv_area = 1.0 / q.support.area();
  const int N = node_count();
  std::vector<double> out(N, 0.0);
  for (int i = 0; i < N; ++i) {
    double s = 0.0;
    for (const Child& c : nodes_[i].children) {
      if (!triangle_inside(m, c.coarse_tri, q.support)) continue;
      const auto& tv = m.triangle(c.coarse_tri).v;
      const auto p = m.triangle_points(c.coarse_tri);
      const auto g = p1_gradients(p[0], p[1], p[2]);
      Vec2 gu{0, 0};
      double uv[3] = {0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        const int gi = m.interior_index(tv[k]);
        uv[k] = gi >= 0 ? u.coeffs[gi] : 0.0;
        gu = gu + uv[k] * g[k];
      }
      // <Q'(u), hat> = int q [hat*(d1+d2)u + u*(d1+d2)hat]
      const double du = gu.x + gu.y;
      const double dhat = c.grad_hat.x + c.grad_hat.y;
      const double int_hat = c.area / 3.0 * (c.hat_vals[0] + c.hat_vals[1] + c.hat_vals[2]);
      // mean of u over the child: u is linear on the parent triangle
      double u_mean = 0.0;
      for (const Vec2& cp : c.pts) {
        // barycentric evaluation of u at the child's corners
        const double A = signed_area(p[0], p[1], p[2]);
        const double l0 = signed_area(cp, p[1], p[2]) / A;
        const double l1 = signed_area(p[0], cp, p[2]) / A;
        const double l2 = signed_area(p[0], p[1], cp) / A;
        u_mean += (l0 * uv[0] + l1 * uv[1] + l2 * uv[2]) / 3.0;
      }
      s += inv_area * (du * int_hat + dhat * c.area * u_mean);
    }
    out[i] = s;
  }
  return out;
}

std::vector<double> TwoLevelContext::residual_numerators(std::span<const double> y,
                                                         const FemVector& u,
                                                         const std::vector<double>& loads) const {
  if (u.mesh_id != mesh_->id())
    throw std::invalid_argument("two_level_residual: mesh mismatch");
  const Mesh& m = *mesh_;
  const int M = coeff_->dimension();
  const bool affine = coeff_->transform() == Transform::affine;
  const auto& rule = triangle_rule(kExpQuadDegree);
  const int N = node_count();

  // gradient of u per coarse triangle
  std::vector<Vec2> grad_u(m.triangle_count());
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto p = m.triangle_points(t);
    const auto g = p1_gradients(p[0], p[1], p[2]);
    const auto& tv = m.triangle(t).v;
    Vec2 gu{0, 0};
    for (int k = 0; k < 3; ++k) {
      const int gi = m.interior_index(tv[k]);
      if (gi >= 0) gu = gu + u.coeffs[gi] * g[k];
    }
    grad_u[t] = gu;
  }

  std::vector<double> out(N);
  for (int i = 0; i < N; ++i) {
    double b = 0.0;
    const auto& children = nodes_[i].children;
    for (std::size_t ci = 0; ci < children.size(); ++ci) {
      const Child& c = children[ci];
      double coeff_int;
      if (affine) {
        const auto& ints = child_mode_integrals_[i][ci];
        coeff_int = ints[0];
        for (int mm = 0; mm < M; ++mm) coeff_int += y[mm] * ints[mm + 1];
      } else {
        double s = 0.0;
        for (const QuadPoint& q : rule) s += q.w * coeff_->value(bary_point(c.pts, q), y);
        coeff_int = c.area * s;
      }
      b += coeff_int * dot(grad_u[c.coarse_tri], c.grad_hat);
    }
    out[i] = std::abs(loads[i] - b);
  }
  return out;
}

std::pair<double, double> TwoLevelContext::two_level_residual(std::span<const double> y,
                                                              const FemVector& u,
                                                              const std::vector<double>& loads,
                                                              int node) const {
  if (node < 0 || node >= node_count())
    throw std::invalid_argument("two_level_residual: not a detail node");
  const auto nums = residual_numerators(y, u, loads);
  return {nums[node], hat_norms_[node]};
}

}  // namespace scgoal
