#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace scgoal {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
inline Vec2 midpoint(Vec2 a, Vec2 b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

inline double signed_area(Vec2 a, Vec2 b, Vec2 c) { return 0.5 * cross(b - a, c - a); }

/// Gradients of the three P1 barycentric basis functions on a triangle.
inline std::array<Vec2, 3> p1_gradients(Vec2 a, Vec2 b, Vec2 c) {
  const double inv2A = 1.0 / (2.0 * signed_area(a, b, c));
  return {Vec2{(b.y - c.y) * inv2A, (c.x - b.x) * inv2A},
          Vec2{(c.y - a.y) * inv2A, (a.x - c.x) * inv2A},
          Vec2{(a.y - b.y) * inv2A, (b.x - a.x) * inv2A}};
}

/// Simple closed polygon with convex-or-not point location by winding.
struct Polygon {
  std::vector<Vec2> pts;

  double area() const {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec2& p = pts[i];
      const Vec2& q = pts[(i + 1) % pts.size()];
      s += cross(p, q);
    }
    return 0.5 * s;
  }

  // Points on the boundary count as inside; adequate for centroid tests of
  // resolved subdomains.
  bool contains(Vec2 p, double tol = 1e-12) const {
    int winding = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Vec2 a = pts[i];
      Vec2 b = pts[(i + 1) % pts.size()];
      const double c = cross(b - a, p - a);
      if (std::abs(c) <= tol * (norm(b - a) + 1.0) &&
          dot(p - a, p - b) <= tol)
        return true;
      if (a.y <= p.y) {
        if (b.y > p.y && c > 0) ++winding;
      } else {
        if (b.y <= p.y && c < 0) --winding;
      }
    }
    return winding != 0;
  }
};

struct QuadPoint {
  double l0, l1, l2;  // barycentric coordinates
  double w;           // weight, normalized to sum to 1
};

/// Symmetric triangle quadrature rules, exact for the stated polynomial degree.
/// Weights are relative to the triangle area.
const std::vector<QuadPoint>& triangle_rule(int degree);

/// Gauss-Legendre nodes/weights on [-1,1]; weights sum to 2. Cached per n.
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};
const GaussRule& gauss_legendre(int n);

}  // namespace scgoal
