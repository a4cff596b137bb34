#include "scgoal/geometry.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

namespace scgoal {

namespace {

std::vector<QuadPoint> symmetrize3(double a, double w, std::vector<QuadPoint>& out) {
  const double b = 1.0 - 2.0 * a;
  out.push_back({b, a, a, w});
  out.push_back({a, b, a, w});
  out.push_back({a, a, b, w});
  return out;
}

void symmetrize6(double a, double b, double w, std::vector<QuadPoint>& out) {
  const double c = 1.0 - a - b;
  out.push_back({a, b, c, w});
  out.push_back({a, c, b, w});
  out.push_back({b, a, c, w});
  out.push_back({b, c, a, w});
  out.push_back({c, a, b, w});
  out.push_back({c, b, a, w});
}

std::vector<QuadPoint> make_rule(int degree) {
  std::vector<QuadPoint> r;
  if (degree <= 1) {
    r.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0});
  } else if (degree <= 2) {
    symmetrize3(1.0 / 6.0, 1.0 / 3.0, r);
  } else if (degree <= 4) {
    // 6-point degree-4 rule (Cowper).
    symmetrize3(0.091576213509771, 0.109951743655322, r);
    symmetrize3(0.445948490915965, 0.223381589678011, r);
  } else {
    // 13-point degree-7 rule.
    r.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, -0.149570044467670});
    symmetrize3(0.260345966079038, 0.175615257433204, r);
    symmetrize3(0.065130102902216, 0.053347235608839, r);
    symmetrize6(0.638444188569809, 0.312865496004875, 0.077113760890257, r);
  }
  return r;
}

}  // namespace

const std::vector<QuadPoint>& triangle_rule(int degree) {
  static std::mutex mu;
  static std::map<int, std::vector<QuadPoint>> cache;
  const int key = degree <= 1 ? 1 : degree <= 2 ? 2 : degree <= 4 ? 4 : 7;
  std::scoped_lock lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make_rule(key)).first;
  return it->second;
}

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  std::scoped_lock lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n starting from the Chebyshev-based guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.x[i] = x;
    rule.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace scgoal
