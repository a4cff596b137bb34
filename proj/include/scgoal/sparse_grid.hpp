#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "scgoal/multi_index.hpp"

namespace scgoal {

struct Node1D {
  std::int64_t key;  // level-independent identity exploiting nestedness
  double value;
};

/// Nested 1D node family with growth m(0)=0, m(1)=1 and either the
/// Clenshaw-Curtis doubling rule m(i)=2^{i-1}+1 or the linear Leja rule
/// m(i)=i. Also owns the cached 1D Lagrange integrals.
class NodeFamily {
 public:
  enum class Kind { clenshaw_curtis, leja };

  explicit NodeFamily(Kind kind) : kind_(kind) {}

  Kind kind() const { return kind_; }
  int count(int level) const;

  /// Nodes of the given level in ascending coordinate order.
  const std::vector<Node1D>& nodes(int level) const;

  /// All 1D Lagrange basis values for the level's nodes at y.
  std::vector<double> basis_values(int level, double y) const;

  // 1D integrals against dpi = dy/2 on [-1,1], cached.
  double mean1(int level, int j) const;
  double gram1(int la, int ja, int lb, int jb, bool weight_y) const;

 private:
  Kind kind_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::vector<Node1D>> node_cache_;
  mutable std::map<std::tuple<int, int>, double> mean_cache_;
  mutable std::map<std::tuple<int, int, int, int, bool>, double> gram_cache_;

  const std::vector<double>& leja_sequence(int n) const;
  mutable std::vector<double> leja_;
};

using PointKey = std::vector<std::int64_t>;

struct GridPoint {
  PointKey key;
  std::vector<double> coords;
};

/// Sparse collocation grid over a monotone index set, with the combination
/// technique representation of the multivariate Lagrange basis.
class CollocationGrid {
 public:
  CollocationGrid(MultiIndexSet iset, std::shared_ptr<const NodeFamily> family);

  int size() const { return static_cast<int>(points_.size()); }
  int dimension() const { return iset_.dimension(); }
  const MultiIndexSet& index_set() const { return iset_; }
  const NodeFamily& family() const { return *family_; }
  std::shared_ptr<const NodeFamily> family_ptr() const { return family_; }

  const GridPoint& point(int p) const { return points_[p]; }
  int find(const PointKey& key) const;

  /// Values of every basis function L_p at the parameter point y.
  std::vector<double> basis_at(const std::vector<double>& y) const;

  /// Exact parametric integrals of basis functions.
  double mean(int p) const { return means_[p]; }
  double gram(int p, int q) const { return gram_impl(0, p, q); }
  double weighted_gram(int m, int p, int q) const;  // weight y_m, m in 1..M
  double l2norm(int p) const;

  /// Quadrature weights of the grid-based rule (equal to the basis means).
  const std::vector<double>& quadrature_weights() const { return means_; }

 private:
  struct CombTerm {
    MultiIndex nu;
    int coeff;
    std::vector<int> levels;     // = nu
    std::vector<int> sizes;      // nodes per dimension
    std::vector<int> point_ids;  // odometer order, dim 0 slowest
  };
  struct Membership {
    int term;
    int rank;
  };

  double gram_impl(int weight_m, int p, int q) const;
  std::vector<int> rank_to_positions(const CombTerm& t, int rank) const;

  MultiIndexSet iset_;
  std::shared_ptr<const NodeFamily> family_;
  std::vector<GridPoint> points_;
  std::map<PointKey, int> index_;
  std::vector<std::map<double, std::int64_t>> coord_keys_;  // per-dim coordinate -> node key
  std::vector<CombTerm> terms_;
  std::vector<std::vector<Membership>> memberships_;  // per point
  std::vector<double> means_;

  mutable std::mutex gram_mutex_;
  mutable std::map<std::tuple<int, int, int>, double> gram_cache_;
};

/// Collocation points generated by adding nu (from the reduced margin) to the
/// base grid's index set.
std::vector<GridPoint> new_points(const CollocationGrid& base, const MultiIndex& nu);

/// Lagrange interpolation of point values at y; every grid point needs a value.
double interpolate(const CollocationGrid& grid, const std::map<PointKey, double>& values,
                   const std::vector<double>& y);

}  // namespace scgoal
