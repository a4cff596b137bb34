#pragma once

#include <set>
#include <vector>

namespace scgoal {

/// Multi-index in N^M with all components >= 1.
using MultiIndex = std::vector<int>;

/// Finite downward-closed (monotone) set of multi-indices.
class MultiIndexSet {
 public:
  MultiIndexSet(int dimension, std::vector<MultiIndex> indices);
  static MultiIndexSet root(int dimension);  // {(1,...,1)}

  int dimension() const { return dim_; }
  int size() const { return static_cast<int>(set_.size()); }
  bool contains(const MultiIndex& nu) const { return set_.count(nu) > 0; }
  const std::set<MultiIndex>& indices() const { return set_; }

  MultiIndexSet with(const std::vector<MultiIndex>& extra) const;

  static bool is_monotone(int dimension, const std::set<MultiIndex>& set);

 private:
  int dim_;
  std::set<MultiIndex> set_;
};

std::vector<MultiIndex> margin(const MultiIndexSet& iset);
std::vector<MultiIndex> reduced_margin(const MultiIndexSet& iset);

}  // namespace scgoal
