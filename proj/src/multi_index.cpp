#include "scgoal/multi_index.hpp"

#include <stdexcept>

namespace scgoal {

MultiIndexSet::MultiIndexSet(int dimension, std::vector<MultiIndex> indices) : dim_(dimension) {
  for (auto& nu : indices) {
    if (static_cast<int>(nu.size()) != dim_)
      throw std::invalid_argument("multi-index dimension mismatch");
    for (int c : nu)
      if (c < 1) throw std::invalid_argument("multi-index component < 1");
    set_.insert(std::move(nu));
  }
  if (set_.empty()) throw std::invalid_argument("empty index set");
  if (!is_monotone(dim_, set_)) throw std::invalid_argument("index set is not downward closed");
}

MultiIndexSet MultiIndexSet::root(int dimension) {
  return MultiIndexSet(dimension, {MultiIndex(dimension, 1)});
}

bool MultiIndexSet::is_monotone(int dimension, const std::set<MultiIndex>& set) {
  for (const MultiIndex& nu : set) {
    MultiIndex down = nu;
    for (int m = 0; m < dimension; ++m) {
      if (nu[m] > 1) {
        --down[m];
        const bool ok = set.count(down) > 0;
        ++down[m];
        if (!ok) return false;
      }
    }
  }
  return true;
}

MultiIndexSet MultiIndexSet::with(const std::vector<MultiIndex>& extra) const {
  std::vector<MultiIndex> all(set_.begin(), set_.end());
  all.insert(all.end(), extra.begin(), extra.end());
  return MultiIndexSet(dim_, std::move(all));
}

std::vector<MultiIndex> margin(const MultiIndexSet& iset) {
  const int M = iset.dimension();
  std::set<MultiIndex> out;
  for (const MultiIndex& nu : iset.indices()) {
    MultiIndex up = nu;
    for (int m = 0; m < M; ++m) {
      ++up[m];
      if (!iset.contains(up)) out.insert(up);
      --up[m];
    }
  }
  return {out.begin(), out.end()};
}

std::vector<MultiIndex> reduced_margin(const MultiIndexSet& iset) {
  const int M = iset.dimension();
  std::vector<MultiIndex> out;
  for (const MultiIndex& nu : margin(iset)) {
    bool ok = true;
    MultiIndex down = nu;
    for (int m = 0; m < M && ok; ++m) {
      if (nu[m] > 1) {
        --down[m];
        ok = iset.contains(down);
        ++down[m];
      }
    }
    if (ok) out.push_back(nu);
  }
  return out;
}

}  // namespace scgoal
