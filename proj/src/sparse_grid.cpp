#include "scgoal/sparse_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "scgoal/geometry.hpp"

namespace scgoal {

int NodeFamily::count(int level) const {
  if (level < 0) throw std::invalid_argument("node level < 0");
  if (level == 0) return 0;
  if (kind_ == Kind::leja) return level;
  return level == 1 ? 1 : (1 << (level - 1)) + 1;
}

const std::vector<double>& NodeFamily::leja_sequence(int n) const {
  // Deterministic greedy maximization of prod |y - y_j| over a fixed uniform
  // search grid; ties resolved toward smaller |y|.
  if (static_cast<int>(leja_.size()) < n) {
    if (leja_.empty()) leja_ = {0.0, 1.0, -1.0};
    constexpr int kSearch = 100000;
    while (static_cast<int>(leja_.size()) < n) {
      double best_val = -1.0, best_y = 0.0;
      for (int i = 0; i <= kSearch; ++i) {
        const double y = -1.0 + 2.0 * i / kSearch;
        double prod = 1.0;
        for (double z : leja_) prod *= std::abs(y - z);
        if (prod > best_val || (prod == best_val && std::abs(y) < std::abs(best_y))) {
          best_val = prod;
          best_y = y;
        }
      }
      leja_.push_back(best_y);
    }
  }
  return leja_;
}

const std::vector<Node1D>& NodeFamily::nodes(int level) const {
  if (level < 1) throw std::invalid_argument("node level < 1");
  std::scoped_lock lock(mutex_);
  auto it = node_cache_.find(level);
  if (it != node_cache_.end()) return it->second;

  std::vector<Node1D> out;
  const int n = count(level);
  if (kind_ == Kind::clenshaw_curtis) {
    // ascending: y_j = -cos(pi j/(n-1)); the identity is the fraction j/(n-1),
    // constant across levels by the doubling rule and stored exactly as a
    // scaled integer so that key order equals coordinate order.
    constexpr std::int64_t kScale = 1LL << 40;
    if (n == 1) {
      out.push_back({kScale / 2, 0.0});  // fraction 1/2
    } else {
      for (int j = 0; j < n; ++j) {
        const std::int64_t key = j * (kScale / (n - 1));
        double v = -std::cos(M_PI * static_cast<double>(j) / static_cast<double>(n - 1));
        if (2 * j == n - 1) v = 0.0;
        if (j == 0) v = -1.0;
        if (j == n - 1) v = 1.0;
        out.push_back({key, v});
      }
    }
  } else {
    const auto& seq = leja_sequence(n);
    for (int j = 0; j < n; ++j) out.push_back({j, seq[j]});
    std::sort(out.begin(), out.end(),
              [](const Node1D& l, const Node1D& r) { return l.value < r.value; });
  }
  return node_cache_.emplace(level, std::move(out)).first->second;
}

std::vector<double> NodeFamily::basis_values(int level, double y) const {
  const auto& nd = nodes(level);
  const int n = static_cast<int>(nd.size());
  std::vector<double> out(n, 1.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j) out[j] *= (y - nd[i].value) / (nd[j].value - nd[i].value);
  return out;
}

double NodeFamily::mean1(int level, int j) const {
  {
    std::scoped_lock lock(mutex_);
    auto it = mean_cache_.find({level, j});
    if (it != mean_cache_.end()) return it->second;
  }
  const int n = count(level);
  const GaussRule& gr = gauss_legendre(n + 1);  // exactness >= degree n-1
  double s = 0.0;
  for (std::size_t g = 0; g < gr.x.size(); ++g)
    s += gr.w[g] * basis_values(level, gr.x[g])[j];
  s *= 0.5;
  std::scoped_lock lock(mutex_);
  return mean_cache_.emplace(std::make_tuple(level, j), s).first->second;
}

double NodeFamily::gram1(int la, int ja, int lb, int jb, bool weight_y) const {
  if (std::tie(la, ja) > std::tie(lb, jb)) {
    std::swap(la, lb);
    std::swap(ja, jb);
  }
  {
    std::scoped_lock lock(mutex_);
    auto it = gram_cache_.find({la, ja, lb, jb, weight_y});
    if (it != gram_cache_.end()) return it->second;
  }
  const int deg = (count(la) - 1) + (count(lb) - 1) + (weight_y ? 1 : 0);
  const int ng = deg / 2 + 2;
  const GaussRule& gr = gauss_legendre(ng);
  double s = 0.0;
  for (std::size_t g = 0; g < gr.x.size(); ++g) {
    const double fa = basis_values(la, gr.x[g])[ja];
    const double fb = basis_values(lb, gr.x[g])[jb];
    s += gr.w[g] * fa * fb * (weight_y ? gr.x[g] : 1.0);
  }
  s *= 0.5;
  std::scoped_lock lock(mutex_);
  return gram_cache_.emplace(std::make_tuple(la, ja, lb, jb, weight_y), s).first->second;
}

CollocationGrid::CollocationGrid(MultiIndexSet iset, std::shared_ptr<const NodeFamily> family)
    : iset_(std::move(iset)), family_(std::move(family)) {
  const int M = iset_.dimension();

  // Combination coefficients c_nu = sum over e in {0,1}^M with nu+e in I of (-1)^|e|.
  for (const MultiIndex& nu : iset_.indices()) {
    int coeff = 0;
    MultiIndex probe = nu;
    for (int mask = 0; mask < (1 << M); ++mask) {
      for (int m = 0; m < M; ++m) probe[m] = nu[m] + ((mask >> m) & 1);
      if (iset_.contains(probe)) coeff += (__builtin_popcount(mask) % 2 == 0) ? 1 : -1;
    }
    if (coeff == 0) continue;
    CombTerm t;
    t.nu = nu;
    t.coeff = coeff;
    t.levels = nu;
    t.sizes.resize(M);
    for (int m = 0; m < M; ++m) t.sizes[m] = family_->count(nu[m]);
    terms_.push_back(std::move(t));
  }

  // Enumerate tensor points of every term; identity is the per-dimension key
  // tuple, never floating-point coordinates.
  std::map<PointKey, std::vector<double>> all;
  for (CombTerm& t : terms_) {
    int total = 1;
    for (int s : t.sizes) total *= s;
    for (int rank = 0; rank < total; ++rank) {
      PointKey key(M);
      std::vector<double> coords(M);
      int r = rank;
      for (int m = M - 1; m >= 0; --m) {
        const int pos = r % t.sizes[m];
        r /= t.sizes[m];
        const Node1D& nd = family_->nodes(t.levels[m])[pos];
        key[m] = nd.key;
        coords[m] = nd.value;
      }
      all.emplace(std::move(key), std::move(coords));
    }
  }
  points_.reserve(all.size());
  coord_keys_.assign(M, {});
  for (auto& [key, coords] : all) {
    index_.emplace(key, static_cast<int>(points_.size()));
    for (int m = 0; m < M; ++m) coord_keys_[m].emplace(coords[m], key[m]);
    points_.push_back({key, coords});
  }

  // Resolve per-term point ids and per-point memberships.
  memberships_.resize(points_.size());
  for (int ti = 0; ti < static_cast<int>(terms_.size()); ++ti) {
    CombTerm& t = terms_[ti];
    int total = 1;
    for (int s : t.sizes) total *= s;
    t.point_ids.resize(total);
    for (int rank = 0; rank < total; ++rank) {
      PointKey key(M);
      int r = rank;
      for (int m = M - 1; m >= 0; --m) {
        const int pos = r % t.sizes[m];
        r /= t.sizes[m];
        key[m] = family_->nodes(t.levels[m])[pos].key;
      }
      const int pid = index_.at(key);
      t.point_ids[rank] = pid;
      memberships_[pid].push_back({ti, rank});
    }
  }

  // Basis means via the combination expansion.
  means_.assign(points_.size(), 0.0);
  for (int p = 0; p < size(); ++p) {
    double s = 0.0;
    for (const Membership& mb : memberships_[p]) {
      const CombTerm& t = terms_[mb.term];
      const auto pos = rank_to_positions(t, mb.rank);
      double prod = t.coeff;
      for (int m = 0; m < M; ++m) prod *= family_->mean1(t.levels[m], pos[m]);
      s += prod;
    }
    means_[p] = s;
  }
}

std::vector<int> CollocationGrid::rank_to_positions(const CombTerm& t, int rank) const {
  const int M = dimension();
  std::vector<int> pos(M);
  for (int m = M - 1; m >= 0; --m) {
    pos[m] = rank % t.sizes[m];
    rank /= t.sizes[m];
  }
  return pos;
}

int CollocationGrid::find(const PointKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

std::vector<double> CollocationGrid::basis_at(const std::vector<double>& y) const {
  if (static_cast<int>(y.size()) != dimension())
    throw std::invalid_argument("basis_at: dimension mismatch");
  const int M = dimension();
  std::vector<double> out(points_.size(), 0.0);
  // Exact delta property: evaluation at a grid point returns the unit vector
  // rather than relying on cross-level cancellation in floating point.
  {
    PointKey key(M);
    bool on_grid = true;
    for (int m = 0; m < M && on_grid; ++m) {
      auto it = coord_keys_[m].find(y[m]);
      if (it == coord_keys_[m].end())
        on_grid = false;
      else
        key[m] = it->second;
    }
    if (on_grid) {
      const int p = find(key);
      if (p >= 0) {
        out[p] = 1.0;
        return out;
      }
    }
  }
  for (const CombTerm& t : terms_) {
    std::vector<std::vector<double>> b1(M);
    for (int m = 0; m < M; ++m) b1[m] = family_->basis_values(t.levels[m], y[m]);
    const int total = static_cast<int>(t.point_ids.size());
    for (int rank = 0; rank < total; ++rank) {
      double prod = t.coeff;
      int r = rank;
      for (int m = M - 1; m >= 0; --m) {
        prod *= b1[m][r % t.sizes[m]];
        r /= t.sizes[m];
      }
      out[t.point_ids[rank]] += prod;
    }
  }
  return out;
}

double CollocationGrid::weighted_gram(int m, int p, int q) const {
  if (m < 1 || m > dimension()) throw std::invalid_argument("weighted_gram: bad direction");
  return gram_impl(m, p, q);
}

double CollocationGrid::gram_impl(int weight_m, int p, int q) const {
  if (p < 0 || p >= size() || q < 0 || q >= size())
    throw std::invalid_argument("gram: point not in grid");
  if (p > q) std::swap(p, q);
  {
    std::scoped_lock lock(gram_mutex_);
    auto it = gram_cache_.find({weight_m, p, q});
    if (it != gram_cache_.end()) return it->second;
  }
  const int M = dimension();
  double s = 0.0;
  for (const Membership& ma : memberships_[p]) {
    const CombTerm& ta = terms_[ma.term];
    const auto pa = rank_to_positions(ta, ma.rank);
    for (const Membership& mb : memberships_[q]) {
      const CombTerm& tb = terms_[mb.term];
      const auto pb = rank_to_positions(tb, mb.rank);
      double prod = static_cast<double>(ta.coeff) * tb.coeff;
      for (int m = 0; m < M; ++m)
        prod *= family_->gram1(ta.levels[m], pa[m], tb.levels[m], pb[m], weight_m == m + 1);
      s += prod;
    }
  }
  std::scoped_lock lock(gram_mutex_);
  return gram_cache_.emplace(std::make_tuple(weight_m, p, q), s).first->second;
}

double CollocationGrid::l2norm(int p) const { return std::sqrt(gram(p, p)); }

std::vector<GridPoint> new_points(const CollocationGrid& base, const MultiIndex& nu) {
  const auto rm = reduced_margin(base.index_set());
  if (std::find(rm.begin(), rm.end(), nu) == rm.end())
    throw std::invalid_argument("new_points: index not in the reduced margin");
  const int M = base.dimension();
  const NodeFamily& fam = base.family();
  std::vector<int> sizes(M);
  int total = 1;
  for (int m = 0; m < M; ++m) {
    sizes[m] = fam.count(nu[m]);
    total *= sizes[m];
  }
  std::map<PointKey, std::vector<double>> fresh;
  for (int rank = 0; rank < total; ++rank) {
    PointKey key(M);
    std::vector<double> coords(M);
    int r = rank;
    for (int m = M - 1; m >= 0; --m) {
      const Node1D& nd = fam.nodes(nu[m])[r % sizes[m]];
      key[m] = nd.key;
      coords[m] = nd.value;
      r /= sizes[m];
    }
    if (base.find(key) < 0) fresh.emplace(std::move(key), std::move(coords));
  }
  std::vector<GridPoint> out;
  out.reserve(fresh.size());
  for (auto& [k, c] : fresh) out.push_back({k, c});
  return out;
}

double interpolate(const CollocationGrid& grid, const std::map<PointKey, double>& values,
                   const std::vector<double>& y) {
  const std::vector<double> L = grid.basis_at(y);
  double s = 0.0;
  for (int p = 0; p < grid.size(); ++p) {
    auto it = values.find(grid.point(p).key);
    if (it == values.end()) throw std::invalid_argument("interpolate: missing point value");
    s += L[p] * it->second;
  }
  return s;
}

}  // namespace scgoal
