#include "scgoal/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scgoal {

namespace {

std::atomic<std::uint64_t> next_mesh_id{1};

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::uint8_t> boundary,
           std::vector<Triangle> triangles)
    : id_(next_mesh_id.fetch_add(1)),
      vertices_(std::move(vertices)),
      boundary_(std::move(boundary)),
      tris_(std::move(triangles)) {
  if (boundary_.size() != vertices_.size())
    throw std::invalid_argument("mesh: boundary flag count mismatch");
  for (const Triangle& t : tris_) {
    for (int v : t.v)
      if (v < 0 || v >= vertex_count())
        throw std::invalid_argument("mesh: triangle vertex out of range");
    if (signed_area(vertices_[t.v[0]], vertices_[t.v[1]], vertices_[t.v[2]]) <= 0.0)
      throw std::invalid_argument("mesh: non-positive triangle area");
  }
  build_topology();
}

void Mesh::build_topology() {
  edges_.clear();
  edge_index_.clear();
  for (int t = 0; t < triangle_count(); ++t) {
    const auto& v = tris_[t].v;
    for (int e = 0; e < 3; ++e) {
      int a = v[e], b = v[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      const std::uint64_t key = edge_key(a, b);
      auto it = edge_index_.find(key);
      if (it == edge_index_.end()) {
        edge_index_.emplace(key, static_cast<int>(edges_.size()));
        edges_.push_back({a, b, {t, -1}});
      } else {
        Edge& ed = edges_[it->second];
        if (ed.tris[1] != -1)
          throw std::invalid_argument("mesh: edge shared by more than two triangles");
        ed.tris[1] = t;
      }
    }
  }
  // Boundary flags must agree with edge incidence.
  std::vector<std::uint8_t> derived(vertices_.size(), 0);
  for (const Edge& e : edges_)
    if (e.boundary()) derived[e.a] = derived[e.b] = 1;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (derived[i] != boundary_[i])
      throw std::invalid_argument("mesh: boundary flag inconsistent with topology at vertex " +
                                  std::to_string(i));
  }
  interior_index_.assign(vertices_.size(), -1);
  interior_vertices_.clear();
  interior_count_ = 0;
  for (int v = 0; v < vertex_count(); ++v) {
    if (!boundary_[v]) {
      interior_index_[v] = interior_count_++;
      interior_vertices_.push_back(v);
    }
  }
}

int Mesh::edge_lookup(int a, int b) const {
  auto it = edge_index_.find(edge_key(a, b));
  return it == edge_index_.end() ? -1 : it->second;
}

double Mesh::triangle_area(int t) const {
  const auto& v = tris_[t].v;
  return signed_area(vertices_[v[0]], vertices_[v[1]], vertices_[v[2]]);
}

Vec2 Mesh::centroid(int t) const {
  const auto& v = tris_[t].v;
  return {(vertices_[v[0]].x + vertices_[v[1]].x + vertices_[v[2]].x) / 3.0,
          (vertices_[v[0]].y + vertices_[v[1]].y + vertices_[v[2]].y) / 3.0};
}

std::array<Vec2, 3> Mesh::triangle_points(int t) const {
  const auto& v = tris_[t].v;
  return {vertices_[v[0]], vertices_[v[1]], vertices_[v[2]]};
}

double Mesh::min_angle() const {
  double best = M_PI;
  for (int t = 0; t < triangle_count(); ++t) {
    const auto p = triangle_points(t);
    for (int i = 0; i < 3; ++i) {
      const Vec2 u = p[(i + 1) % 3] - p[i];
      const Vec2 w = p[(i + 2) % 3] - p[i];
      best = std::min(best, std::acos(dot(u, w) / (norm(u) * norm(w))));
    }
  }
  return best;
}

Mesh Mesh::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("mesh: cannot open " + path);
  return read(in);
}

Mesh Mesh::read(std::istream& in) {
  std::string kw1, kw2;
  int nv = 0, nt = 0;
  in >> kw1 >> nv >> kw2 >> nt;
  if (kw1 != "vertices" || kw2 != "triangles" || !in)
    throw std::runtime_error("mesh: bad header");
  std::vector<Vec2> verts(nv);
  std::vector<std::uint8_t> bnd(nv);
  for (int i = 0; i < nv; ++i) {
    int flag;
    in >> verts[i].x >> verts[i].y >> flag;
    bnd[i] = static_cast<std::uint8_t>(flag != 0);
  }
  // Geometric dedup guard (tolerance 1e-12): reject files with duplicates.
  {
    std::vector<int> order(nv);
    for (int i = 0; i < nv; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int l, int r) { return verts[l].x < verts[r].x; });
    for (int i = 0; i < nv; ++i)
      for (int j = i + 1; j < nv && verts[order[j]].x - verts[order[i]].x < 1e-12; ++j)
        if (std::abs(verts[order[i]].y - verts[order[j]].y) < 1e-12)
          throw std::runtime_error("mesh: duplicate vertices " + std::to_string(order[i]) +
                                   "," + std::to_string(order[j]));
  }
  std::vector<Triangle> tris(nt);
  for (int i = 0; i < nt; ++i) in >> tris[i].v[0] >> tris[i].v[1] >> tris[i].v[2];
  if (!in) throw std::runtime_error("mesh: truncated file");
  return Mesh(std::move(verts), std::move(bnd), std::move(tris));
}

void Mesh::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("mesh: cannot write " + path);
  write(out);
}

void Mesh::write(std::ostream& out) const {
  char buf[128];
  out << "vertices " << vertex_count() << " triangles " << triangle_count() << "\n";
  for (int i = 0; i < vertex_count(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %d\n", vertices_[i].x, vertices_[i].y,
                  boundary_[i] ? 1 : 0);
    out << buf;
  }
  for (const Triangle& t : tris_) out << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
}

DetailNodeSet detail_nodes(const Mesh& mesh) {
  DetailNodeSet set;
  for (const Edge& e : mesh.edges()) {
    if (e.boundary()) continue;
    set.nodes.push_back({midpoint(mesh.vertex(e.a), mesh.vertex(e.b)), {e.a, e.b}, e.tris});
  }
  std::sort(set.nodes.begin(), set.nodes.end(),
            [](const DetailNode& l, const DetailNode& r) { return l.edge < r.edge; });
  return set;
}

MarkedNodeSet make_marked(const DetailNodeSet& details, const std::vector<int>& indices) {
  MarkedNodeSet m;
  for (int i : indices) m.edges.push_back(details.nodes.at(i).edge);
  std::sort(m.edges.begin(), m.edges.end());
  m.edges.erase(std::unique(m.edges.begin(), m.edges.end()), m.edges.end());
  return m;
}

MarkedNodeSet mark_all(const DetailNodeSet& details) {
  MarkedNodeSet m;
  for (const DetailNode& d : details.nodes) m.edges.push_back(d.edge);
  return m;
}

namespace {

// Bisect triangles of `mesh` according to marked edges (closure already done:
// whenever any edge of a triangle is marked, so is its refinement edge).
RefineResult rebuild(const Mesh& mesh, const std::vector<std::uint8_t>& edge_marked) {
  const int n_old = mesh.vertex_count();
  std::vector<Vec2> verts = mesh.vertices();
  std::vector<std::uint8_t> bnd(n_old);
  for (int i = 0; i < n_old; ++i) bnd[i] = mesh.on_boundary(i) ? 1 : 0;

  std::vector<std::array<int, 2>> parents;
  std::vector<int> edge_mid(mesh.edge_count(), -1);
  for (int e = 0; e < mesh.edge_count(); ++e) {
    if (!edge_marked[e]) continue;
    const Edge& ed = mesh.edges()[e];
    edge_mid[e] = static_cast<int>(verts.size());
    verts.push_back(midpoint(mesh.vertex(ed.a), mesh.vertex(ed.b)));
    bnd.push_back(ed.boundary() ? 1 : 0);
    parents.push_back({ed.a, ed.b});
  }

  std::vector<Triangle> tris;
  tris.reserve(mesh.triangle_count() * 2);
  // emit bisects (v0,v1,v2) recursively along marked edges
  auto emit = [&](auto&& self, int v0, int v1, int v2, int gen) -> void {
    const int e_ref = mesh.edge_lookup(v1, v2);
    const int mid = (e_ref >= 0) ? edge_mid[e_ref] : -1;
    if (mid < 0) {
      tris.push_back({{v0, v1, v2}, gen});
      return;
    }
    self(self, mid, v0, v1, gen + 1);
    self(self, mid, v2, v0, gen + 1);
  };
  for (const Triangle& t : mesh.triangles()) emit(emit, t.v[0], t.v[1], t.v[2], t.generation);

  RefineResult result;
  result.mesh = std::make_shared<Mesh>(std::move(verts), std::move(bnd), std::move(tris));
  result.midpoint_parents = std::move(parents);
  return result;
}

}  // namespace

RefineResult uniform_refine(const Mesh& mesh) {
  std::vector<std::uint8_t> marked(mesh.edge_count(), 1);
  return rebuild(mesh, marked);
}

RefineResult nvb_refine(const Mesh& mesh, const MarkedNodeSet& marked) {
  std::vector<std::uint8_t> edge_marked(mesh.edge_count(), 0);
  std::vector<int> queue;
  for (const auto& e : marked.edges) {
    const int idx = mesh.edge_lookup(e[0], e[1]);
    if (idx < 0 || mesh.edges()[idx].boundary())
      throw std::invalid_argument("nvb_refine: marked node is not a current detail node");
    if (!edge_marked[idx]) {
      edge_marked[idx] = 1;
      queue.push_back(idx);
    }
  }
  // Closure: a triangle with any marked edge must also have its refinement
  // edge marked. Terminates since marks only grow.
  while (!queue.empty()) {
    const int e = queue.back();
    queue.pop_back();
    for (int t : mesh.edges()[e].tris) {
      if (t < 0) continue;
      const auto& v = mesh.triangle(t).v;
      const int e_ref = mesh.edge_lookup(v[1], v[2]);
      if (!edge_marked[e_ref]) {
        edge_marked[e_ref] = 1;
        queue.push_back(e_ref);
      }
    }
  }
  return rebuild(mesh, edge_marked);
}

bool is_conforming(const Mesh& mesh) {
  // Construction already guarantees <=2 triangles per edge and consistent
  // boundary flags; check that no vertex lies in the interior of an edge
  // (hanging node scan).
  for (const Edge& e : mesh.edges()) {
    const Vec2 a = mesh.vertex(e.a), b = mesh.vertex(e.b);
    for (int t : e.tris) {
      if (t < 0) continue;
      const auto& v = mesh.triangle(t).v;
      bool has_a = false, has_b = false;
      for (int x : v) {
        has_a |= (x == e.a);
        has_b |= (x == e.b);
      }
      if (!has_a || !has_b) return false;
    }
    for (int w = 0; w < mesh.vertex_count(); ++w) {
      if (w == e.a || w == e.b) continue;
      const Vec2 p = mesh.vertex(w);
      const Vec2 d = b - a;
      const double L2 = dot(d, d);
      const double s = dot(p - a, d) / L2;
      if (s <= 1e-12 || s >= 1.0 - 1e-12) continue;
      const Vec2 foot = a + s * d;
      if (norm(p - foot) < 1e-12 * std::sqrt(L2)) return false;
    }
  }
  return true;
}

}  // namespace scgoal
