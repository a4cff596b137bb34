#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "scgoal/geometry.hpp"

namespace scgoal {

/// Triangle with vertex indices ordered so that (v[1], v[2]) is the
/// refinement edge (the newest vertex is v[0]).
struct Triangle {
  std::array<int, 3> v;
  int generation = 0;
};

struct Edge {
  int a, b;                       // a < b
  std::array<int, 2> tris;        // adjacent triangles, second is -1 on the boundary
  bool boundary() const { return tris[1] < 0; }
};

/// Conforming 2D triangulation, immutable after construction. Refinement
/// produces a new mesh.
class Mesh {
 public:
  Mesh(std::vector<Vec2> vertices, std::vector<std::uint8_t> boundary,
       std::vector<Triangle> triangles);

  static Mesh load(const std::string& path);
  static Mesh read(std::istream& in);
  void save(const std::string& path) const;
  void write(std::ostream& out) const;

  std::uint64_t id() const { return id_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(tris_.size()); }
  int interior_count() const { return interior_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const Vec2& vertex(int i) const { return vertices_[i]; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Triangle& triangle(int t) const { return tris_[t]; }
  const std::vector<Triangle>& triangles() const { return tris_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool on_boundary(int v) const { return boundary_[v] != 0; }

  /// Interior numbering: -1 for boundary vertices.
  int interior_index(int v) const { return interior_index_[v]; }
  const std::vector<int>& interior_vertices() const { return interior_vertices_; }

  int edge_lookup(int a, int b) const;  // -1 if absent
  double triangle_area(int t) const;
  Vec2 centroid(int t) const;
  std::array<Vec2, 3> triangle_points(int t) const;

  double min_angle() const;

 private:
  void build_topology();

  std::uint64_t id_;
  std::vector<Vec2> vertices_;
  std::vector<std::uint8_t> boundary_;
  std::vector<Triangle> tris_;
  std::vector<Edge> edges_;
  std::unordered_map<std::uint64_t, int> edge_index_;
  std::vector<int> interior_index_;
  std::vector<int> interior_vertices_;
  int interior_count_ = 0;
};

/// One entry per interior edge: the prospective new vertex of a refinement.
struct DetailNode {
  Vec2 midpoint;
  std::array<int, 2> edge;   // vertex pair, a < b
  std::array<int, 2> tris;   // the two adjacent triangles
};

struct DetailNodeSet {
  std::vector<DetailNode> nodes;  // sorted by edge pair
};

/// Subset of detail nodes selected for refinement, identified by parent edge.
struct MarkedNodeSet {
  std::vector<std::array<int, 2>> edges;  // each a < b
};

struct RefineResult {
  std::shared_ptr<const Mesh> mesh;
  // Parent edge of each new vertex: vertex (old_count + i) is the midpoint of
  // midpoint_parents[i] in the old mesh.
  std::vector<std::array<int, 2>> midpoint_parents;
};

DetailNodeSet detail_nodes(const Mesh& mesh);
RefineResult uniform_refine(const Mesh& mesh);
RefineResult nvb_refine(const Mesh& mesh, const MarkedNodeSet& marked);

MarkedNodeSet make_marked(const DetailNodeSet& details, const std::vector<int>& indices);
MarkedNodeSet mark_all(const DetailNodeSet& details);

bool is_conforming(const Mesh& mesh);

}  // namespace scgoal
