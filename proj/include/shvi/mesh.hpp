#pragma once

// Structured conforming triangulations of axis-aligned rectangles with
// boundary tagging (no-slip Dirichlet sides vs. friction slip sides) and
// uniform red refinement.  Meshes are immutable after construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shvi/core.hpp"

namespace shvi {

enum class BoundaryTag { dirichlet, slip };

inline const char* to_string(BoundaryTag t) {
  return t == BoundaryTag::dirichlet ? "dirichlet" : "slip";
}

/// Per-side tagging of a rectangle boundary.  The homogeneous Dirichlet part
/// and the slip part must both be nonempty: the Dirichlet part gives the
/// Korn/Poincaré coercivity of the viscous form, the slip part carries the
/// frictional boundary condition.
struct BoundarySpec {
  BoundaryTag left = BoundaryTag::dirichlet;
  BoundaryTag right = BoundaryTag::dirichlet;
  BoundaryTag bottom = BoundaryTag::dirichlet;
  BoundaryTag top = BoundaryTag::slip;

  void validate() const {
    const BoundaryTag sides[4] = {left, right, bottom, top};
    bool has_d = false, has_s = false;
    for (BoundaryTag t : sides) {
      if (t == BoundaryTag::dirichlet) has_d = true;
      if (t == BoundaryTag::slip) has_s = true;
    }
    if (!has_d)
      throw std::invalid_argument("BoundarySpec: at least one side must be dirichlet");
    if (!has_s)
      throw std::invalid_argument("BoundarySpec: at least one side must be slip");
  }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, const Vec2& a) { return {s * a.x, s * a.y}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
/// z-component of the cross product; twice the signed area of (0, a, b).
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

/// One boundary edge, oriented counterclockwise around the domain (domain on
/// the left when walking a -> b), with its outward unit normal and the index
/// of the unique triangle that owns it.
struct BoundaryEdge {
  int a = -1;
  int b = -1;
  BoundaryTag tag = BoundaryTag::dirichlet;
  Vec2 normal;
  int tri = -1;
};

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise vertex triples
  std::vector<BoundaryEdge> boundary_edges;

  int n_vertices() const { return int(vertices.size()); }
  int n_triangles() const { return int(triangles.size()); }
  int n_boundary_edges() const { return int(boundary_edges.size()); }

  double signed_area(int t) const {
    const auto& tri = triangles[std::size_t(t)];
    const Vec2& p0 = vertices[std::size_t(tri[0])];
    const Vec2& p1 = vertices[std::size_t(tri[1])];
    const Vec2& p2 = vertices[std::size_t(tri[2])];
    return 0.5 * cross(p1 - p0, p2 - p0);
  }

  double total_area() const {
    double s = 0.0;
    for (int t = 0; t < n_triangles(); ++t) s += signed_area(t);
    return s;
  }

  double edge_length(const BoundaryEdge& e) const {
    return norm(vertices[std::size_t(e.b)] - vertices[std::size_t(e.a)]);
  }

  double boundary_length(BoundaryTag tag) const {
    double s = 0.0;
    for (const auto& e : boundary_edges)
      if (e.tag == tag) s += edge_length(e);
    return s;
  }

  /// Longest triangle edge over the mesh (the usual mesh-size parameter).
  double mesh_size() const {
    double h = 0.0;
    for (const auto& tri : triangles) {
      for (int k = 0; k < 3; ++k) {
        const Vec2& p = vertices[std::size_t(tri[std::size_t(k)])];
        const Vec2& q = vertices[std::size_t(tri[std::size_t((k + 1) % 3)])];
        h = std::max(h, norm(q - p));
      }
    }
    return h;
  }

  /// Check structural invariants; throws std::runtime_error on violation.
  void validate() const;
};

namespace mesh_detail {

/// Directed-edge map: (a,b) -> owning triangle.  In a CCW conforming mesh an
/// interior undirected edge appears once per direction; a boundary edge
/// appears in exactly one direction.
inline std::map<std::pair<int, int>, int> directed_edges(const Mesh& m) {
  std::map<std::pair<int, int>, int> owner;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& tri = m.triangles[std::size_t(t)];
    for (int k = 0; k < 3; ++k) {
      int a = tri[std::size_t(k)];
      int b = tri[std::size_t((k + 1) % 3)];
      auto ins = owner.emplace(std::make_pair(a, b), t);
      if (!ins.second) throw std::runtime_error("Mesh: duplicated directed edge");
    }
  }
  return owner;
}

}  // namespace mesh_detail

inline void Mesh::validate() const {
  for (int t = 0; t < n_triangles(); ++t) {
    if (!(signed_area(t) > 0.0))
      throw std::runtime_error("Mesh: triangle " + std::to_string(t) +
                               " has non-positive area");
  }
  auto owner = mesh_detail::directed_edges(*this);
  // Every directed edge with no opposite partner must be listed exactly once
  // as a boundary edge, and vice versa.
  std::map<std::pair<int, int>, int> listed;
  for (const auto& e : boundary_edges) ++listed[{e.a, e.b}];
  for (const auto& [key, t] : owner) {
    bool interior = owner.count({key.second, key.first}) > 0;
    auto it = listed.find(key);
    if (interior && it != listed.end())
      throw std::runtime_error("Mesh: interior edge listed as boundary");
    if (!interior && (it == listed.end() || it->second != 1))
      throw std::runtime_error("Mesh: boundary edge missing or duplicated");
    (void)t;
  }
  if (listed.size() != boundary_edges.size())
    throw std::runtime_error("Mesh: duplicate boundary edge entries");
  double dir_len = 0.0;
  for (const auto& e : boundary_edges) {
    auto it = owner.find({e.a, e.b});
    if (it == owner.end())
      throw std::runtime_error("Mesh: boundary edge not a CCW triangle edge");
    if (e.tri != it->second)
      throw std::runtime_error("Mesh: boundary edge owner index wrong");
    Vec2 tvec = vertices[std::size_t(e.b)] - vertices[std::size_t(e.a)];
    double len = norm(tvec);
    if (!(len > 0.0)) throw std::runtime_error("Mesh: degenerate boundary edge");
    if (std::abs(norm(e.normal) - 1.0) > 1e-12)
      throw std::runtime_error("Mesh: boundary normal not unit");
    if (std::abs(dot(e.normal, tvec)) > 1e-12 * len)
      throw std::runtime_error("Mesh: boundary normal not perpendicular to edge");
    // Outward: must point away from the owning triangle's interior.
    const auto& tri = triangles[std::size_t(e.tri)];
    Vec2 centroid = (1.0 / 3.0) * (vertices[std::size_t(tri[0])] +
                                   vertices[std::size_t(tri[1])] +
                                   vertices[std::size_t(tri[2])]);
    Vec2 mid = 0.5 * (vertices[std::size_t(e.a)] + vertices[std::size_t(e.b)]);
    if (!(dot(e.normal, centroid - mid) < 0.0))
      throw std::runtime_error("Mesh: boundary normal points inward");
    if (e.tag == BoundaryTag::slip) {
      bool axis = (std::abs(std::abs(e.normal.x) - 1.0) < 1e-12 &&
                   std::abs(e.normal.y) < 1e-12) ||
                  (std::abs(std::abs(e.normal.y) - 1.0) < 1e-12 &&
                   std::abs(e.normal.x) < 1e-12);
      if (!axis) throw std::runtime_error("Mesh: slip normal not axis-aligned");
    }
    if (e.tag == BoundaryTag::dirichlet) dir_len += len;
  }
  if (!(dir_len > 0.0))
    throw std::runtime_error("Mesh: Dirichlet boundary part has zero length");
}

/// Build a structured triangulation of [0,Lx] x [0,Ly] with nx-by-ny cells,
/// each split along its lower-left -> upper-right diagonal.  Vertex (i,j)
/// gets index j*(nx+1)+i.  Boundary edges are oriented counterclockwise.
inline Mesh build_rect_mesh(int nx, int ny, double Lx, double Ly, const BoundarySpec& spec) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_rect_mesh: nx, ny must be >= 1");
  if (!(Lx > 0.0) || !(Ly > 0.0))
    throw std::invalid_argument("build_rect_mesh: Lx, Ly must be positive");
  spec.validate();

  Mesh m;
  m.vertices.reserve(std::size_t((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({Lx * double(i) / double(nx), Ly * double(j) / double(ny)});

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  m.triangles.reserve(std::size_t(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }

  auto cell = [nx](int i, int j) { return 2 * (j * nx + i); };  // lower triangle id

  // CCW traversal: bottom (+x), right (+y), top (-x), left (-y).
  for (int i = 0; i < nx; ++i)
    m.boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), spec.bottom, {0.0, -1.0}, cell(i, 0)});
  for (int j = 0; j < ny; ++j)
    m.boundary_edges.push_back(
        {vid(nx, j), vid(nx, j + 1), spec.right, {1.0, 0.0}, cell(nx - 1, j)});
  for (int i = nx; i > 0; --i)
    m.boundary_edges.push_back(
        {vid(i, ny), vid(i - 1, ny), spec.top, {0.0, 1.0}, cell(i - 1, ny - 1) + 1});
  for (int j = ny; j > 0; --j)
    m.boundary_edges.push_back({vid(0, j), vid(0, j - 1), spec.left, {-1.0, 0.0}, cell(0, j - 1) + 1});

  m.validate();
  return m;
}

/// Uniform red refinement: every triangle is split into four congruent
/// children through its edge midpoints; boundary tags and normals are
/// inherited by the two half edges.
inline Mesh refine_uniform(const Mesh& parent) {
  Mesh m;
  m.vertices = parent.vertices;
  std::map<std::pair<int, int>, int> midpoint;  // undirected edge -> new vertex
  auto mid_id = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int id = int(m.vertices.size());
    m.vertices.push_back(0.5 * (parent.vertices[std::size_t(a)] + parent.vertices[std::size_t(b)]));
    midpoint.emplace(key, id);
    return id;
  };

  m.triangles.reserve(std::size_t(4 * parent.n_triangles()));
  for (const auto& tri : parent.triangles) {
    int v0 = tri[0], v1 = tri[1], v2 = tri[2];
    int m01 = mid_id(v0, v1), m12 = mid_id(v1, v2), m20 = mid_id(v2, v0);
    m.triangles.push_back({v0, m01, m20});
    m.triangles.push_back({v1, m12, m01});
    m.triangles.push_back({v2, m20, m12});
    m.triangles.push_back({m01, m12, m20});
  }

  auto owner = mesh_detail::directed_edges(m);
  m.boundary_edges.reserve(std::size_t(2 * parent.n_boundary_edges()));
  for (const auto& e : parent.boundary_edges) {
    int mm = mid_id(e.a, e.b);  // already created above; lookup only
    for (auto [a, b] : {std::make_pair(e.a, mm), std::make_pair(mm, e.b)}) {
      auto it = owner.find({a, b});
      if (it == owner.end()) throw std::runtime_error("refine_uniform: lost boundary edge");
      m.boundary_edges.push_back({a, b, e.tag, e.normal, it->second});
    }
  }

  m.validate();
  return m;
}

/// Write the mesh as a legacy ASCII VTK unstructured grid.  Triangles are
/// followed by the boundary edges as line cells; the cell-data field
/// "boundary_tag" is -1 on triangles, 0 on Dirichlet edges, 1 on slip edges.
inline void write_vtk(const Mesh& m, std::ostream& os, const std::string& title = "mesh") {
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.n_vertices() << " double\n";
  for (const auto& v : m.vertices)
    os << fmt_g17(v.x) << " " << fmt_g17(v.y) << " 0\n";
  int nc = m.n_triangles() + m.n_boundary_edges();
  os << "CELLS " << nc << " " << (4 * m.n_triangles() + 3 * m.n_boundary_edges()) << "\n";
  for (const auto& tri : m.triangles) os << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  for (const auto& e : m.boundary_edges) os << "2 " << e.a << " " << e.b << "\n";
  os << "CELL_TYPES " << nc << "\n";
  for (int t = 0; t < m.n_triangles(); ++t) os << "5\n";
  for (int e = 0; e < m.n_boundary_edges(); ++e) os << "3\n";
  os << "CELL_DATA " << nc << "\nSCALARS boundary_tag int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < m.n_triangles(); ++t) os << "-1\n";
  for (const auto& e : m.boundary_edges) os << (e.tag == BoundaryTag::slip ? 1 : 0) << "\n";
}

}  // namespace shvi
