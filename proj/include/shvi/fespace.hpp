#pragma once

// Taylor–Hood finite-element spaces on triangulated rectangles: quadratic
// velocity / linear pressure, with assembly of the viscous form, the
// divergence coupling, velocity and pressure mass matrices, and the scalar
// tangential trace onto the slip boundary.  Homogeneous constraints
// (Dirichlet sides, zero normal component on slip sides) are applied by
// row/column elimination; the reduced matrices act on the free DOFs only.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shvi/core.hpp"
#include "shvi/mesh.hpp"
#include "shvi/sparse.hpp"

namespace shvi {

enum class DofClass { free_dof, dirichlet_fixed, slip_normal_fixed };

/// One slip-boundary node whose tangential velocity component is a free DOF.
/// `weight` is the positive lumped boundary-mass entry (row sum of the
/// quadratic boundary mass over the adjacent slip edges).  The tangent is the
/// outward normal rotated a quarter turn, so that on the top side of a
/// rectangle the tangential trace equals the x-component of the velocity.
struct SlipNode {
  int node = -1;
  Vec2 normal;
  Vec2 tangent;
  double weight = 0.0;
};

struct DofMap {
  int n_vertices = 0;
  int n_nodes = 0;  // quadratic nodes: vertices + edge midpoints
  std::vector<Vec2> node_coords;
  std::vector<std::array<int, 6>> tri_nodes;  // (v0,v1,v2,m01,m12,m20)
  std::vector<DofClass> dof_class;            // per velocity DOF, size 2*n_nodes
  std::vector<int> free_dofs;                 // ascending full DOF ids
  std::vector<int> full_to_free;              // -1 where fixed
  std::vector<SlipNode> slip_nodes;           // ascending node id
  std::vector<char> node_on_boundary;
  std::vector<int> interior_free;  // reduced positions whose node is interior

  int n_full() const { return 2 * n_nodes; }
  int n_free() const { return int(free_dofs.size()); }
  int n_pressure() const { return n_vertices; }
  int n_slip() const { return int(slip_nodes.size()); }

  Vector reduce(const Vector& full) const {
    if (int(full.size()) != n_full()) throw std::invalid_argument("reduce: size mismatch");
    Vector r(free_dofs.size(), 0.0);
    for (std::size_t i = 0; i < free_dofs.size(); ++i) r[i] = full[std::size_t(free_dofs[i])];
    return r;
  }

  Vector expand(const Vector& reduced) const {
    if (int(reduced.size()) != n_free())
      throw std::invalid_argument("expand: size mismatch");
    Vector f(std::size_t(n_full()), 0.0);
    for (std::size_t i = 0; i < free_dofs.size(); ++i) f[std::size_t(free_dofs[i])] = reduced[i];
    return f;
  }
};

namespace fe_detail {

/// Degree-4 six-point triangle rule; weights sum to one, points barycentric.
struct TriPoint {
  double w, l0, l1, l2;
};

inline const std::array<TriPoint, 6>& tri_rule() {
  static const std::array<TriPoint, 6> rule = [] {
    const double w1 = 0.22338158967801146570, a1 = 0.44594849091596488632;
    const double w2 = 0.10995174365532186764, a2 = 0.09157621350977074346;
    std::array<TriPoint, 6> r{};
    int k = 0;
    for (auto [w, a] : {std::pair{w1, a1}, std::pair{w2, a2}}) {
      double b = 1.0 - 2.0 * a;
      r[std::size_t(k++)] = {w, b, a, a};
      r[std::size_t(k++)] = {w, a, b, a};
      r[std::size_t(k++)] = {w, a, a, b};
    }
    return r;
  }();
  return rule;
}

/// Three-point Gauss rule on [0,1]; weights sum to one.
struct EdgePoint {
  double w, s;
};

inline const std::array<EdgePoint, 3>& edge_rule() {
  static const std::array<EdgePoint, 3> rule = [] {
    const double g = std::sqrt(3.0 / 5.0);
    return std::array<EdgePoint, 3>{
        EdgePoint{5.0 / 18.0, 0.5 * (1.0 - g)},
        EdgePoint{8.0 / 18.0, 0.5},
        EdgePoint{5.0 / 18.0, 0.5 * (1.0 + g)},
    };
  }();
  return rule;
}

/// Quadratic scalar basis on a triangle at barycentric (l0,l1,l2):
/// corner functions first, then edge functions opposite the usual order
/// (m01, m12, m20), matching DofMap::tri_nodes.
inline void p2_values(double l0, double l1, double l2, double val[6]) {
  val[0] = l0 * (2.0 * l0 - 1.0);
  val[1] = l1 * (2.0 * l1 - 1.0);
  val[2] = l2 * (2.0 * l2 - 1.0);
  val[3] = 4.0 * l0 * l1;
  val[4] = 4.0 * l1 * l2;
  val[5] = 4.0 * l2 * l0;
}

/// Gradients of the quadratic basis given the (constant) barycentric
/// gradients g0,g1,g2 of the triangle.
inline void p2_gradients(double l0, double l1, double l2, const Vec2 g[3], Vec2 grad[6]) {
  grad[0] = (4.0 * l0 - 1.0) * g[0];
  grad[1] = (4.0 * l1 - 1.0) * g[1];
  grad[2] = (4.0 * l2 - 1.0) * g[2];
  grad[3] = 4.0 * (l1 * g[0] + l0 * g[1]);
  grad[4] = 4.0 * (l2 * g[1] + l1 * g[2]);
  grad[5] = 4.0 * (l0 * g[2] + l2 * g[0]);
}

struct TriGeometry {
  double area = 0.0;
  Vec2 bary_grad[3];  // gradients of the barycentric coordinates
  Vec2 corner[3];
};

inline TriGeometry tri_geometry(const Mesh& mesh, int t) {
  TriGeometry g;
  const auto& tri = mesh.triangles[std::size_t(t)];
  for (int k = 0; k < 3; ++k) g.corner[k] = mesh.vertices[std::size_t(tri[std::size_t(k)])];
  g.area = mesh.signed_area(t);
  double inv2a = 1.0 / (2.0 * g.area);
  for (int k = 0; k < 3; ++k) {
    const Vec2& pn = g.corner[(k + 1) % 3];
    const Vec2& pp = g.corner[(k + 2) % 3];
    g.bary_grad[k] = {(pn.y - pp.y) * inv2a, (pp.x - pn.x) * inv2a};
  }
  return g;
}

/// Unreduced matrices on the full DOF sets (all velocity DOFs, all vertex
/// pressures), before any constraint elimination.  Used by the reduction in
/// assemble() and directly by diagnostics.
struct FullSystem {
  SparseMatrix k_v;  // symmetric-gradient stiffness: v^T K_V v = ||v||_V^2
  SparseMatrix m;    // velocity mass
  SparseMatrix b;    // divergence coupling: q^T B v = integral of q div v
  SparseMatrix m_q;  // pressure mass
};

inline FullSystem assemble_full(const Mesh& mesh, const DofMap& dm) {
  FullSystem fs;
  int nu = dm.n_full();
  int np = dm.n_pressure();
  fs.k_v = SparseMatrix(nu, nu);
  fs.m = SparseMatrix(nu, nu);
  fs.b = SparseMatrix(np, nu);
  fs.m_q = SparseMatrix(np, np);

  for (int t = 0; t < mesh.n_triangles(); ++t) {
    TriGeometry tg = tri_geometry(mesh, t);
    const auto& nodes = dm.tri_nodes[std::size_t(t)];
    const auto& verts = mesh.triangles[std::size_t(t)];
    double ke[12][12] = {};
    double me[12][12] = {};
    double be[3][12] = {};
    double mqe[3][3] = {};
    for (const auto& qp : tri_rule()) {
      double wj = qp.w * tg.area;
      double lam[3] = {qp.l0, qp.l1, qp.l2};
      double val[6];
      Vec2 grad[6];
      p2_values(qp.l0, qp.l1, qp.l2, val);
      p2_gradients(qp.l0, qp.l1, qp.l2, tg.bary_grad, grad);
      for (int a = 0; a < 6; ++a) {
        for (int bfn = 0; bfn < 6; ++bfn) {
          double gg = dot(grad[a], grad[bfn]);
          double ga[2] = {grad[a].x, grad[a].y};
          double gb[2] = {grad[bfn].x, grad[bfn].y};
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
              double eps2 = 0.5 * ((i == j ? gg : 0.0) + ga[j] * gb[i]);
              ke[2 * a + i][2 * bfn + j] += wj * eps2;
              if (i == j) me[2 * a + i][2 * bfn + j] += wj * val[a] * val[bfn];
            }
          }
        }
        // q^T B v = integral q * div v, q linear (barycentric basis).
        for (int q = 0; q < 3; ++q) {
          be[q][2 * a + 0] += wj * lam[q] * grad[a].x;
          be[q][2 * a + 1] += wj * lam[q] * grad[a].y;
        }
      }
      for (int q = 0; q < 3; ++q)
        for (int r = 0; r < 3; ++r) mqe[q][r] += wj * lam[q] * lam[r];
    }
    for (int a = 0; a < 6; ++a) {
      for (int i = 0; i < 2; ++i) {
        int ga = 2 * nodes[std::size_t(a)] + i;
        for (int bfn = 0; bfn < 6; ++bfn) {
          for (int j = 0; j < 2; ++j) {
            int gb = 2 * nodes[std::size_t(bfn)] + j;
            fs.k_v.add(ga, gb, ke[2 * a + i][2 * bfn + j]);
            double mv = me[2 * a + i][2 * bfn + j];
            if (mv != 0.0) fs.m.add(ga, gb, mv);
          }
        }
        for (int q = 0; q < 3; ++q) fs.b.add(verts[std::size_t(q)], ga, be[q][2 * a + i]);
      }
    }
    for (int q = 0; q < 3; ++q)
      for (int r = 0; r < 3; ++r) fs.m_q.add(verts[std::size_t(q)], verts[std::size_t(r)], mqe[q][r]);
  }
  fs.k_v.finalize();
  fs.m.finalize();
  fs.b.finalize();
  fs.m_q.finalize();
  return fs;
}

}  // namespace fe_detail

/// Build the Taylor–Hood DOF structure: quadratic node enumeration (mesh
/// vertices, then edge midpoints in sorted-edge order), per-DOF constraint
/// classification, and the slip-boundary tangential DOF list with lumped
/// boundary-mass weights.  Dirichlet constraints win at corners shared with a
/// slip side; corners between two slip sides have both components fixed.
inline DofMap build_spaces(const Mesh& mesh) {
  DofMap dm;
  dm.n_vertices = mesh.n_vertices();
  dm.node_coords = mesh.vertices;

  std::map<std::pair<int, int>, int> edge_id;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      edge_id.emplace(std::minmax(tri[std::size_t(k)], tri[std::size_t((k + 1) % 3)]), -1);
  int next = dm.n_vertices;
  for (auto& [key, id] : edge_id) {
    id = next++;
    dm.node_coords.push_back(0.5 * (mesh.vertices[std::size_t(key.first)] +
                                    mesh.vertices[std::size_t(key.second)]));
  }
  dm.n_nodes = next;

  dm.tri_nodes.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    auto mid = [&](int a, int b) { return edge_id.at(std::minmax(a, b)); };
    dm.tri_nodes.push_back({tri[0], tri[1], tri[2], mid(tri[0], tri[1]), mid(tri[1], tri[2]),
                            mid(tri[2], tri[0])});
  }

  // Collect per-node boundary information.
  std::vector<char> on_dirichlet(std::size_t(dm.n_nodes), 0);
  dm.node_on_boundary.assign(std::size_t(dm.n_nodes), 0);
  std::map<int, std::vector<Vec2>> slip_normals;
  std::map<int, double> slip_weight;
  for (const auto& e : mesh.boundary_edges) {
    int mid = edge_id.at(std::minmax(e.a, e.b));
    const int enodes[3] = {e.a, e.b, mid};
    for (int n : enodes) dm.node_on_boundary[std::size_t(n)] = 1;
    if (e.tag == BoundaryTag::dirichlet) {
      for (int n : enodes) on_dirichlet[std::size_t(n)] = 1;
    } else {
      for (int n : enodes) {
        auto& lst = slip_normals[n];
        bool seen = false;
        for (const Vec2& nv : lst)
          if (nv.x == e.normal.x && nv.y == e.normal.y) seen = true;
        if (!seen) lst.push_back(e.normal);
      }
      // Lumped boundary mass: row sums of the quadratic edge mass matrix,
      // evaluated with the three-point Gauss rule (exact here).
      double len = mesh.edge_length(e);
      double wa = 0.0, wb = 0.0, wm = 0.0;
      for (const auto& gp : fe_detail::edge_rule()) {
        double s = gp.s;
        wa += gp.w * len * (1.0 - s) * (1.0 - 2.0 * s);
        wb += gp.w * len * s * (2.0 * s - 1.0);
        wm += gp.w * len * 4.0 * s * (1.0 - s);
      }
      slip_weight[e.a] += wa;
      slip_weight[e.b] += wb;
      slip_weight[mid] += wm;
    }
  }

  // Classify every velocity DOF.
  dm.dof_class.assign(std::size_t(dm.n_full()), DofClass::free_dof);
  for (int n = 0; n < dm.n_nodes; ++n) {
    if (on_dirichlet[std::size_t(n)]) {
      dm.dof_class[std::size_t(2 * n)] = DofClass::dirichlet_fixed;
      dm.dof_class[std::size_t(2 * n + 1)] = DofClass::dirichlet_fixed;
      continue;
    }
    auto it = slip_normals.find(n);
    if (it == slip_normals.end()) continue;
    for (const Vec2& nv : it->second) {
      int comp = std::abs(nv.x) > 0.5 ? 0 : 1;
      dm.dof_class[std::size_t(2 * n + comp)] = DofClass::slip_normal_fixed;
    }
  }

  for (int d = 0; d < dm.n_full(); ++d)
    if (dm.dof_class[std::size_t(d)] == DofClass::free_dof) dm.free_dofs.push_back(d);
  dm.full_to_free.assign(std::size_t(dm.n_full()), -1);
  for (std::size_t i = 0; i < dm.free_dofs.size(); ++i)
    dm.full_to_free[std::size_t(dm.free_dofs[i])] = int(i);

  // Slip tangential DOFs: nodes on the slip boundary whose tangential
  // component stayed free.  Tangent = outward normal rotated a quarter turn,
  // (nx,ny) -> (ny,-nx).
  for (const auto& [n, normals] : slip_normals) {
    if (on_dirichlet[std::size_t(n)] || normals.size() != 1) continue;
    const Vec2& nv = normals.front();
    Vec2 tv{nv.y, -nv.x};
    int comp = std::abs(tv.x) > 0.5 ? 0 : 1;
    if (dm.dof_class[std::size_t(2 * n + comp)] != DofClass::free_dof) continue;
    double w = slip_weight.at(n);
    if (!(w > 0.0)) throw std::runtime_error("build_spaces: nonpositive slip weight");
    dm.slip_nodes.push_back({n, nv, tv, w});
  }

  for (std::size_t i = 0; i < dm.free_dofs.size(); ++i)
    if (!dm.node_on_boundary[std::size_t(dm.free_dofs[i] / 2)])
      dm.interior_free.push_back(int(i));

  return dm;
}

/// Reduced discrete operators for one mesh/viscosity pair.  All matrices act
/// on the free velocity DOFs; pressure keeps every vertex DOF, with the
/// zero-mean condition expressed through the `mean_p` functional.
struct DiscreteSystem {
  double mu = 0.0;
  SparseMatrix k_v;     // v^T K_V v = ||v||_V^2 (squared symmetric-gradient norm)
  SparseMatrix k_a;     // viscous form, exactly 2*mu*K_V
  SparseMatrix m;       // velocity mass (H inner product)
  SparseMatrix b;       // q^T B v = integral q div v
  SparseMatrix t;       // tangential trace onto slip nodes (one +-1 per row)
  Vector m_gamma;       // positive lumped boundary-mass weights, per slip node
  SparseMatrix m_q;     // pressure mass (Q inner product)
  Vector mean_p;        // mean_p . q = integral of q
  double area = 0.0;
  double slip_length = 0.0;

  int n_free() const { return k_v.rows(); }
  int n_pressure() const { return b.rows(); }
  int n_slip() const { return t.rows(); }
};

inline DiscreteSystem assemble(const Mesh& mesh, const DofMap& dm, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("assemble: mu must be positive");
  fe_detail::FullSystem fs = fe_detail::assemble_full(mesh, dm);

  std::vector<int> all_p(std::size_t(dm.n_pressure()));
  for (std::size_t q = 0; q < all_p.size(); ++q) all_p[q] = int(q);

  DiscreteSystem sys;
  sys.mu = mu;
  sys.k_v = fs.k_v.submatrix(dm.free_dofs, dm.free_dofs);
  sys.k_a = sys.k_v.scaled(2.0 * mu);
  sys.m = fs.m.submatrix(dm.free_dofs, dm.free_dofs);
  sys.b = fs.b.submatrix(all_p, dm.free_dofs);
  sys.m_q = fs.m_q;

  SparseMatrix tfull(dm.n_slip(), dm.n_full());
  sys.m_gamma.clear();
  for (std::size_t i = 0; i < dm.slip_nodes.size(); ++i) {
    const SlipNode& sn = dm.slip_nodes[i];
    if (std::abs(sn.tangent.x) > 0.5) tfull.add(int(i), 2 * sn.node, sn.tangent.x);
    if (std::abs(sn.tangent.y) > 0.5) tfull.add(int(i), 2 * sn.node + 1, sn.tangent.y);
    sys.m_gamma.push_back(sn.weight);
  }
  tfull.finalize();
  std::vector<int> all_s(std::size_t(dm.n_slip()));
  for (std::size_t i = 0; i < all_s.size(); ++i) all_s[i] = int(i);
  sys.t = tfull.submatrix(all_s, dm.free_dofs);

  Vector ones(std::size_t(dm.n_pressure()), 1.0);
  sys.mean_p = sys.m_q * ones;  // row sums: integral of each basis function

  sys.area = mesh.total_area();
  sys.slip_length = mesh.boundary_length(BoundaryTag::slip);
  return sys;
}

/// Nodal tangential values on the slip boundary for a reduced velocity vector.
inline Vector tangential_trace(const DiscreteSystem& sys, const Vector& v) {
  return sys.t * v;
}

/// Pointwise nodal interpolation of a smooth velocity field onto the full
/// (unconstrained) coefficient vector.
inline Vector interpolate_velocity(const DofMap& dm,
                                   const std::function<std::array<double, 2>(double, double)>& f) {
  Vector u(std::size_t(dm.n_full()), 0.0);
  for (int n = 0; n < dm.n_nodes; ++n) {
    auto val = f(dm.node_coords[std::size_t(n)].x, dm.node_coords[std::size_t(n)].y);
    u[std::size_t(2 * n)] = val[0];
    u[std::size_t(2 * n + 1)] = val[1];
  }
  return u;
}

inline Vector interpolate_pressure(const Mesh& mesh,
                                   const std::function<double(double, double)>& f) {
  Vector p(std::size_t(mesh.n_vertices()), 0.0);
  for (int v = 0; v < mesh.n_vertices(); ++v)
    p[std::size_t(v)] = f(mesh.vertices[std::size_t(v)].x, mesh.vertices[std::size_t(v)].y);
  return p;
}

/// Right-hand-side load vector (full numbering): integral of f . phi for each
/// vector basis function, by the degree-4 triangle rule.
inline Vector assemble_load(const Mesh& mesh, const DofMap& dm,
                            const std::function<std::array<double, 2>(double, double)>& f) {
  Vector rhs(std::size_t(dm.n_full()), 0.0);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    fe_detail::TriGeometry tg = fe_detail::tri_geometry(mesh, t);
    const auto& nodes = dm.tri_nodes[std::size_t(t)];
    for (const auto& qp : fe_detail::tri_rule()) {
      double wj = qp.w * tg.area;
      double val[6];
      fe_detail::p2_values(qp.l0, qp.l1, qp.l2, val);
      Vec2 x = qp.l0 * tg.corner[0] + qp.l1 * tg.corner[1] + qp.l2 * tg.corner[2];
      auto fv = f(x.x, x.y);
      for (int a = 0; a < 6; ++a) {
        rhs[std::size_t(2 * nodes[std::size_t(a)])] += wj * val[a] * fv[0];
        rhs[std::size_t(2 * nodes[std::size_t(a)] + 1)] += wj * val[a] * fv[1];
      }
    }
  }
  return rhs;
}

/// Quadrature L2 distance between a discrete velocity (full coefficients)
/// and a smooth field.
inline double velocity_l2_error(const Mesh& mesh, const DofMap& dm, const Vector& full,
                                const std::function<std::array<double, 2>(double, double)>& exact) {
  double err2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    fe_detail::TriGeometry tg = fe_detail::tri_geometry(mesh, t);
    const auto& nodes = dm.tri_nodes[std::size_t(t)];
    for (const auto& qp : fe_detail::tri_rule()) {
      double wj = qp.w * tg.area;
      double val[6];
      fe_detail::p2_values(qp.l0, qp.l1, qp.l2, val);
      Vec2 x = qp.l0 * tg.corner[0] + qp.l1 * tg.corner[1] + qp.l2 * tg.corner[2];
      auto ex = exact(x.x, x.y);
      double uh0 = 0.0, uh1 = 0.0;
      for (int a = 0; a < 6; ++a) {
        uh0 += full[std::size_t(2 * nodes[std::size_t(a)])] * val[a];
        uh1 += full[std::size_t(2 * nodes[std::size_t(a)] + 1)] * val[a];
      }
      err2 += wj * ((uh0 - ex[0]) * (uh0 - ex[0]) + (uh1 - ex[1]) * (uh1 - ex[1]));
    }
  }
  return std::sqrt(err2);
}

/// Quadrature L2 distance between a discrete pressure (vertex coefficients)
/// and a smooth field.
inline double pressure_l2_error(const Mesh& mesh, const Vector& p,
                                const std::function<double(double, double)>& exact) {
  double err2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    fe_detail::TriGeometry tg = fe_detail::tri_geometry(mesh, t);
    const auto& verts = mesh.triangles[std::size_t(t)];
    for (const auto& qp : fe_detail::tri_rule()) {
      double wj = qp.w * tg.area;
      double lam[3] = {qp.l0, qp.l1, qp.l2};
      Vec2 x = qp.l0 * tg.corner[0] + qp.l1 * tg.corner[1] + qp.l2 * tg.corner[2];
      double ph = 0.0;
      for (int q = 0; q < 3; ++q) ph += p[std::size_t(verts[std::size_t(q)])] * lam[q];
      double d = ph - exact(x.x, x.y);
      err2 += wj * d * d;
    }
  }
  return std::sqrt(err2);
}

}  // namespace shvi
