#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "oracle.hpp"
#include "shvi/dense.hpp"
#include "shvi/fespace.hpp"
#include "shvi/mesh.hpp"

using shvi::BoundarySpec;
using shvi::BoundaryTag;
using shvi::DiscreteSystem;
using shvi::DofClass;
using shvi::DofMap;
using shvi::Mesh;
using shvi::Vector;

namespace {

BoundarySpec top_slip() {
  BoundarySpec s;
  s.left = s.right = s.bottom = BoundaryTag::dirichlet;
  s.top = BoundaryTag::slip;
  return s;
}

BoundarySpec left_dirichlet_rest_slip() {
  BoundarySpec s;
  s.left = BoundaryTag::dirichlet;
  s.right = s.bottom = s.top = BoundaryTag::slip;
  return s;
}

}  // namespace

TEST(Spaces, SmallestMeshExhaustiveClassification) {
  Mesh mesh = shvi::build_rect_mesh(1, 1, 1.0, 1.0, left_dirichlet_rest_slip());
  DofMap dm = shvi::build_spaces(mesh);
  // Row-major vertices 0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1); edge-midpoint
  // nodes follow in sorted-edge order: (0,1)->4 at (0.5,0), (0,2)->5 at
  // (0,0.5), (0,3)->6 at (0.5,0.5), (1,3)->7 at (1,0.5), (2,3)->8 at (0.5,1).
  ASSERT_EQ(dm.n_nodes, 9);
  EXPECT_NEAR(dm.node_coords[4].x, 0.5, 1e-15);
  EXPECT_NEAR(dm.node_coords[4].y, 0.0, 1e-15);
  EXPECT_NEAR(dm.node_coords[5].x, 0.0, 1e-15);
  EXPECT_NEAR(dm.node_coords[5].y, 0.5, 1e-15);
  EXPECT_NEAR(dm.node_coords[6].x, 0.5, 1e-15);
  EXPECT_NEAR(dm.node_coords[6].y, 0.5, 1e-15);

  auto cls = [&](int node, int comp) { return dm.dof_class[std::size_t(2 * node + comp)]; };
  // Left side (x=0) is Dirichlet: vertices 0, 2 and midpoint 5 fully fixed.
  for (int n : {0, 2, 5}) {
    EXPECT_EQ(cls(n, 0), DofClass::dirichlet_fixed);
    EXPECT_EQ(cls(n, 1), DofClass::dirichlet_fixed);
  }
  // Slip-slip corners (1,0) and (1,1): both components normal-fixed.
  for (int n : {1, 3}) {
    EXPECT_EQ(cls(n, 0), DofClass::slip_normal_fixed);
    EXPECT_EQ(cls(n, 1), DofClass::slip_normal_fixed);
  }
  // Bottom midpoint 4: normal (0,-1) fixes the y-component only.
  EXPECT_EQ(cls(4, 0), DofClass::free_dof);
  EXPECT_EQ(cls(4, 1), DofClass::slip_normal_fixed);
  // Right midpoint 7: normal (1,0) fixes the x-component only.
  EXPECT_EQ(cls(7, 0), DofClass::slip_normal_fixed);
  EXPECT_EQ(cls(7, 1), DofClass::free_dof);
  // Top midpoint 8: y fixed, x free.  Diagonal midpoint 6 is interior: free.
  EXPECT_EQ(cls(8, 0), DofClass::free_dof);
  EXPECT_EQ(cls(8, 1), DofClass::slip_normal_fixed);
  EXPECT_EQ(cls(6, 0), DofClass::free_dof);
  EXPECT_EQ(cls(6, 1), DofClass::free_dof);

  EXPECT_EQ(dm.free_dofs, (std::vector<int>{8, 12, 13, 15, 16}));
  ASSERT_EQ(dm.n_slip(), 3);
  // Ascending node order with tangent = normal rotated (nx,ny)->(ny,-nx).
  EXPECT_EQ(dm.slip_nodes[0].node, 4);
  EXPECT_NEAR(dm.slip_nodes[0].tangent.x, -1.0, 1e-15);
  EXPECT_NEAR(dm.slip_nodes[0].tangent.y, 0.0, 1e-15);
  EXPECT_EQ(dm.slip_nodes[1].node, 7);
  EXPECT_NEAR(dm.slip_nodes[1].tangent.y, -1.0, 1e-15);
  EXPECT_EQ(dm.slip_nodes[2].node, 8);
  EXPECT_NEAR(dm.slip_nodes[2].tangent.x, 1.0, 1e-15);
  // Lumped boundary mass of an edge midpoint: two thirds of the edge length.
  for (const auto& sn : dm.slip_nodes) EXPECT_NEAR(sn.weight, 2.0 / 3.0, 1e-14);
  // Interior free positions: both components of node 5.
  EXPECT_EQ(dm.interior_free, (std::vector<int>{1, 2}));
}

TEST(Spaces, FreeDofCountMatchesIndependentEnumeration) {
  Mesh mesh = shvi::build_rect_mesh(2, 2, 1.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  ASSERT_EQ(dm.n_nodes, 25);  // 9 vertices + 16 edges

  // Independent classification straight from node coordinates.
  std::set<int> expected_free;
  for (int n = 0; n < dm.n_nodes; ++n) {
    double x = dm.node_coords[std::size_t(n)].x;
    double y = dm.node_coords[std::size_t(n)].y;
    bool dir = (x < 1e-12) || (x > 1.0 - 1e-12) || (y < 1e-12);
    bool top = y > 1.0 - 1e-12;
    if (dir) continue;  // both components fixed (Dirichlet wins corners)
    expected_free.insert(2 * n);             // x always free off Dirichlet
    if (!top) expected_free.insert(2 * n + 1);  // y fixed on the slip side
  }
  std::set<int> got(dm.free_dofs.begin(), dm.free_dofs.end());
  EXPECT_EQ(got, expected_free);

  // Slip side y=1 carries 5 nodes; the two corners are Dirichlet.
  ASSERT_EQ(dm.n_slip(), 3);
  std::vector<double> xs, ws;
  for (const auto& sn : dm.slip_nodes) {
    xs.push_back(dm.node_coords[std::size_t(sn.node)].x);
    ws.push_back(sn.weight);
    EXPECT_NEAR(dm.node_coords[std::size_t(sn.node)].y, 1.0, 1e-15);
  }
  std::sort(xs.begin(), xs.end());
  EXPECT_NEAR(xs[0], 0.25, 1e-15);
  EXPECT_NEAR(xs[1], 0.50, 1e-15);
  EXPECT_NEAR(xs[2], 0.75, 1e-15);
  // Midpoint weight 2L/3 = 1/3; shared vertex weight L/6 + L/6 = 1/6.
  double total = 0.0;
  for (double w : ws) {
    EXPECT_GT(w, 0.0);
    total += w;
  }
  EXPECT_NEAR(total, 1.0 / 3.0 + 1.0 / 3.0 + 1.0 / 6.0, 1e-14);
}

TEST(Assembly, RigidMotionsSpanViscousKernel) {
  Mesh mesh = shvi::build_rect_mesh(3, 2, 1.5, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  auto fs = shvi::fe_detail::assemble_full(mesh, dm);
  double scale = fs.k_v.max_abs();

  auto energy = [&](const std::function<std::array<double, 2>(double, double)>& f) {
    Vector v = shvi::interpolate_velocity(dm, f);
    return fs.k_v.quad(v);
  };
  // Translations and the in-plane rotation have zero symmetric gradient.
  EXPECT_NEAR(energy([](double, double) { return std::array<double, 2>{1.0, 0.0}; }), 0.0,
              1e-12 * scale);
  EXPECT_NEAR(energy([](double, double) { return std::array<double, 2>{0.0, 1.0}; }), 0.0,
              1e-12 * scale);
  EXPECT_NEAR(energy([](double x, double y) { return std::array<double, 2>{-y, x}; }), 0.0,
              1e-12 * scale);
  // Non-rigid fields: exact energies (quadrature exact for polynomials).
  double area = 1.5;
  EXPECT_NEAR(energy([](double x, double) { return std::array<double, 2>{x, 0.0}; }), area,
              1e-12 * area);
  EXPECT_NEAR(energy([](double, double y) { return std::array<double, 2>{y, 0.0}; }),
              0.5 * area, 1e-12 * area);
}

TEST(Assembly, ReducedViscousFormPositiveDefinite) {
  // Discrete Korn: with a Dirichlet part of positive length the reduced
  // symmetric-gradient form is positive definite.
  Mesh mesh = shvi::build_rect_mesh(2, 2, 1.0, 1.0, left_dirichlet_rest_slip());
  DofMap dm = shvi::build_spaces(mesh);
  DiscreteSystem sys = shvi::assemble(mesh, dm, 1.0);
  shvi::DenseMatrix kd = shvi::to_dense(sys.k_v);
  Vector evals;
  shvi::DenseMatrix evecs;
  shvi::sym_eig(kd, evals, evecs);
  ASSERT_FALSE(evals.empty());
  EXPECT_GT(evals.front(), 1e-6);
}

TEST(Assembly, MassDivergenceAndMeanPatchTests) {
  Mesh mesh = shvi::build_rect_mesh(3, 3, 1.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  auto fs = shvi::fe_detail::assemble_full(mesh, dm);
  DiscreteSystem sys = shvi::assemble(mesh, dm, 1.0);

  Vector ones_u(std::size_t(dm.n_full()), 1.0);
  EXPECT_NEAR(fs.m.quad(ones_u), 2.0, 1e-12);  // both components integrate area

  Vector ones_p(std::size_t(dm.n_pressure()), 1.0);
  Vector vx = shvi::interpolate_velocity(
      dm, [](double x, double) { return std::array<double, 2>{x, 0.0}; });
  EXPECT_NEAR(fs.b.bilin(ones_p, vx), 1.0, 1e-13);  // integral of div (x,0) = area

  // Pointwise divergence-free linear field: every row of B annihilates it.
  Vector vdf = shvi::interpolate_velocity(
      dm, [](double x, double y) { return std::array<double, 2>{x, -y}; });
  Vector bv = fs.b * vdf;
  EXPECT_LE(shvi::nrm_inf(bv), 1e-13);

  EXPECT_NEAR(shvi::dot(sys.mean_p, ones_p), 1.0, 1e-12);  // integral of 1 = area
  // mean_p is exactly the row sums of the pressure mass matrix.
  Vector rs = sys.m_q * ones_p;
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_NEAR(sys.mean_p[i], rs[i], 1e-16);
}

TEST(Assembly, SymmetryAndScalingInvariants) {
  Mesh mesh = shvi::build_rect_mesh(3, 2, 2.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  double mu = 0.37;
  DiscreteSystem sys = shvi::assemble(mesh, dm, mu);

  EXPECT_LE(sys.k_a.plus(sys.k_a.transposed(), -1.0).max_abs(), 1e-12 * sys.k_a.max_abs());
  EXPECT_LE(sys.m.plus(sys.m.transposed(), -1.0).max_abs(), 1e-12 * sys.m.max_abs());
  // K_a is exactly the scaled K_V.
  EXPECT_EQ(sys.k_a.plus(sys.k_v.scaled(2.0 * mu), -1.0).max_abs(), 0.0);
  for (double w : sys.m_gamma) EXPECT_GT(w, 0.0);
  // Viscous energy identity a(v,v) = 2 mu ||v||_V^2 on a random vector.
  shvi::Rng rng(7);
  Vector v = rng.vec(std::size_t(sys.n_free()));
  EXPECT_NEAR(sys.k_a.quad(v), 2.0 * mu * sys.k_v.quad(v), 1e-12 * std::abs(sys.k_a.quad(v)));
}

TEST(Assembly, DivergenceFormSymbolicValues) {
  // On the unit square with v = (x^2, 0) and q = x:
  //   b(v,q) = integral x * 2x = 2/3; with q = 1: integral 2x = 1.
  Mesh mesh = shvi::build_rect_mesh(3, 3, 1.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  auto fs = shvi::fe_detail::assemble_full(mesh, dm);
  Vector v = shvi::interpolate_velocity(
      dm, [](double x, double) { return std::array<double, 2>{x * x, 0.0}; });
  Vector qlin = shvi::interpolate_pressure(mesh, [](double x, double) { return x; });
  Vector qone(std::size_t(dm.n_pressure()), 1.0);
  EXPECT_NEAR(fs.b.bilin(qlin, v), 2.0 / 3.0, 1e-13);
  EXPECT_NEAR(fs.b.bilin(qone, v), 1.0, 1e-13);
}

TEST(Quadrature, TriangleRuleExactThroughDegreeFour) {
  const auto& rule = shvi::fe_detail::tri_rule();
  double wsum = 0.0;
  for (const auto& qp : rule) wsum += qp.w;
  EXPECT_NEAR(wsum, 1.0, 1e-15);
  for (int p = 0; p <= 4; ++p) {
    for (int q = 0; p + q <= 4; ++q) {
      double val = 0.0;
      for (const auto& qp : rule) val += qp.w * std::pow(qp.l1, p) * std::pow(qp.l2, q);
      val *= 0.5;  // reference-triangle area
      EXPECT_NEAR(val, oracle::tri_monomial_exact(p, q), 1e-15)
          << "monomial xi^" << p << " eta^" << q;
    }
  }
  // Negative control: the rule is degree four, so degree-five monomials err.
  for (auto [p, q] : {std::pair{5, 0}, std::pair{4, 1}}) {
    double val = 0.0;
    for (const auto& qp : rule) val += qp.w * std::pow(qp.l1, p) * std::pow(qp.l2, q);
    EXPECT_GT(std::abs(0.5 * val - oracle::tri_monomial_exact(p, q)), 1e-5);
  }
}

TEST(Quadrature, EdgeRuleExactThroughDegreeFive) {
  const auto& rule = shvi::fe_detail::edge_rule();
  for (int p = 0; p <= 5; ++p) {
    double val = 0.0;
    for (const auto& gp : rule) val += gp.w * std::pow(gp.s, p);
    EXPECT_NEAR(val, 1.0 / double(p + 1), 1e-15);
  }
  double v6 = 0.0;
  for (const auto& gp : rule) v6 += gp.w * std::pow(gp.s, 6);
  EXPECT_GT(std::abs(v6 - 1.0 / 7.0), 1e-5);
}

TEST(Trace, TangentialTraceEvaluations) {
  Mesh mesh = shvi::build_rect_mesh(2, 2, 1.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  DiscreteSystem sys = shvi::assemble(mesh, dm, 1.0);

  Vector zero(std::size_t(sys.n_free()), 0.0);
  EXPECT_LE(shvi::nrm_inf(shvi::tangential_trace(sys, zero)), 0.0);

  // Support only at interior nodes: trace vanishes.
  Vector vint(std::size_t(sys.n_free()), 0.0);
  for (int pos : dm.interior_free) vint[std::size_t(pos)] = 1.0;
  EXPECT_LE(shvi::nrm_inf(shvi::tangential_trace(sys, vint)), 0.0);

  // Linear shear (y, 0): on the top side the tangential trace equals the
  // x-component, here identically one.
  Vector shear_full = shvi::interpolate_velocity(
      dm, [](double, double y) { return std::array<double, 2>{y, 0.0}; });
  Vector tr = shvi::tangential_trace(sys, dm.reduce(shear_full));
  ASSERT_EQ(int(tr.size()), sys.n_slip());
  for (double s : tr) EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Continuity, DivergenceCouplingBoundedBySqrtTwo) {
  // sup |integral q div v| / (||q||_Q ||v||_V) is the square root of the
  // largest eigenvalue of (B K_V^-1 B^T) q = theta M_Q q; pointwise
  // |div v| <= sqrt(2)|eps(v)| caps it at sqrt(2), and it is h-stable.
  double prev = 0.0;
  for (int n : {4, 8}) {
    Mesh mesh = shvi::build_rect_mesh(n, n, 1.0, 1.0, top_slip());
    DofMap dm = shvi::build_spaces(mesh);
    DiscreteSystem sys = shvi::assemble(mesh, dm, 1.0);
    Eigen::MatrixXd kd = oracle::to_eigen(shvi::to_dense(sys.k_v));
    Eigen::MatrixXd bd = oracle::to_eigen(shvi::to_dense(sys.b));
    Eigen::MatrixXd mq = oracle::to_eigen(shvi::to_dense(sys.m_q));
    Eigen::MatrixXd schur = bd * kd.ldlt().solve(bd.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(schur, mq);
    double cb = std::sqrt(ges.eigenvalues().maxCoeff());

    // Random pairs only ever produce lower bounds on the sup.
    shvi::Rng rng(11);
    double cb_lower = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Vector v = rng.vec(std::size_t(sys.n_free()));
      Vector q = rng.vec(std::size_t(sys.n_pressure()));
      double mean = shvi::dot(sys.mean_p, q) / sys.area;
      for (double& qi : q) qi -= mean;
      double num = std::abs(sys.b.bilin(q, v));
      double den = std::sqrt(sys.k_v.quad(v)) * std::sqrt(sys.m_q.quad(q));
      cb_lower = std::max(cb_lower, num / den);
    }
    EXPECT_LE(cb_lower, cb * (1.0 + 1e-12));

    EXPECT_GT(cb, 0.5);
    EXPECT_LE(cb, std::sqrt(2.0) * (1.0 + 1e-10));
    if (prev > 0.0) EXPECT_LT(std::abs(cb - prev), 0.25);
    prev = cb;
  }
}

TEST(Errors, InterpolationAndQuadratureErrorMeasures) {
  auto quadratic = [](double x, double y) {
    return std::array<double, 2>{x * x + y, x * y};
  };
  Mesh mesh = shvi::build_rect_mesh(3, 3, 1.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  Vector vi = shvi::interpolate_velocity(dm, quadratic);
  EXPECT_LE(shvi::velocity_l2_error(mesh, dm, vi, quadratic), 1e-14);

  Vector pl = shvi::interpolate_pressure(mesh, [](double x, double y) { return 2.0 * x - y; });
  EXPECT_LE(shvi::pressure_l2_error(mesh, pl,
                                    [](double x, double y) { return 2.0 * x - y; }),
            1e-14);

  // Cubic field: quadratic interpolation error decays like h^3.
  auto cubic = [](double x, double) { return std::array<double, 2>{x * x * x, 0.0}; };
  double errs[2];
  int idx = 0;
  for (int n : {2, 4}) {
    Mesh m2 = shvi::build_rect_mesh(n, n, 1.0, 1.0, top_slip());
    DofMap d2 = shvi::build_spaces(m2);
    errs[idx++] = shvi::velocity_l2_error(m2, d2, shvi::interpolate_velocity(d2, cubic), cubic);
  }
  EXPECT_GT(errs[0], 0.0);
  EXPECT_LT(errs[1] / errs[0], 0.25);
}

TEST(Load, LoadVectorIntegratesForcesExactly) {
  Mesh mesh = shvi::build_rect_mesh(3, 3, 1.0, 1.0, top_slip());
  DofMap dm = shvi::build_spaces(mesh);
  Vector load = shvi::assemble_load(mesh, dm, [](double x, double y) {
    return std::array<double, 2>{y, x * x};
  });
  // Pair against representable fields: w . load = integral f . w.
  Vector w1 = shvi::interpolate_velocity(
      dm, [](double, double) { return std::array<double, 2>{1.0, 1.0}; });
  EXPECT_NEAR(shvi::dot(w1, load), 0.5 + 1.0 / 3.0, 1e-13);
  Vector w2 = shvi::interpolate_velocity(
      dm, [](double x, double) { return std::array<double, 2>{x, 0.0}; });
  EXPECT_NEAR(shvi::dot(w2, load), 0.25, 1e-13);  // integral of x*y over the square
}
