#pragma once

// Named analytic data fields: initial velocities, volume sources, and an
// exact transient slip-flow solution with its matching source term, used by
// studies and regression tests.  All fields live on the unit square unless
// noted; registry names resolve config selectors.

#include <cmath>
#include <numbers>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shvi/mesh.hpp"

namespace shvi {

using SpaceTimeField = std::function<Vec2(double, double, double)>;  // (x, y, t)
using SpaceTimeScalar = std::function<double(double, double, double)>;

/// Freeze a space-time field at one instant, in the spatial-callback shape the
/// assembly routines take.
inline std::function<std::array<double, 2>(double, double)> at_time(const SpaceTimeField& f,
                                                                    double t) {
  return [f, t](double x, double y) {
    Vec2 v = f(x, y, t);
    return std::array<double, 2>{v.x, v.y};
  };
}

namespace field_detail {

// 1D factors of the stream-function velocity on the unit square:
//   X(x) = x^2 (1-x)^2,   h(y) = 3y^2 - 5y^3 + 2y^4 = y^2 (1-y)(3-2y).
// u = (X h', -X' h) is divergence-free, vanishes on x=0, x=1, y=0, and on
// y=1 has u_y = 0 (h(1)=0) with zero tangential traction (h''(1)=0).
inline double sx(double x) { return x * x * (1.0 - x) * (1.0 - x); }
inline double dsx(double x) { return 2.0 * x - 6.0 * x * x + 4.0 * x * x * x; }
inline double d2sx(double x) { return 2.0 - 12.0 * x + 12.0 * x * x; }
inline double d3sx(double x) { return -12.0 + 24.0 * x; }
inline double hy(double y) { return (3.0 - 5.0 * y + 2.0 * y * y) * y * y; }
inline double dhy(double y) { return 6.0 * y - 15.0 * y * y + 8.0 * y * y * y; }
inline double d2hy(double y) { return 6.0 - 30.0 * y + 24.0 * y * y; }
inline double d3hy(double y) { return -30.0 + 48.0 * y; }

}  // namespace field_detail

/// The stationary stream-function velocity (X h', -X' h).
inline Vec2 stream_velocity(double x, double y) {
  return {field_detail::sx(x) * field_detail::dhy(y),
          -field_detail::dsx(x) * field_detail::hy(y)};
}

/// An exact transient solution and its matching data.
struct FlowSolution {
  double mu = 0.0;
  double lambda = 0.0;  // temporal decay rate
  SpaceTimeField velocity;
  SpaceTimeScalar pressure;  // zero-mean on the unit square
  SpaceTimeField source;     // f = du/dt - mu lap(u) + grad p
};

/// Exact decaying flow on the unit square with Dirichlet left/right/bottom
/// and frictionless slip on top:
///   u = e^{-lambda t} (X h', -X' h),   p = e^{-lambda t} cos(pi x) cos(pi y).
/// Since u is divergence-free, 2 div eps(u) = lap(u) and the momentum source
/// is f = -lambda u - mu lap(u) + grad p (all carrying the decay factor).
inline FlowSolution decaying_flow(double mu, double lambda) {
  if (!(mu > 0.0)) throw std::invalid_argument("decaying_flow: mu must be positive");
  FlowSolution sol;
  sol.mu = mu;
  sol.lambda = lambda;
  sol.velocity = [lambda](double x, double y, double t) {
    return std::exp(-lambda * t) * stream_velocity(x, y);
  };
  sol.pressure = [lambda](double x, double y, double t) {
    return std::exp(-lambda * t) * std::cos(std::numbers::pi * x) * std::cos(std::numbers::pi * y);
  };
  sol.source = [mu, lambda](double x, double y, double t) {
    using namespace field_detail;
    double lap_ux = d2sx(x) * dhy(y) + sx(x) * d3hy(y);
    double lap_uy = -(d3sx(x) * hy(y) + dsx(x) * d2hy(y));
    Vec2 u = stream_velocity(x, y);
    Vec2 grad_p{-std::numbers::pi * std::sin(std::numbers::pi * x) * std::cos(std::numbers::pi * y),
                -std::numbers::pi * std::cos(std::numbers::pi * x) * std::sin(std::numbers::pi * y)};
    Vec2 f{-lambda * u.x - mu * lap_ux + grad_p.x,
           -lambda * u.y - mu * lap_uy + grad_p.y};
    return std::exp(-lambda * t) * f;
  };
  return sol;
}

/// Registry of named analytic fields for config selectors and studies.
/// Names and parameter lists:
///   zero                          -> (0, 0)
///   constant ax ay                -> (ax, ay)
///   rotating amp                  -> amp * (0.5 - y, x - 0.5)
///   indicator x_split ax ay       -> (ax, ay) where x > x_split, else 0
///   stream amp                    -> amp * (X h', -X' h)  (divergence-free)
///   poly_time ax ay degree        -> (ax, ay) * t^degree, integer degree 0..3
///   decaying_velocity lambda      -> e^{-lambda t} (X h', -X' h)
///   decaying_source mu lambda     -> matching momentum source of decaying_flow
inline SpaceTimeField make_field(const std::string& name, const std::vector<double>& params) {
  auto want = [&](std::size_t n) {
    if (params.size() != n)
      throw std::invalid_argument("field '" + name + "' expects " + std::to_string(n) +
                                  " parameter(s), got " + std::to_string(params.size()));
  };
  if (name == "zero") {
    want(0);
    return [](double, double, double) { return Vec2{0.0, 0.0}; };
  }
  if (name == "constant") {
    want(2);
    double ax = params[0], ay = params[1];
    return [ax, ay](double, double, double) { return Vec2{ax, ay}; };
  }
  if (name == "rotating") {
    want(1);
    double amp = params[0];
    return [amp](double x, double y, double) { return amp * Vec2{0.5 - y, x - 0.5}; };
  }
  if (name == "indicator") {
    want(3);
    double xs = params[0], ax = params[1], ay = params[2];
    return [xs, ax, ay](double x, double, double) {
      return x > xs ? Vec2{ax, ay} : Vec2{0.0, 0.0};
    };
  }
  if (name == "stream") {
    want(1);
    double amp = params[0];
    return [amp](double x, double y, double) { return amp * stream_velocity(x, y); };
  }
  if (name == "poly_time") {
    want(3);
    double ax = params[0], ay = params[1];
    int deg = int(params[2]);
    if (double(deg) != params[2] || deg < 0 || deg > 3)
      throw std::invalid_argument("field 'poly_time': degree must be an integer in 0..3");
    return [ax, ay, deg](double, double, double t) {
      double s = 1.0;
      for (int i = 0; i < deg; ++i) s *= t;
      return Vec2{ax * s, ay * s};
    };
  }
  if (name == "decaying_velocity") {
    want(1);
    double lambda = params[0];
    return [lambda](double x, double y, double t) {
      return std::exp(-lambda * t) * stream_velocity(x, y);
    };
  }
  if (name == "decaying_source") {
    want(2);
    return decaying_flow(params[0], params[1]).source;
  }
  throw std::invalid_argument(
      "unknown field '" + name +
      "'; known: zero, constant, rotating, indicator, stream, poly_time, "
      "decaying_velocity, decaying_source");
}

}  // namespace shvi
