#include "kymo/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kymo/gauss_legendre.hpp"

namespace kymo {

namespace {

// Quadratic B-spline basis on knots {0,0,0,1/2,1,1,1}, two spans.
// Span u in [0,1/2): bases over P0,P1,P2; span [1/2,1]: over P1,P2,P3.
void splineBasis(double u, int& first, double b[3]) {
  if (u < 0.5) {
    first = 0;
    b[0] = (1.0 - 2.0 * u) * (1.0 - 2.0 * u);
    b[1] = 2.0 * u * (2.0 - 3.0 * u);
    b[2] = 2.0 * u * u;
  } else {
    first = 1;
    const double v = 1.0 - u;
    b[0] = 2.0 * v * v;
    b[1] = 2.0 * v * (3.0 * u - 1.0);
    b[2] = (2.0 * u - 1.0) * (2.0 * u - 1.0);
  }
}

void splineBasisDerivative(double u, int& first, double db[3]) {
  if (u < 0.5) {
    first = 0;
    db[0] = -4.0 * (1.0 - 2.0 * u);
    db[1] = 4.0 - 12.0 * u;
    db[2] = 4.0 * u;
  } else {
    first = 1;
    db[0] = -4.0 * (1.0 - u);
    db[1] = 8.0 - 12.0 * u;
    db[2] = 4.0 * (2.0 * u - 1.0);
  }
}

}  // namespace

Curve Curve::line(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                  double length_um, int frame_index) {
  if (std::abs(direction.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("Curve::line: direction must be a unit vector");
  if (!(length_um > 0.0))
    throw std::invalid_argument("Curve::line: length must be > 0");
  Curve c;
  c.kind_ = CurveKind::Line;
  c.points_[0] = origin;
  c.points_[1] = direction;
  c.length_ = length_um;
  c.frame_index_ = frame_index;
  return c;
}

Curve Curve::quadraticSpline(const std::array<Eigen::Vector3d, 4>& control_points,
                             int frame_index) {
  Curve c;
  c.kind_ = CurveKind::QuadraticSpline;
  c.points_ = control_points;
  c.frame_index_ = frame_index;
  // Arc length of C(u) over [0,1]; 64 panels keep the knot at u=1/2 on a
  // panel boundary so the integrand stays smooth per panel.
  const QuadratureRule rule = gaussLegendre(8);
  const int panels = 64;
  double len = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / panels;
    const double b = static_cast<double>(p + 1) / panels;
    auto [x, w] = mapRule(rule, a, b);
    for (std::size_t i = 0; i < x.size(); ++i)
      len += w[i] * c.splineDerivative(x[i]).norm();
  }
  if (!(len > 0.0))
    throw std::invalid_argument("Curve::quadraticSpline: degenerate control points");
  c.length_ = len;
  return c;
}

double Curve::checkedParam(double l) const {
  const double slack = 1e-9 * std::max(1.0, length_);
  if (l < -slack || l > length_ + slack)
    throw std::domain_error("Curve: parameter " + std::to_string(l) +
                            " outside [0, " + std::to_string(length_) + "]");
  return std::min(std::max(l, 0.0), length_);
}

Eigen::Vector3d Curve::splinePoint(double u) const {
  int first;
  double b[3];
  splineBasis(u, first, b);
  return b[0] * points_[first] + b[1] * points_[first + 1] + b[2] * points_[first + 2];
}

Eigen::Vector3d Curve::splineDerivative(double u) const {
  int first;
  double db[3];
  splineBasisDerivative(u, first, db);
  return db[0] * points_[first] + db[1] * points_[first + 1] + db[2] * points_[first + 2];
}

Eigen::Vector3d Curve::embed(double l) const {
  l = checkedParam(l);
  if (kind_ == CurveKind::Line) return points_[0] + points_[1] * l;
  return splinePoint(l / length_);
}

double Curve::metric(double l) const {
  l = checkedParam(l);
  if (kind_ == CurveKind::Line) return 1.0;
  return splineDerivative(l / length_).norm() / length_;
}

int binCount(double length_um, double bin_size_um) {
  if (!(bin_size_um > 0.0))
    throw std::invalid_argument("binCount: bin size must be > 0");
  const int n = static_cast<int>(std::ceil(length_um / bin_size_um - 1e-9));
  return std::max(n, 1);
}

VirtualSources buildVirtualSources(const Curve& curve, double bin_size_um,
                                   int quad_points_per_bin) {
  if (!(bin_size_um > 0.0))
    throw std::invalid_argument("buildVirtualSources: bin size must be > 0");
  if (quad_points_per_bin < 1)
    throw std::invalid_argument("buildVirtualSources: need at least one quadrature point");

  const double length = curve.paramLength();
  const int n_bins = binCount(length, bin_size_um);
  const QuadratureRule rule = gaussLegendre(quad_points_per_bin);

  VirtualSources vs;
  vs.n_bins = n_bins;
  vs.positions.reserve(static_cast<std::size_t>(n_bins) * quad_points_per_bin);
  vs.weights.reserve(vs.positions.capacity());
  vs.points.reserve(vs.positions.capacity());
  vs.bin_index.reserve(vs.positions.capacity());

  for (int p = 0; p < n_bins; ++p) {
    const double a = p * bin_size_um;
    const double b = std::min((p + 1) * bin_size_um, length);  // last bin may be short
    auto [x, w] = mapRule(rule, a, b);
    for (std::size_t i = 0; i < x.size(); ++i) {
      vs.positions.push_back(x[i]);
      vs.weights.push_back(curve.metric(x[i]) * w[i]);
      vs.points.push_back(curve.embed(x[i]));
      vs.bin_index.push_back(p);
    }
  }
  return vs;
}

}  // namespace kymo
