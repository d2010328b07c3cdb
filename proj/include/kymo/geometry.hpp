#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace kymo {

enum class CurveKind { Line, QuadraticSpline };

// Per-frame curvilinear geometry: the parameter space [0, Lambda] (um), the
// embedding map gamma into physical space, and the Riemannian metric
// m(l) = |d gamma / d l|_2.
//
// Lines are arc-length parameterised (m = 1). Splines are clamped uniform
// quadratic B-splines over four control points on the natural parameter
// u in [0,1]; l = Lambda * u where Lambda is the numerically integrated
// arc length, so the metric is |dC/du| / Lambda and integrates to Lambda.
class Curve {
 public:
  static Curve line(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                    double length_um, int frame_index = 0);
  static Curve quadraticSpline(const std::array<Eigen::Vector3d, 4>& control_points,
                               int frame_index = 0);

  CurveKind kind() const { return kind_; }
  double paramLength() const { return length_; }
  int frameIndex() const { return frame_index_; }

  Eigen::Vector3d embed(double l) const;
  double metric(double l) const;

  const Eigen::Vector3d& origin() const { return points_[0]; }
  const Eigen::Vector3d& direction() const { return points_[1]; }
  const std::array<Eigen::Vector3d, 4>& controlPoints() const { return points_; }

 private:
  Curve() = default;

  Eigen::Vector3d splinePoint(double u) const;
  Eigen::Vector3d splineDerivative(double u) const;  // dC/du
  double checkedParam(double l) const;

  CurveKind kind_ = CurveKind::Line;
  std::array<Eigen::Vector3d, 4> points_{};  // line: [origin, direction, -, -]
  double length_ = 0.0;                      // Lambda (um)
  int frame_index_ = 0;
};

// Quadrature nodes on the curve used to approximate the PSF convolution
// integral. One bin per reconstruction basis function; weight is
// metric(l_v) times the affinely rescaled Gauss-Legendre weight, so the
// per-bin weight sum approximates the bin's metric measure.
struct VirtualSources {
  std::vector<double> positions;        // l_v in [0, Lambda]
  std::vector<double> weights;          // m(l_v) * q_v, all > 0
  std::vector<Eigen::Vector3d> points;  // gamma(l_v)
  std::vector<int> bin_index;
  int n_bins = 0;
};

VirtualSources buildVirtualSources(const Curve& curve, double bin_size_um,
                                   int quad_points_per_bin);

// ceil(length / bin) robust to length being a near-exact multiple of bin.
int binCount(double length_um, double bin_size_um);

}  // namespace kymo
