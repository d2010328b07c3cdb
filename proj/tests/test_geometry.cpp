#include <doctest.h>

#include <random>

#include "kymo/geometry.hpp"
#include "support/oracles.hpp"

using namespace kymo;

namespace {

std::array<Eigen::Vector3d, 4> collinearPoints(double spacing) {
  const Eigen::Vector3d dir = Eigen::Vector3d(1, 2, 2).normalized();
  std::array<Eigen::Vector3d, 4> pts;
  for (int i = 0; i < 4; ++i) pts[i] = Eigen::Vector3d(0.5, 0.25, 0.1) + i * spacing * dir;
  return pts;
}

std::array<Eigen::Vector3d, 4> bentPoints() {
  return {Eigen::Vector3d(0.0, 0.0, 0.0), Eigen::Vector3d(1.0, 1.5, 0.2),
          Eigen::Vector3d(2.5, 0.5, 0.6), Eigen::Vector3d(4.0, 2.0, 0.3)};
}

}  // namespace

TEST_CASE("line embedding is the affine map") {
  const Curve c = Curve::line({0, 0, 0}, {1, 0, 0}, 5.0);
  CHECK(c.embed(0.0) == Eigen::Vector3d(0, 0, 0));

  const Curve c2 = Curve::line({1, 2, 3}, {0, 1, 0}, 5.0);
  CHECK(c2.embed(2.0) == Eigen::Vector3d(1, 4, 3));
}

TEST_CASE("line is arc-length parameterised") {
  const Curve c = Curve::line({0.3, 0.7, 0.1}, Eigen::Vector3d(2, -1, 3).normalized(), 4.0);
  CHECK(c.metric(1.234) == 1.0);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK((c.embed(a) - c.embed(b)).norm() == doctest::Approx(std::abs(a - b)).epsilon(1e-12));
  }
}

TEST_CASE("line construction rejects bad inputs") {
  CHECK_THROWS_AS(Curve::line({0, 0, 0}, {1, 1, 0}, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(Curve::line({0, 0, 0}, {1, 0, 0}, 0.0), std::invalid_argument);
  const Curve c = Curve::line({0, 0, 0}, {1, 0, 0}, 5.0);
  CHECK_THROWS_AS(c.embed(-0.5), std::domain_error);
  CHECK_THROWS_AS(c.embed(5.5), std::domain_error);
}

TEST_CASE("collinear spline passes through the segment midpoint at half parameter") {
  const auto pts = collinearPoints(0.8);
  const Curve c = Curve::quadraticSpline(pts);
  // Dense polyline oracle: walk the curve to half the total arc length.
  const auto eval = [&](double u) {
    // Reconstruct the curve through the public map: u == l / Lambda.
    return c.embed(u * c.paramLength());
  };
  const double arc = oracles::polylineArcLength(eval);
  const Eigen::Vector3d mid = oracles::polylinePointAtArc(eval, 0.5 * arc);
  const Eigen::Vector3d expected = 0.5 * (pts[0] + pts[3]);
  CHECK((mid - expected).norm() < 1e-6);
  CHECK((c.embed(0.5 * c.paramLength()) - expected).norm() < 1e-9);
}

TEST_CASE("spline arc length matches the polyline oracle") {
  const Curve c = Curve::quadraticSpline(bentPoints());
  const auto eval = [&](double u) { return c.embed(u * c.paramLength()); };
  CHECK(c.paramLength() == doctest::Approx(oracles::polylineArcLength(eval)).epsilon(1e-8));
}

TEST_CASE("spline metric matches central finite differences of the embedding") {
  for (const auto& pts : {collinearPoints(0.6), bentPoints()}) {
    const Curve c = Curve::quadraticSpline(pts);
    const double L = c.paramLength();
    for (double frac : {0.12, 0.31, 0.49, 0.52, 0.77, 0.93}) {
      const double l = frac * L;
      const Eigen::Vector3d d =
          oracles::centralDifference([&](double x) { return c.embed(x); }, l, 1e-6 * L);
      CHECK(c.metric(l) == doctest::Approx(d.norm()).epsilon(1e-6));
    }
  }
}

TEST_CASE("spline derivative scales linearly with the control points") {
  const auto pts = bentPoints();
  std::array<Eigen::Vector3d, 4> scaled;
  for (int i = 0; i < 4; ++i) scaled[i] = 2.0 * pts[i];
  const Curve c1 = Curve::quadraticSpline(pts);
  const Curve c2 = Curve::quadraticSpline(scaled);
  CHECK(c2.paramLength() == doctest::Approx(2.0 * c1.paramLength()).epsilon(1e-12));
  for (double u : {0.1, 0.45, 0.8}) {
    // At matching natural parameter the embedded point and |dC/du| both
    // double; the metric normalises by the doubled arc length.
    const double l1 = u * c1.paramLength();
    const double l2 = u * c2.paramLength();
    CHECK((c2.embed(l2) - 2.0 * c1.embed(l1)).norm() < 1e-12);
    const double speed1 = c1.metric(l1) * c1.paramLength();
    const double speed2 = c2.metric(l2) * c2.paramLength();
    CHECK(speed2 == doctest::Approx(2.0 * speed1).epsilon(1e-12));
  }
}

TEST_CASE("one-point rule places the node at the bin midpoint with unit weight") {
  const Curve c = Curve::line({0, 0, 0}, {1, 0, 0}, 3.0);
  const VirtualSources vs = buildVirtualSources(c, 1.0, 1);
  REQUIRE(vs.positions.size() == 3);
  CHECK(vs.positions[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(vs.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(vs.bin_index == std::vector<int>{0, 1, 2});
}

TEST_CASE("per-bin weight sums equal the bin size on a line") {
  const Curve c = Curve::line({0, 0, 0}, {0, 1, 0}, 5.0);
  const VirtualSources vs = buildVirtualSources(c, 0.04, 10);
  REQUIRE(vs.n_bins == 125);
  std::vector<double> sums(vs.n_bins, 0.0);
  for (std::size_t v = 0; v < vs.positions.size(); ++v) {
    CHECK(vs.positions[v] >= 0.0);
    CHECK(vs.positions[v] <= 5.0);
    CHECK(vs.weights[v] > 0.0);
    sums[vs.bin_index[v]] += vs.weights[v];
  }
  for (double s : sums) CHECK(s == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("two-point rule integrates cubics exactly") {
  const Curve c = Curve::line({0, 0, 0}, {1, 0, 0}, 1.0);
  const VirtualSources vs = buildVirtualSources(c, 1.0, 2);
  double integral = 0.0;
  for (std::size_t v = 0; v < vs.positions.size(); ++v)
    integral += vs.weights[v] * std::pow(vs.positions[v], 3);
  CHECK(integral == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("per-bin sums approximate the metric measure on a spline") {
  const Curve c = Curve::quadraticSpline(bentPoints());
  const double bin = 0.25;
  const VirtualSources vs = buildVirtualSources(c, bin, 10);
  std::vector<double> sums(vs.n_bins, 0.0);
  for (std::size_t v = 0; v < vs.positions.size(); ++v) sums[vs.bin_index[v]] += vs.weights[v];
  // The metric has a kink at the interior knot, so the bin containing it
  // converges slower than the smooth ones; 1e-4 relative covers both.
  for (int p = 0; p < vs.n_bins; ++p) {
    const double a = p * bin;
    const double b = std::min((p + 1) * bin, c.paramLength());
    const double measure =
        oracles::simpson([&](double l) { return c.metric(l); }, a, b, 512);
    CHECK(sums[p] == doctest::Approx(measure).epsilon(1e-4));
  }
  double total = 0.0;
  for (double s : sums) total += s;
  CHECK(total == doctest::Approx(c.paramLength()).epsilon(1e-6));
}

TEST_CASE("quadrature error decreases with more points on polynomials") {
  const Curve c = Curve::line({0, 0, 0}, {1, 0, 0}, 2.0);
  // f(l) = (l - 0.3)^7 over [0, 2], exact antiderivative (l - 0.3)^8 / 8.
  const double exact = (std::pow(1.7, 8) - std::pow(-0.3, 8)) / 8.0;
  double prev_error = 1e18;
  for (int points : {1, 2, 3, 4}) {
    const VirtualSources vs = buildVirtualSources(c, 2.0, points);
    double integral = 0.0;
    for (std::size_t v = 0; v < vs.positions.size(); ++v)
      integral += vs.weights[v] * std::pow(vs.positions[v] - 0.3, 7);
    const double error = std::abs(integral - exact);
    CHECK(error <= prev_error + 1e-12);
    prev_error = error;
  }
  CHECK(prev_error < 1e-12);  // a 4-point rule is exact for degree 7
}

TEST_CASE("virtual sources are deterministic") {
  const Curve c = Curve::quadraticSpline(bentPoints());
  const VirtualSources a = buildVirtualSources(c, 0.13, 7);
  const VirtualSources b = buildVirtualSources(c, 0.13, 7);
  CHECK(a.positions == b.positions);
  CHECK(a.weights == b.weights);
  for (std::size_t v = 0; v < a.points.size(); ++v) CHECK(a.points[v] == b.points[v]);
}

TEST_CASE("virtual source construction rejects bad arguments") {
  const Curve c = Curve::line({0, 0, 0}, {1, 0, 0}, 2.0);
  CHECK_THROWS_AS(buildVirtualSources(c, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(buildVirtualSources(c, -1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(buildVirtualSources(c, 0.5, 0), std::invalid_argument);
}
