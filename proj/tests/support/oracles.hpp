#pragma once

// Independent reference computations the unit and acceptance tests check
// the implementation against. Nothing here may call into the code paths
// under test beyond plain data types.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "kymo/photometry.hpp"
#include "kymo/solver.hpp"

namespace oracles {

// Central finite difference of a 3-D curve map.
inline Eigen::Vector3d centralDifference(const std::function<Eigen::Vector3d(double)>& f,
                                         double l, double h) {
  return (f(l + h) - f(l - h)) / (2.0 * h);
}

// Arc-length point lookup on a dense polyline sampling of a curve given on
// a unit natural parameter.
inline Eigen::Vector3d polylinePointAtArc(const std::function<Eigen::Vector3d(double)>& curve,
                                          double target_arc, int segments = 200000) {
  Eigen::Vector3d prev = curve(0.0);
  double acc = 0.0;
  for (int i = 1; i <= segments; ++i) {
    const Eigen::Vector3d next = curve(static_cast<double>(i) / segments);
    const double step = (next - prev).norm();
    if (acc + step >= target_arc) {
      const double frac = step > 0 ? (target_arc - acc) / step : 0.0;
      return prev + frac * (next - prev);
    }
    acc += step;
    prev = next;
  }
  return prev;
}

inline double polylineArcLength(const std::function<Eigen::Vector3d(double)>& curve,
                                int segments = 200000) {
  Eigen::Vector3d prev = curve(0.0);
  double acc = 0.0;
  for (int i = 1; i <= segments; ++i) {
    const Eigen::Vector3d next = curve(static_cast<double>(i) / segments);
    acc += (next - prev).norm();
    prev = next;
  }
  return acc;
}

// Composite Simpson integration.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int panels = 2048) {
  const double h = (b - a) / (2 * panels);
  double sum = f(a) + f(b);
  for (int i = 1; i < 2 * panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// Tensor-product midpoint integration of a 3-D function over a box.
inline double boxIntegral3(const std::function<double(double, double, double)>& f,
                           const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int n = 96) {
  const Eigen::Vector3d h = (hi - lo) / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        sum += f(lo.x() + (i + 0.5) * h.x(), lo.y() + (j + 0.5) * h.y(),
                 lo.z() + (k + 0.5) * h.z());
  return sum * h.prod();
}

// Brute-force proximal map by 1-D grid search:
// argmin_w c * pot(w) + 1/2 (w - v)^2.
inline double gridSearchProx(const std::function<double(double)>& pot, double c, double v,
                             double radius, double resolution) {
  double best_w = v, best_f = c * pot(v);
  for (double w = v - radius; w <= v + radius; w += resolution) {
    const double f = c * pot(w) + 0.5 * (w - v) * (w - v);
    if (f < best_f) {
      best_f = f;
      best_w = w;
    }
  }
  return best_w;
}

// Long-run projected subgradient descent for the MAP objective
//   (1/n_p) sum_k [n log(n/rate) + rate - n] + (lambda/N) pot(L phi),
// rate = bg + H phi, phi >= 0. Multiple diminishing-step scales are tried
// and the best feasible objective wins. Independent of the split solver.
inline double projectedSubgradientOptimum(const Eigen::MatrixXd& H, const Eigen::VectorXd& counts,
                                          double bg, const Eigen::MatrixXd& L,
                                          const kymo::InnovationPrior& prior, int iterations) {
  const Eigen::Index n_p = H.rows();
  const Eigen::Index n = H.cols();
  const double inv_np = 1.0 / static_cast<double>(n_p);
  const double reg = prior.lambda / static_cast<double>(n);

  const auto objective = [&](const Eigen::VectorXd& phi) {
    const Eigen::VectorXd rates = (H * phi).array() + bg;
    double f = 0.0;
    for (Eigen::Index k = 0; k < n_p; ++k) {
      f += rates[k] - counts[k];
      if (counts[k] > 0) f += counts[k] * std::log(counts[k] / rates[k]);
    }
    f *= inv_np;
    const Eigen::VectorXd u = L * phi;
    if (prior.family == kymo::PriorFamily::Laplace)
      f += reg * u.lpNorm<1>();
    else
      f += reg * u.squaredNorm();
    return f;
  };

  double best = objective(Eigen::VectorXd::Zero(n));
  for (double scale : {0.03, 0.1, 0.3, 1.0, 3.0, 10.0}) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < iterations; ++i) {
      const Eigen::VectorXd rates = (H * phi).array() + bg;
      Eigen::VectorXd grad =
          inv_np * (H.transpose() * (Eigen::VectorXd::Ones(n_p) -
                                     (counts.array() / rates.array()).matrix()));
      const Eigen::VectorXd u = L * phi;
      if (prior.family == kymo::PriorFamily::Laplace) {
        Eigen::VectorXd sign(n);
        for (Eigen::Index p = 0; p < n; ++p) sign[p] = u[p] > 0 ? 1.0 : (u[p] < 0 ? -1.0 : 0.0);
        grad += reg * (L.transpose() * sign);
      } else {
        grad += 2.0 * reg * (L.transpose() * u);
      }
      const double step = scale / std::sqrt(i + 1.0);
      phi = (phi - step * grad).cwiseMax(0.0);
      const double f = objective(phi);
      if (f < best) best = f;
    }
  }
  return best;
}

}  // namespace oracles
