#pragma once

#include <Eigen/Dense>

#include "kymo/geometry.hpp"

namespace kymo {

// Degree-0 B-spline reconstruction space at resolution bin_size: the signal
// is piecewise constant on right-open bins [p*bin, (p+1)*bin), the last bin
// closed so l = n_bases*bin stays valid.
struct BasisSpec {
  double bin_size = 0.04;  // um
  int n_bases = 1;

  static BasisSpec forCurve(const Curve& curve, double bin_size_um);
  double domainLength() const { return bin_size * n_bases; }
};

// Digital intensities phi[p] along one frame's curve, photons s^-1 per um.
struct PhotometryVector {
  Eigen::VectorXd values;
  int frame_index = 0;
};

double evalSignal(const PhotometryVector& phi, const BasisSpec& basis, double l);

// PM1, the comet shape: Gaussian head for l >= mu - b, exponential tail
// decaying to the offset d on the other side. Continuous by construction.
struct CometParams {
  double mu = 4.0, sigma = 0.3, a = 300.0, b = 0.2, c = 0.6, d = 20.0;

  void validate() const;
};

double cometDensity(const CometParams& p, double l);

// PM2, the island model: phi1 on [0,a], phi2 on [b,c], phi3 on [d,Lambda],
// zero elsewhere.
struct IslandParams {
  double phi1 = 600.0, phi2 = 400.0, phi3 = 800.0;
  double a = 1.0, b = 2.5, c = 3.0, d = 4.5;

  void validate() const;
};

double islandDensity(const IslandParams& p, double l, double curve_length);

enum class PriorFamily { Gaussian, Laplace };

struct InnovationPrior {
  PriorFamily family = PriorFamily::Laplace;
  double lambda = 1.0;  // regularisation weight, > 0

  void validate() const;
};

// lambda * sum |u_p| (Laplace) or lambda * sum u_p^2 (Gaussian); the 1/N
// normalisation is applied by the solver, not here.
double priorPotential(const Eigen::VectorXd& u, const InnovationPrior& prior);

// First-order whitening operator: (L phi)[0] = phi[0],
// (L phi)[p] = phi[p] - phi[p-1]. Lower bidiagonal, determinant 1.
struct WhiteningMatrix {
  int n = 0;

  Eigen::MatrixXd dense() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd applyTranspose(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& u) const;  // L x = u by forward substitution
};

WhiteningMatrix whiteningMatrix(int n);

}  // namespace kymo
