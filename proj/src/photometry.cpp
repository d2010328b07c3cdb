#include "kymo/photometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kymo {

BasisSpec BasisSpec::forCurve(const Curve& curve, double bin_size_um) {
  BasisSpec b;
  b.bin_size = bin_size_um;
  b.n_bases = binCount(curve.paramLength(), bin_size_um);
  return b;
}

double evalSignal(const PhotometryVector& phi, const BasisSpec& basis, double l) {
  if (phi.values.size() != basis.n_bases)
    throw std::invalid_argument("evalSignal: photometry length does not match basis");
  const double domain = basis.domainLength();
  const double slack = 1e-9 * std::max(1.0, domain);
  if (l < -slack || l > domain + slack)
    throw std::domain_error("evalSignal: position " + std::to_string(l) +
                            " outside [0, " + std::to_string(domain) + "]");
  int p = static_cast<int>(std::floor(std::max(l, 0.0) / basis.bin_size));
  if (p >= basis.n_bases) p = basis.n_bases - 1;  // l at the right end maps to the last bin
  return phi.values[p];
}

void CometParams::validate() const {
  if (mu < 0 || a < 0 || b < 0 || d < 0)
    throw std::invalid_argument("CometParams: negative parameter");
  if (!(sigma > 0)) throw std::invalid_argument("CometParams: sigma must be > 0");
  if (!(c > 0)) throw std::invalid_argument("CometParams: c must be > 0");
}

double cometDensity(const CometParams& p, double l) {
  const double peak = p.a / std::sqrt(2.0 * M_PI * p.sigma * p.sigma);
  if (l >= p.mu - p.b) {
    const double z = (l - p.mu) / p.sigma;
    return peak * std::exp(-0.5 * z * z);
  }
  const double edge = peak * std::exp(-0.5 * p.b * p.b / (p.sigma * p.sigma));
  return (edge - p.d) * std::exp((l - (p.mu - p.b)) / p.c) + p.d;
}

void IslandParams::validate() const {
  if (phi1 < 0 || phi2 < 0 || phi3 < 0)
    throw std::invalid_argument("IslandParams: negative intensity");
  if (!(0 <= a && a <= b && b <= c && c <= d))
    throw std::invalid_argument("IslandParams: breakpoints must satisfy 0 <= a <= b <= c <= d");
}

double islandDensity(const IslandParams& p, double l, double curve_length) {
  if (curve_length < p.d)
    throw std::invalid_argument("islandDensity: curve shorter than last breakpoint");
  if (l <= p.a) return p.phi1;
  if (l >= p.b && l <= p.c) return p.phi2;
  if (l >= p.d && l <= curve_length) return p.phi3;
  return 0.0;
}

void InnovationPrior::validate() const {
  if (!(lambda > 0)) throw std::invalid_argument("InnovationPrior: lambda must be > 0");
}

double priorPotential(const Eigen::VectorXd& u, const InnovationPrior& prior) {
  prior.validate();
  if (prior.family == PriorFamily::Laplace) return prior.lambda * u.lpNorm<1>();
  return prior.lambda * u.squaredNorm();
}

WhiteningMatrix whiteningMatrix(int n) {
  if (n < 1) throw std::invalid_argument("whiteningMatrix: size must be >= 1");
  return WhiteningMatrix{n};
}

Eigen::MatrixXd WhiteningMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int p = 1; p < n; ++p) m(p, p - 1) = -1.0;
  return m;
}

Eigen::VectorXd WhiteningMatrix::apply(const Eigen::VectorXd& phi) const {
  Eigen::VectorXd u(n);
  u[0] = phi[0];
  for (int p = 1; p < n; ++p) u[p] = phi[p] - phi[p - 1];
  return u;
}

Eigen::VectorXd WhiteningMatrix::applyTranspose(const Eigen::VectorXd& v) const {
  Eigen::VectorXd z(n);
  for (int p = 0; p + 1 < n; ++p) z[p] = v[p] - v[p + 1];
  z[n - 1] = v[n - 1];
  return z;
}

Eigen::VectorXd WhiteningMatrix::solve(const Eigen::VectorXd& u) const {
  Eigen::VectorXd phi(n);
  phi[0] = u[0];
  for (int p = 1; p < n; ++p) phi[p] = u[p] + phi[p - 1];
  return phi;
}

}  // namespace kymo
