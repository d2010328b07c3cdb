#include "kymo/solver.hpp"

#include <cmath>
#include <string>

namespace kymo {

StackedOperator::StackedOperator(const Eigen::MatrixXd& H, const Eigen::MatrixXd& L)
    : H_(H), L_(L) {
  if (L.rows() != L.cols() || L.rows() != H.cols())
    throw std::invalid_argument("StackedOperator: L must be N x N matching H's columns");
  if (!H.allFinite() || !L.allFinite())
    throw std::invalid_argument("StackedOperator: non-finite operator entries");
  const Eigen::Index n = H.cols();
  normal_ = H.transpose() * H + L.transpose() * L +
            Eigen::MatrixXd::Identity(n, n);
  llt_.compute(normal_);
  if (llt_.info() != Eigen::Success)
    throw std::runtime_error("StackedOperator: normal matrix factorisation failed");
}

Eigen::VectorXd StackedOperator::solveNormal(const Eigen::VectorXd& rhs) const {
  return llt_.solve(rhs);
}

Eigen::VectorXd StackedOperator::applyAdjoint(const Eigen::VectorXd& r1,
                                              const Eigen::VectorXd& r2,
                                              const Eigen::VectorXd& r3) const {
  return H_.transpose() * r1 + L_.transpose() * r2 + r3;
}

StackedOperator precomputeNormalInverse(const Eigen::MatrixXd& H, const Eigen::MatrixXd& L) {
  return StackedOperator(H, L);
}

Eigen::VectorXd solveLeastSquares(const StackedOperator& op, const Eigen::VectorXd& w1,
                                  const Eigen::VectorXd& w2, const Eigen::VectorXd& w3,
                                  const Eigen::VectorXd& b1, const Eigen::VectorXd& b2,
                                  const Eigen::VectorXd& b3, double bg_integrated) {
  const Eigen::VectorXd r1 =
      w1 - b1 - Eigen::VectorXd::Constant(op.nPixels(), bg_integrated);
  return op.solveNormal(op.applyAdjoint(r1, w2 - b2, w3 - b3));
}

double negLogLikelihood(const Eigen::VectorXd& counts, const Eigen::VectorXd& rates) {
  if (counts.size() != rates.size())
    throw std::invalid_argument("negLogLikelihood: size mismatch");
  double total = 0.0;
  for (Eigen::Index k = 0; k < counts.size(); ++k) {
    const double n = counts[k];
    const double rate = rates[k];
    if (!(rate > 0)) throw std::runtime_error("negLogLikelihood: nonpositive rate");
    if (n < 0) throw std::invalid_argument("negLogLikelihood: negative count");
    total += rate - n;
    if (n > 0) total += n * std::log(n / rate);
  }
  return total / static_cast<double>(counts.size());
}

double negLogLikelihood(const PhotometryVector& phi, const Eigen::VectorXd& counts,
                        const SystemMatrices& system, double bg_integrated) {
  return negLogLikelihood(counts, expectedCounts(system, phi, bg_integrated));
}

Eigen::VectorXd likelihoodProx(const Eigen::VectorXd& v, const Eigen::VectorXd& counts,
                               double gamma_over_np) {
  if (v.size() != counts.size())
    throw std::invalid_argument("likelihoodProx: size mismatch");
  const double c = gamma_over_np;
  Eigen::VectorXd w(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double n = counts[k];
    const double half_b = 0.5 * (v[k] - c);
    if (n > 0) {
      // The product of roots is -c*n < 0, so this root is strictly positive.
      w[k] = half_b + std::sqrt(half_b * half_b + c * n);
    } else {
      w[k] = std::max(0.0, v[k] - c);
    }
  }
  return w;
}

Eigen::VectorXd innovationProx(const Eigen::VectorXd& v, const InnovationPrior& prior,
                               double gamma, int n_bases) {
  prior.validate();
  const double c = gamma * prior.lambda / static_cast<double>(n_bases);
  if (prior.family == PriorFamily::Laplace) {
    Eigen::VectorXd w(v.size());
    for (Eigen::Index p = 0; p < v.size(); ++p) {
      const double mag = std::abs(v[p]) - c;
      w[p] = mag > 0 ? (v[p] > 0 ? mag : -mag) : 0.0;
    }
    return w;
  }
  return v / (1.0 + 2.0 * c);
}

Eigen::VectorXd positivityProject(const Eigen::VectorXd& v) {
  return v.cwiseMax(0.0);
}

double mapObjective(const Eigen::VectorXd& phi, const Eigen::VectorXd& counts,
                    const SystemMatrices& system, double bg_integrated,
                    const WhiteningMatrix& whitening, const InnovationPrior& prior) {
  PhotometryVector p{phi, system.frame_index};
  const double nll = negLogLikelihood(p, counts, system, bg_integrated);
  const double pot = priorPotential(whitening.apply(phi), prior) / whitening.n;
  return nll + pot;
}

MapResult runMap(const Eigen::VectorXd& counts, const SystemMatrices& system,
                 double bg_integrated, const WhiteningMatrix& whitening,
                 const SolverConfig& config) {
  config.validate();
  if (!(bg_integrated > 0))
    throw std::invalid_argument("runMap: integrated background must be > 0");
  if (!counts.allFinite() || (counts.array() < 0).any())
    throw std::invalid_argument("runMap: photon counts must be finite and nonnegative");
  if (counts.size() != system.H.rows())
    throw std::invalid_argument("runMap: counts do not match the system");

  const Eigen::Index n_p = system.H.rows();
  const int n = whitening.n;
  if (n != system.H.cols()) throw std::invalid_argument("runMap: whitening size mismatch");

  const StackedOperator op(system.H, whitening.dense());
  const double gamma_over_np = config.gamma / static_cast<double>(n_p);

  // Initial state: phi_ls = 0, w matches the background-only constraint, b = 0.
  Eigen::VectorXd phi_ls = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w1 = Eigen::VectorXd::Constant(n_p, bg_integrated);
  Eigen::VectorXd w2 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w3 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b1 = Eigen::VectorXd::Zero(n_p);
  Eigen::VectorXd b2 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b3 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd phi_proj = Eigen::VectorXd::Zero(n);

  MapResult result;
  SolverDiagnostics& diag = result.diagnostics;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    phi_ls = solveLeastSquares(op, w1, w2, w3, b1, b2, b3, bg_integrated);

    const Eigen::VectorXd rates = (system.H * phi_ls).array() + bg_integrated;
    const Eigen::VectorXd l_phi = whitening.apply(phi_ls);

    w1 = likelihoodProx(b1 + rates, counts, gamma_over_np);
    w2 = innovationProx(b2 + l_phi, config.prior, config.gamma, n);
    w3 = positivityProject(b3 + phi_ls);

    const Eigen::VectorXd r1 = rates - w1;  // bg 1 + H phi_ls - w1
    const Eigen::VectorXd r2 = l_phi - w2;
    const Eigen::VectorXd r3 = phi_ls - w3;
    b1 += r1;
    b2 += r2;
    b3 += r3;

    const Eigen::VectorXd phi_next = w3;
    if (!phi_next.allFinite())
      throw SolverDivergence(iter, "runMap: non-finite iterate at iteration " +
                                       std::to_string(iter));

    const double prev_norm = phi_proj.norm();
    const double rel_change =
        (phi_next - phi_proj).norm() / std::max(prev_norm, 1e-12);
    phi_proj = phi_next;

    const double w_norm = std::sqrt(w1.squaredNorm() + w2.squaredNorm() + w3.squaredNorm());
    const double residual =
        std::sqrt(r1.squaredNorm() + r2.squaredNorm() + r3.squaredNorm()) / (1.0 + w_norm);

    const double nll = negLogLikelihood(counts, (system.H * phi_proj).array() + bg_integrated);
    const double pot = priorPotential(whitening.apply(phi_proj), config.prior) / n;
    diag.nll.push_back(nll);
    diag.prior.push_back(pot);
    diag.objective.push_back(nll + pot);
    diag.constraint_residual.push_back(residual);
    diag.phi_rel_change.push_back(rel_change);
    diag.iterations = iter + 1;

    if (iter > 0 && rel_change < config.rel_tol) {
      diag.converged = true;
      break;
    }
  }

  result.phi.values = phi_proj;
  result.phi.frame_index = system.frame_index;
  return result;
}

}  // namespace kymo
