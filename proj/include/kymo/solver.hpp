#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "kymo/photometry.hpp"
#include "kymo/system.hpp"

namespace kymo {

struct SolverConfig {
  double gamma = 1.0;      // Bregman proximal step, 1/(2 gamma) in the augmented term
  int max_iters = 5000;
  double rel_tol = 1e-6;   // relative change of the projected iterate
  InnovationPrior prior;

  void validate() const {
    if (!(gamma > 0)) throw std::invalid_argument("SolverConfig: gamma must be > 0");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (!(rel_tol > 0)) throw std::invalid_argument("SolverConfig: rel_tol must be > 0");
    prior.validate();
  }
};

// Stacked operator A = [H; L; I] and the precomputed factorisation of the
// normal matrix A^T A = H^T H + L^T L + I, which the +I term keeps symmetric
// positive definite regardless of H.
class StackedOperator {
 public:
  StackedOperator(const Eigen::MatrixXd& H, const Eigen::MatrixXd& L);

  Eigen::Index nPixels() const { return H_.rows(); }
  Eigen::Index nBases() const { return H_.cols(); }

  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::MatrixXd& L() const { return L_; }
  const Eigen::MatrixXd& normalMatrix() const { return normal_; }

  Eigen::VectorXd solveNormal(const Eigen::VectorXd& rhs) const;

  // A^T r for r = (r1, r2, r3) stacked as (n_p, N, N).
  Eigen::VectorXd applyAdjoint(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                               const Eigen::VectorXd& r3) const;

 private:
  Eigen::MatrixXd H_;
  Eigen::MatrixXd L_;
  Eigen::MatrixXd normal_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

StackedOperator precomputeNormalInverse(const Eigen::MatrixXd& H, const Eigen::MatrixXd& L);

// Normal-equation solve phi_ls = (A^T A)^-1 A^T (w - (b + bg 1_BG)), where
// 1_BG selects the likelihood block.
Eigen::VectorXd solveLeastSquares(const StackedOperator& op, const Eigen::VectorXd& w1,
                                  const Eigen::VectorXd& w2, const Eigen::VectorXd& w3,
                                  const Eigen::VectorXd& b1, const Eigen::VectorXd& b2,
                                  const Eigen::VectorXd& b3, double bg_integrated);

// Normalised Poisson negative log-likelihood in Csiszar form:
// (1/n_p) sum_k [ n_k log(n_k / rate_k) + rate_k - n_k ], with 0 log 0 = 0.
// Zero exactly when counts equal rates; accepts non-integer counts.
double negLogLikelihood(const Eigen::VectorXd& counts, const Eigen::VectorXd& rates);
double negLogLikelihood(const PhotometryVector& phi, const Eigen::VectorXd& counts,
                        const SystemMatrices& system, double bg_integrated);

// Proximal map of the normalised likelihood: per pixel the positive root of
// w^2 + w (gamma/n_p - v) - (gamma/n_p) n = 0 where v = b1 + rate(phi_ls).
Eigen::VectorXd likelihoodProx(const Eigen::VectorXd& v, const Eigen::VectorXd& counts,
                               double gamma_over_np);

// Proximal map of the normalised innovation potential with threshold
// c = gamma * lambda / N: soft thresholding (Laplace) or w/(1+2c) (Gaussian).
Eigen::VectorXd innovationProx(const Eigen::VectorXd& v, const InnovationPrior& prior,
                               double gamma, int n_bases);

Eigen::VectorXd positivityProject(const Eigen::VectorXd& v);

struct SolverDiagnostics {
  std::vector<double> objective;
  std::vector<double> nll;
  std::vector<double> prior;
  std::vector<double> constraint_residual;  // ||bg 1_BG + A phi_ls - w|| / (1 + ||w||)
  std::vector<double> phi_rel_change;
  int iterations = 0;
  bool converged = false;
};

struct MapResult {
  PhotometryVector phi;  // projected iterate at convergence, >= 0
  SolverDiagnostics diagnostics;
};

class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(int iteration, const std::string& what)
      : std::runtime_error(what), iteration(iteration) {}
  int iteration;
};

// Fully-split alternating split Bregman iteration for the MAP problem:
// least-squares solve, likelihood / innovation / positivity proximal steps,
// then the Bregman update b += bg 1_BG + A phi_ls - w. Outputs the result
// of the projection step.
MapResult runMap(const Eigen::VectorXd& counts, const SystemMatrices& system,
                 double bg_integrated, const WhiteningMatrix& whitening,
                 const SolverConfig& config);

// Objective of the MAP problem at a feasible (nonnegative) point.
double mapObjective(const Eigen::VectorXd& phi, const Eigen::VectorXd& counts,
                    const SystemMatrices& system, double bg_integrated,
                    const WhiteningMatrix& whitening, const InnovationPrior& prior);

}  // namespace kymo
