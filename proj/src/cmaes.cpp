#include "kymo/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace kymo {

CmaResult cmaesMinimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                        const Eigen::VectorXd& x0, double sigma0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const CmaOptions& options,
                        const std::function<void(Eigen::VectorXd&)>& repair) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("cmaesMinimize: empty search space");
  if (lower.size() != n || upper.size() != n)
    throw std::invalid_argument("cmaesMinimize: bound size mismatch");
  if ((lower.array() > upper.array()).any())
    throw std::invalid_argument("cmaesMinimize: infeasible bounds");
  if (!(sigma0 > 0)) throw std::invalid_argument("cmaesMinimize: sigma0 must be > 0");

  const auto clampRepair = [&](Eigen::VectorXd& x) {
    x = x.cwiseMax(lower).cwiseMin(upper);
    if (repair) repair(x);
  };

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int lambda =
      options.population > 0 ? options.population : 4 + static_cast<int>(3.0 * std::log(n));
  const int mu = lambda / 2;

  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                              ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n = std::sqrt(static_cast<double>(n)) *
                       (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  Eigen::VectorXd mean = x0;
  clampRepair(mean);
  double sigma = sigma0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);

  CmaResult result;
  result.best_x = mean;
  result.best_f = objective(mean);
  result.evaluations = 1;

  std::vector<Eigen::VectorXd> xs(lambda);
  std::vector<double> fs(lambda);
  std::vector<int> order(lambda);

  while (result.evaluations < options.max_evals) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success) break;
    const Eigen::MatrixXd B = eig.eigenvectors();
    const Eigen::VectorXd D = eig.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
    const Eigen::MatrixXd BD = B * D.asDiagonal();
    const Eigen::MatrixXd inv_sqrt_C = B * D.cwiseInverse().asDiagonal() * B.transpose();

    const int batch = std::min(lambda, options.max_evals - result.evaluations);
    for (int i = 0; i < batch; ++i) {
      Eigen::VectorXd z(n);
      for (int j = 0; j < n; ++j) z[j] = gauss(rng);
      xs[i] = mean + sigma * (BD * z);
      clampRepair(xs[i]);
      fs[i] = objective(xs[i]);
      if (fs[i] < result.best_f) {
        result.best_f = fs[i];
        result.best_x = xs[i];
      }
    }
    result.evaluations += batch;
    if (batch < lambda) break;  // budget exhausted mid-generation

    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });

    const Eigen::VectorXd mean_old = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += weights[i] * xs[order[i]];

    const Eigen::VectorXd shift = (mean - mean_old) / sigma;
    p_sigma = (1.0 - c_sigma) * p_sigma +
              std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (inv_sqrt_C * shift);
    const bool h_sigma =
        p_sigma.norm() / std::sqrt(1.0 - std::pow(1.0 - c_sigma,
                                                  2.0 * (result.evaluations / lambda + 1))) <
        (1.4 + 2.0 / (n + 1.0)) * chi_n;
    p_c = (1.0 - c_c) * p_c +
          (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * shift;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const Eigen::VectorXd y = (xs[order[i]] - mean_old) / sigma;
      rank_mu += weights[i] * y * y.transpose();
    }
    C = (1.0 - c_1 - c_mu) * C +
        c_1 * (p_c * p_c.transpose() + (h_sigma ? 0.0 : c_c * (2.0 - c_c)) * C) +
        c_mu * rank_mu;

    sigma *= std::exp((c_sigma / d_sigma) * (p_sigma.norm() / chi_n - 1.0));
    if (!std::isfinite(sigma) || sigma < 1e-16) break;
  }
  return result;
}

}  // namespace kymo
