#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace kymo {

struct CmaOptions {
  int max_evals = 2000;
  int population = 0;  // 0 picks 4 + floor(3 ln n)
  std::uint64_t seed = 0;
};

struct CmaResult {
  Eigen::VectorXd best_x;
  double best_f = 0.0;
  int evaluations = 0;
};

// Minimal covariance matrix adaptation evolution strategy with rank-1 and
// rank-mu updates. Candidates are repaired (clamped to bounds, then the
// optional problem-specific repair) before evaluation; the repaired points
// drive the distribution update so the search mean stays feasible. The
// initial mean is evaluated first, so best_f never exceeds f(x0).
CmaResult cmaesMinimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                        const Eigen::VectorXd& x0, double sigma0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const CmaOptions& options,
                        const std::function<void(Eigen::VectorXd&)>& repair = nullptr);

}  // namespace kymo
