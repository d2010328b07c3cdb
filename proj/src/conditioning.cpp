#include "kymo/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace kymo {

ImagingConfig singlePlaneGrid(int n_rows, int n_cols, double pixel_size,
                              double acquisition_time) {
  ImagingConfig grid;
  grid.n_slices = 1;
  grid.n_rows = n_rows;
  grid.n_cols = n_cols;
  grid.pixel_size = pixel_size;
  grid.acquisition_time = acquisition_time;
  grid.validate();
  return grid;
}

PointSourceSystem assemblePointSourceMatrix(const std::vector<Eigen::Vector3d>& locations,
                                            const PsfModel& psf, const ImagingConfig& grid) {
  psf.validate();
  grid.validate();
  if (locations.empty())
    throw std::invalid_argument("assemblePointSourceMatrix: no source locations");

  const int n_p = grid.nPixels();
  const double integration = grid.pixelArea() * grid.acquisition_time;

  PointSourceSystem system;
  system.locations = locations;
  system.M.resize(n_p, static_cast<Eigen::Index>(locations.size()));
  for (std::size_t j = 0; j < locations.size(); ++j)
    for (int k = 0; k < n_p; ++k)
      system.M(k, static_cast<Eigen::Index>(j)) =
          integration * psf.eval(grid.pixelCentre(k) - locations[j]);
  return system;
}

double rcn(const Eigen::MatrixXd& m) {
  if (m.size() == 0) throw std::invalid_argument("rcn: empty matrix");
  if (!m.allFinite()) throw std::invalid_argument("rcn: non-finite entries");
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double s_max = sv[0];
  if (!(s_max > 0)) return 0.0;
  return sv[sv.size() - 1] / s_max;
}

std::vector<Eigen::Vector3d> rootsOfUnitySources(int n_neighbours, double radius_px,
                                                 const Eigen::Vector2d& centre_um,
                                                 const ImagingConfig& grid) {
  if (n_neighbours < 0)
    throw std::invalid_argument("rootsOfUnitySources: negative neighbour count");
  if (!(radius_px > 0)) throw std::invalid_argument("rootsOfUnitySources: radius must be > 0");

  const double z = 0.5 * grid.z_spacing;  // the single plane
  const double r = radius_px * grid.pixel_size;
  std::vector<Eigen::Vector3d> points;
  points.reserve(static_cast<std::size_t>(n_neighbours) + 1);
  points.emplace_back(centre_um.x(), centre_um.y(), z);
  for (int j = 0; j < n_neighbours; ++j) {
    const double angle = 2.0 * M_PI * j / n_neighbours;
    points.emplace_back(centre_um.x() + r * std::cos(angle),
                        centre_um.y() + r * std::sin(angle), z);
  }
  return points;
}

std::vector<RcnSweepRow> runRcnSweep(const std::vector<double>& radii_px,
                                     const std::vector<int>& source_counts, const PsfModel& psf,
                                     const ImagingConfig& grid) {
  // Circle centre on a pixel centre in the middle of the plane.
  const Eigen::Vector2d centre((grid.n_cols / 2 + 0.5) * grid.pixel_size,
                               (grid.n_rows / 2 + 0.5) * grid.pixel_size);
  std::vector<RcnSweepRow> rows;
  for (double radius : radii_px)
    for (int count : source_counts) {
      if (count < 1) throw std::invalid_argument("runRcnSweep: source count must be >= 1");
      const auto locations = rootsOfUnitySources(count - 1, radius, centre, grid);
      const PointSourceSystem system = assemblePointSourceMatrix(locations, psf, grid);
      rows.push_back({radius, count, rcn(system.M)});
    }
  return rows;
}

Eigen::VectorXd mlPointSourceIntensities(const Eigen::MatrixXd& M, const Eigen::VectorXd& counts,
                                         double mu_bg, int max_iters, double tol) {
  if (counts.size() != M.rows())
    throw std::invalid_argument("mlPointSourceIntensities: counts do not match matrix");
  if (!(mu_bg > 0))
    throw std::invalid_argument("mlPointSourceIntensities: background must be > 0");

  const auto objective = [&](const Eigen::VectorXd& phi, Eigen::VectorXd& rates) {
    rates = (M * phi).array() + mu_bg;
    double f = 0.0;
    for (Eigen::Index k = 0; k < rates.size(); ++k) {
      f += rates[k];
      if (counts[k] > 0) f -= counts[k] * std::log(rates[k]);
    }
    return f;
  };

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(M.cols());
  Eigen::VectorXd rates;
  double f = objective(phi, rates);
  double step = 1.0;

  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd grad =
        M.transpose() * (Eigen::VectorXd::Ones(counts.size()) -
                         (counts.array() / rates.array()).matrix());
    step *= 4.0;  // allow the step to grow back after conservative iterations
    Eigen::VectorXd phi_next;
    Eigen::VectorXd rates_next;
    double f_next = f;
    for (int ls = 0; ls < 60; ++ls) {
      phi_next = (phi - step * grad).cwiseMax(0.0);
      f_next = objective(phi_next, rates_next);
      const double decrease = grad.dot(phi - phi_next);
      if (std::isfinite(f_next) && f_next <= f - 1e-4 * decrease) break;
      step *= 0.5;
    }
    const double change = (phi_next - phi).norm() / std::max(phi.norm(), 1.0);
    phi = phi_next;
    rates = rates_next;
    const double improvement = f - f_next;
    f = f_next;
    if (change < tol && improvement < tol * std::max(std::abs(f), 1.0)) break;
  }
  return phi;
}

std::vector<ErrorSweepRow> runErrorSweep(const std::vector<double>& radii_px,
                                         const std::vector<int>& source_counts, int repeats,
                                         const PsfModel& psf, const ImagingConfig& grid,
                                         double mu_bg, double phi_true, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("runErrorSweep: repeats must be >= 1");
  const Eigen::Vector2d centre((grid.n_cols / 2 + 0.5) * grid.pixel_size,
                               (grid.n_rows / 2 + 0.5) * grid.pixel_size);

  std::vector<ErrorSweepRow> rows;
  std::uint64_t cell = 0;
  for (double radius : radii_px)
    for (int count : source_counts) {
      const auto locations = rootsOfUnitySources(count - 1, radius, centre, grid);
      const PointSourceSystem system = assemblePointSourceMatrix(locations, psf, grid);
      const Eigen::VectorXd truth = Eigen::VectorXd::Constant(count, phi_true);
      const Eigen::VectorXd rates = (system.M * truth).array() + mu_bg;

      std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * ++cell));
      std::poisson_distribution<long> poisson;
      std::vector<double> errors(static_cast<std::size_t>(repeats));
      for (int rep = 0; rep < repeats; ++rep) {
        Eigen::VectorXd counts(rates.size());
        for (Eigen::Index k = 0; k < rates.size(); ++k) {
          poisson.param(std::poisson_distribution<long>::param_type(rates[k]));
          counts[k] = static_cast<double>(poisson(rng));
        }
        const Eigen::VectorXd estimate = mlPointSourceIntensities(system.M, counts, mu_bg);
        errors[static_cast<std::size_t>(rep)] = (estimate - truth).norm() / truth.norm();
      }
      std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
      double median = errors[errors.size() / 2];
      if (errors.size() % 2 == 0) {
        const double upper = median;
        std::nth_element(errors.begin(), errors.begin() + errors.size() / 2 - 1, errors.end());
        median = 0.5 * (median + errors[errors.size() / 2 - 1]);
        (void)upper;
      }
      rows.push_back({radius, count, median});
    }
  return rows;
}

SelectionMatrix nnSelectionMatrix(const std::vector<Eigen::Vector3d>& sample_points,
                                  const ImagingConfig& grid) {
  SelectionMatrix sel;
  sel.S = Eigen::MatrixXd::Zero(grid.nPixels(), static_cast<Eigen::Index>(sample_points.size()));
  std::vector<int> assigned;
  assigned.reserve(sample_points.size());
  for (std::size_t j = 0; j < sample_points.size(); ++j) {
    const Eigen::Vector3d& y = sample_points[j];
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.nPixels(); ++k) {
      const double d = (grid.pixelCentre(k) - y).squaredNorm();
      if (d < best_dist - 1e-15) {  // ties keep the lowest linear index
        best_dist = d;
        best = k;
      }
    }
    if (std::find(assigned.begin(), assigned.end(), best) != assigned.end())
      sel.has_duplicate_columns = true;
    assigned.push_back(best);
    sel.S(best, static_cast<Eigen::Index>(j)) = 1.0;
  }
  return sel;
}

}  // namespace kymo
