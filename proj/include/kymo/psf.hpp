#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace kymo {

// Anisotropic 3-D Gaussian PSF normalised to a probability density,
// c0 = (8 pi^3 sigma_xy^4 sigma_z^2)^{-1/2}. An optional cutoff truncates
// the kernel to a box of +/- cutoff standard deviations per axis, which
// gives it compact support for the conditioning experiments.
struct PsfModel {
  double sigma_xy = 0.130;  // um
  double sigma_z = 0.255;   // um
  std::optional<double> cutoff_sigmas;

  void validate() const {
    if (!(sigma_xy > 0) || !(sigma_z > 0))
      throw std::invalid_argument("PsfModel: standard deviations must be > 0");
    if (cutoff_sigmas && !(*cutoff_sigmas > 0))
      throw std::invalid_argument("PsfModel: cutoff must be > 0");
  }

  double normConst() const {
    return 1.0 / std::sqrt(8.0 * M_PI * M_PI * M_PI * std::pow(sigma_xy, 4) *
                           sigma_z * sigma_z);
  }

  double eval(const Eigen::Vector3d& dx) const {
    const double sx = dx.x() / sigma_xy;
    const double sy = dx.y() / sigma_xy;
    const double sz = dx.z() / sigma_z;
    if (cutoff_sigmas) {
      const double c = *cutoff_sigmas;
      if (std::abs(sx) > c || std::abs(sy) > c || std::abs(sz) > c) return 0.0;
    }
    return normConst() * std::exp(-0.5 * (sx * sx + sy * sy + sz * sz));
  }
};

}  // namespace kymo
