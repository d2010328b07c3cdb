#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "kymo/geometry.hpp"
#include "kymo/imaging.hpp"
#include "kymo/photometry.hpp"
#include "kymo/psf.hpp"

namespace kymo {

// Per-frame linear forward map H = Psi diag(w_bar) B^T from digital
// intensities to expected photon counts; w_bar folds the pixel area,
// acquisition time, metric and quadrature weight of every virtual source.
struct SystemMatrices {
  Eigen::MatrixXd H;  // n_pixels x n_bases, nonnegative
  int frame_index = 0;
};

SystemMatrices assembleSystem(const Curve& curve, const BasisSpec& basis,
                              const VirtualSources& sources, const PsfModel& psf,
                              const ImagingConfig& imaging);

// lambda_bar = bg_integrated * 1 + H phi; requires bg_integrated > 0 so the
// Poisson log-likelihood stays finite.
Eigen::VectorXd expectedCounts(const SystemMatrices& system, const PhotometryVector& phi,
                               double bg_integrated);

PhotonStack samplePoisson(const Eigen::VectorXd& rates, const ImagingConfig& imaging,
                          int frame_index, std::uint64_t seed);

GreyStack photonsToGrey(const CameraModel& camera, const PhotonStack& photons);
PhotonStack greyToPhotons(const CameraModel& camera, const GreyStack& greys);

// Photon flux density of the curvilinear object at a point, approximated by
// the virtual sources: sum_v w_v density(l_v) psf(x - gamma(l_v)).
double curveFluxAt(const Eigen::Vector3d& x, const VirtualSources& sources,
                   const std::function<double(double)>& density, const PsfModel& psf);

// Acquisition time realising a requested peak signal-to-noise ratio:
// t_A = (bg_rate + mean_k flux_k) / (|p| * max_k flux_k^2) * 10^(psnr/10).
double psnrAcquisitionTime(double psnr_db, const std::function<double(double)>& density,
                           const VirtualSources& sources, const PsfModel& psf,
                           const ImagingConfig& imaging, double bg_rate);

double psnrAcquisitionTime(double psnr_db, const PhotometryVector& phi, const BasisSpec& basis,
                           const VirtualSources& sources, const PsfModel& psf,
                           const ImagingConfig& imaging, double bg_rate);

}  // namespace kymo
