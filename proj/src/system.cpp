#include "kymo/system.hpp"

#include <cfenv>
#include <cmath>
#include <random>
#include <stdexcept>

namespace kymo {

SystemMatrices assembleSystem(const Curve& curve, const BasisSpec& basis,
                              const VirtualSources& sources, const PsfModel& psf,
                              const ImagingConfig& imaging) {
  psf.validate();
  imaging.validate();
  if (sources.n_bins != basis.n_bases)
    throw std::invalid_argument("assembleSystem: sources were not built for this basis");
  if (sources.positions.empty())
    throw std::invalid_argument("assembleSystem: no virtual sources");

  const int n_p = imaging.nPixels();
  const double integration = imaging.pixelArea() * imaging.acquisition_time;

  SystemMatrices sys;
  sys.frame_index = curve.frameIndex();
  sys.H = Eigen::MatrixXd::Zero(n_p, basis.n_bases);

  for (std::size_t v = 0; v < sources.positions.size(); ++v) {
    const Eigen::Vector3d& y = sources.points[v];
    const double w_bar = integration * sources.weights[v];
    const int bin = sources.bin_index[v];

    // With a truncated PSF only the pixel box around the source contributes.
    int s0 = 0, s1 = imaging.n_slices, r0 = 0, r1 = imaging.n_rows, c0 = 0, c1 = imaging.n_cols;
    if (psf.cutoff_sigmas) {
      const double rxy = *psf.cutoff_sigmas * psf.sigma_xy;
      const double rz = *psf.cutoff_sigmas * psf.sigma_z;
      c0 = std::max(0, static_cast<int>(std::floor((y.x() - rxy) / imaging.pixel_size - 0.5)));
      c1 = std::min(imaging.n_cols,
                    static_cast<int>(std::ceil((y.x() + rxy) / imaging.pixel_size + 0.5)));
      r0 = std::max(0, static_cast<int>(std::floor((y.y() - rxy) / imaging.pixel_size - 0.5)));
      r1 = std::min(imaging.n_rows,
                    static_cast<int>(std::ceil((y.y() + rxy) / imaging.pixel_size + 0.5)));
      s0 = std::max(0, static_cast<int>(std::floor((y.z() - rz) / imaging.z_spacing - 0.5)));
      s1 = std::min(imaging.n_slices,
                    static_cast<int>(std::ceil((y.z() + rz) / imaging.z_spacing + 0.5)));
    }

    for (int s = s0; s < s1; ++s)
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
          const double value = psf.eval(imaging.pixelCentre(s, r, c) - y);
          if (value != 0.0) sys.H(imaging.linearIndex(s, r, c), bin) += w_bar * value;
        }
  }
  return sys;
}

Eigen::VectorXd expectedCounts(const SystemMatrices& system, const PhotometryVector& phi,
                               double bg_integrated) {
  if (!(bg_integrated > 0))
    throw std::invalid_argument("expectedCounts: integrated background must be > 0");
  if (phi.values.size() != system.H.cols())
    throw std::invalid_argument("expectedCounts: photometry length does not match system");
  return (system.H * phi.values).array() + bg_integrated;
}

PhotonStack samplePoisson(const Eigen::VectorXd& rates, const ImagingConfig& imaging,
                          int frame_index, std::uint64_t seed) {
  if (rates.size() != imaging.nPixels())
    throw std::invalid_argument("samplePoisson: rate vector does not match the grid");
  if ((rates.array() <= 0.0).any())
    throw std::invalid_argument("samplePoisson: all rates must be > 0");

  PhotonStack stack = PhotonStack::zeros(imaging, frame_index);
  std::mt19937_64 rng(seed);
  std::poisson_distribution<long> poisson;
  for (Eigen::Index k = 0; k < rates.size(); ++k) {
    poisson.param(std::poisson_distribution<long>::param_type(rates[k]));
    stack.data[static_cast<std::size_t>(k)] = static_cast<float>(poisson(rng));
  }
  return stack;
}

GreyStack photonsToGrey(const CameraModel& camera, const PhotonStack& photons) {
  camera.validate();
  GreyStack grey;
  grey.n_slices = photons.n_slices;
  grey.n_rows = photons.n_rows;
  grey.n_cols = photons.n_cols;
  grey.frame_index = photons.frame_index;
  grey.data.resize(photons.data.size());
  const double slope = camera.quantum_efficiency * camera.gain / camera.adu_factor;
  for (std::size_t k = 0; k < photons.data.size(); ++k) {
    // Nearest integer, ties to even; clamp to the 16-bit range (saturation).
    const double g = std::nearbyint(slope * photons.data[k] + camera.bias);
    grey.data[k] = static_cast<std::uint16_t>(std::min(std::max(g, 0.0), 65535.0));
  }
  return grey;
}

PhotonStack greyToPhotons(const CameraModel& camera, const GreyStack& greys) {
  camera.validate();
  PhotonStack photons;
  photons.n_slices = greys.n_slices;
  photons.n_rows = greys.n_rows;
  photons.n_cols = greys.n_cols;
  photons.frame_index = greys.frame_index;
  photons.data.resize(greys.data.size());
  const double scale = camera.photonsPerGrey();
  for (std::size_t k = 0; k < greys.data.size(); ++k) {
    const double n = (static_cast<double>(greys.data[k]) - camera.bias) * scale;
    photons.data[k] = static_cast<float>(std::max(n, 0.0));  // bias undershoot clamps to zero
  }
  return photons;
}

double curveFluxAt(const Eigen::Vector3d& x, const VirtualSources& sources,
                   const std::function<double(double)>& density, const PsfModel& psf) {
  double flux = 0.0;
  for (std::size_t v = 0; v < sources.positions.size(); ++v)
    flux += sources.weights[v] * density(sources.positions[v]) * psf.eval(x - sources.points[v]);
  return flux;
}

double psnrAcquisitionTime(double psnr_db, const std::function<double(double)>& density,
                           const VirtualSources& sources, const PsfModel& psf,
                           const ImagingConfig& imaging, double bg_rate) {
  imaging.validate();
  const int n_p = imaging.nPixels();
  double max_flux = 0.0, sum_flux = 0.0;
  for (int k = 0; k < n_p; ++k) {
    const double f = curveFluxAt(imaging.pixelCentre(k), sources, density, psf);
    sum_flux += f;
    max_flux = std::max(max_flux, f);
  }
  if (!(max_flux > 0.0))
    throw std::invalid_argument("psnrAcquisitionTime: curve flux is identically zero");
  const double prefactor =
      (bg_rate + sum_flux / n_p) / (imaging.pixelArea() * max_flux * max_flux);
  return prefactor * std::pow(10.0, 0.1 * psnr_db);
}

double psnrAcquisitionTime(double psnr_db, const PhotometryVector& phi, const BasisSpec& basis,
                           const VirtualSources& sources, const PsfModel& psf,
                           const ImagingConfig& imaging, double bg_rate) {
  return psnrAcquisitionTime(
      psnr_db, [&](double l) { return evalSignal(phi, basis, l); }, sources, psf, imaging,
      bg_rate);
}

}  // namespace kymo
