#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kymo/geometry.hpp"
#include "kymo/imaging.hpp"
#include "kymo/photometry.hpp"
#include "kymo/system.hpp"

namespace kymo {

enum class KymographKind { Nn, Map, Ml, Truth };

std::string kymographKindName(KymographKind kind);
KymographKind kymographKindFromName(const std::string& name);

struct KymographRow {
  int frame = 0;
  double time_s = 0.0;
  double arc_length_um = 0.0;
  double intensity = 0.0;
  bool clamped = false;  // NN sample fell outside the imaging volume
};

// Arc length must be strictly increasing within each frame. NN rows hold raw
// grey values; the other kinds are on the intensity scale and nonnegative.
struct Kymograph {
  KymographKind kind = KymographKind::Truth;
  std::vector<KymographRow> rows;
};

// Samples the grey value of the nearest pixel centre along the embedded
// curve, at uniform arc-length spacing. Ties pick the lowest linear pixel
// index; out-of-volume samples clamp to the boundary and are flagged.
Kymograph nnKymograph(const std::vector<GreyStack>& greys, const std::vector<Curve>& curves,
                      double sample_spacing, const ImagingConfig& imaging);

enum class PhotometryModel { Pm1, Pm2 };

struct MlFitResult {
  Eigen::VectorXd params;  // pm1: (mu, sigma, a, b, c, d); pm2: (phi1..3, a..d)
  double nll = 0.0;
  int evaluations = 0;
};

// Maximum-likelihood fit of a parametric photometry model through the full
// forward map, by CMA-ES within box bounds. pm2 breakpoints are kept ordered
// by repair. The reported NLL never exceeds the initial guess's.
MlFitResult parametricMlFit(PhotometryModel model, const Eigen::VectorXd& counts,
                            const Curve& curve, const BasisSpec& basis, const PsfModel& psf,
                            const ImagingConfig& imaging, double bg_integrated,
                            const Eigen::VectorXd& initial, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, int budget, std::uint64_t seed);

// Photometry vector induced by fitted parameters, sampled at the basis knots.
PhotometryVector modelPhotometry(PhotometryModel model, const Eigen::VectorXd& params,
                                 const BasisSpec& basis, double curve_length, int frame = 0);

// Exponential photobleaching fit to per-stack mean photon rates: converts
// grey values to photons, divides by |p| t_A, then least-squares fits
// rate(t) = amplitude exp(-decay t) + offset. Falls back to the best
// constant fit when the decay model cannot beat it.
BackgroundModel fitBackground(const std::vector<GreyStack>& stacks, const CameraModel& camera,
                              const ImagingConfig& imaging, int budget = 4000,
                              std::uint64_t seed = 0);

}  // namespace kymo
