#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "kymo/imaging.hpp"
#include "kymo/psf.hpp"

namespace kymo {

// Point-source deconvolution system on a single imaging plane: each column
// of M holds the integrated/sampled PSF at one source location.
struct PointSourceSystem {
  Eigen::MatrixXd M;  // n_pixels x n_sources
  std::vector<Eigen::Vector3d> locations;
};

// Single-plane grid for the conditioning experiments; sources live on the
// plane of the (only) slice.
ImagingConfig singlePlaneGrid(int n_rows, int n_cols, double pixel_size,
                              double acquisition_time);

PointSourceSystem assemblePointSourceMatrix(const std::vector<Eigen::Vector3d>& locations,
                                            const PsfModel& psf, const ImagingConfig& grid);

// Reciprocal condition number sigma_min / sigma_max; 0 for rank-deficient
// (or all-zero) matrices.
double rcn(const Eigen::MatrixXd& m);

// Centre source plus n_neighbours sources on a circle at the roots of unity,
// radius given in pixels.
std::vector<Eigen::Vector3d> rootsOfUnitySources(int n_neighbours, double radius_px,
                                                 const Eigen::Vector2d& centre_um,
                                                 const ImagingConfig& grid);

struct RcnSweepRow {
  double radius_px = 0.0;
  int n_sources = 0;
  double rcn = 0.0;
};

std::vector<RcnSweepRow> runRcnSweep(const std::vector<double>& radii_px,
                                     const std::vector<int>& source_counts, const PsfModel& psf,
                                     const ImagingConfig& grid);

// Positivity-constrained maximum-likelihood intensities for Poisson counts
// with rates mu_bg + M phi, by projected gradient with backtracking.
Eigen::VectorXd mlPointSourceIntensities(const Eigen::MatrixXd& M, const Eigen::VectorXd& counts,
                                         double mu_bg, int max_iters = 4000,
                                         double tol = 1e-12);

struct ErrorSweepRow {
  double radius_px = 0.0;
  int n_sources = 0;
  double median_l2_error = 0.0;
};

// The super-resolution error protocol: per design cell, simulate Poisson
// data with every source at intensity phi_true over background mu_bg,
// estimate intensities by constrained ML, and report the median normalised
// l2 error across repeats. Deterministic: each cell derives its RNG stream
// from seed xor cell index.
std::vector<ErrorSweepRow> runErrorSweep(const std::vector<double>& radii_px,
                                         const std::vector<int>& source_counts, int repeats,
                                         const PsfModel& psf, const ImagingConfig& grid,
                                         double mu_bg, double phi_true, std::uint64_t seed);

struct SelectionMatrix {
  Eigen::MatrixXd S;  // n_pixels x n_samples, binary with one 1 per column
  bool has_duplicate_columns = false;
};

// Binary assignment of sample points to their nearest pixel centre; flags
// when two samples share a pixel (the matrix then has duplicated columns).
SelectionMatrix nnSelectionMatrix(const std::vector<Eigen::Vector3d>& sample_points,
                                  const ImagingConfig& grid);

}  // namespace kymo
