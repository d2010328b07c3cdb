#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "kymo/io.hpp"
#include "kymo/solver.hpp"

namespace kymo {

// Runs fn(i) for i in [0, n) on a small worker pool. Thread count comes from
// KYMO_THREADS (default: hardware concurrency, at most 8). Results must be
// written to per-index slots by the caller.
void parallelFor(int n, const std::function<void(int)>& fn);

struct SimulationResult {
  std::vector<GreyStack> greys;
  std::vector<PhotonStack> photons;
  Kymograph truth;
  double acquisition_time = 0.0;  // as used, possibly PSNR-derived
};

// Virtual microscope: photon flux from the continuous density at fine
// quadrature sources (independent of any reconstruction basis), Poisson
// sampling seeded per frame, then the camera map. The truth kymograph
// samples the density at truth_spacing bin centres.
SimulationResult simulate(const ExperimentConfig& config, const std::vector<Curve>& curves,
                          const std::function<double(double)>& density,
                          std::optional<double> psnr_db = std::nullopt,
                          double truth_spacing = 0.02);

struct ReconstructionResult {
  Kymograph kymo;
  std::vector<PhotometryVector> phis;
  std::vector<BasisSpec> bases;
  std::vector<SolverDiagnostics> diagnostics;
  bool all_converged = true;
};

ReconstructionResult reconstruct(const ExperimentConfig& config,
                                 const std::vector<Curve>& curves,
                                 const std::vector<GreyStack>& greys, double bin_size,
                                 int quad_points = 10);

// Mean absolute difference against the truth rows, evaluating the candidate
// at the truth bin centres.
double l1ErrorOnTruthGrid(const Kymograph& truth,
                          const std::function<double(int frame, double l)>& candidate);

double l1Error(const Kymograph& truth, const ReconstructionResult& recon);

// Least-squares affine calibration of NN grey values onto the intensity
// scale of the truth, then the l1 error of the calibrated signal. NN values
// are looked up by nearest sample within the frame.
double calibratedNnError(const Kymograph& truth, const Kymograph& nn);

struct LambdaSweepRow {
  double lambda = 0.0;
  double l1_error = 0.0;
};

std::vector<LambdaSweepRow> lambdaSweep(const ExperimentConfig& config,
                                        const std::vector<Curve>& curves,
                                        const std::vector<GreyStack>& greys,
                                        const Kymograph& truth,
                                        const std::vector<double>& lambdas, double bin_size);

struct BinSweepRow {
  double bin_size = 0.0;
  double rcn_hth = 0.0;     // RCN of H^T H
  double rcn_normal = 0.0;  // RCN of H^T H + L^T L + I
};

std::vector<BinSweepRow> binSweep(const ExperimentConfig& config, const Curve& curve,
                                  const std::vector<double>& bin_sizes, int quad_points = 10);

struct PsnrSweepRow {
  double psnr_db = 0.0;
  double acquisition_time = 0.0;
  double l1_error = 0.0;
};

std::vector<PsnrSweepRow> psnrSweep(const ExperimentConfig& config,
                                    const std::vector<Curve>& curves,
                                    const std::function<double(double)>& density,
                                    const std::vector<double>& psnrs, double bin_size);

}  // namespace kymo
