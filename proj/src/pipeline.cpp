#include "kymo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "kymo/conditioning.hpp"

namespace kymo {

void parallelFor(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int threads = static_cast<int>(std::min<unsigned>(std::thread::hardware_concurrency(), 8));
  if (const char* env = std::getenv("KYMO_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) threads = cap;
  }
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

SimulationResult simulate(const ExperimentConfig& config, const std::vector<Curve>& curves,
                          const std::function<double(double)>& density,
                          std::optional<double> psnr_db, double truth_spacing) {
  config.validate();
  if (curves.empty()) throw std::invalid_argument("simulate: no geometry");

  // Simulation quadrature is independent of any reconstruction basis.
  const double sim_bin = 0.02;
  const int sim_points = 10;

  ImagingConfig imaging = config.imaging;
  if (psnr_db) {
    const VirtualSources sources = buildVirtualSources(curves.front(), sim_bin, sim_points);
    double bg_rate;
    if (std::holds_alternative<double>(config.background))
      bg_rate = std::get<double>(config.background);
    else
      bg_rate = std::get<BackgroundModel>(config.background).rateAt(0.0);
    imaging.acquisition_time =
        psnrAcquisitionTime(*psnr_db, density, sources, config.psf, imaging, bg_rate);
  }

  SimulationResult result;
  result.acquisition_time = imaging.acquisition_time;
  result.greys.resize(curves.size());
  result.photons.resize(curves.size());
  result.truth.kind = KymographKind::Truth;

  const int n_p = imaging.nPixels();
  parallelFor(static_cast<int>(curves.size()), [&](int f) {
    const Curve& curve = curves[static_cast<std::size_t>(f)];
    const VirtualSources sources = buildVirtualSources(curve, sim_bin, sim_points);
    const double t = curve.frameIndex() * imaging.acquisition_time;
    const double bg = backgroundIntegratedAt(config.background, t, imaging);
    const double integration = imaging.pixelArea() * imaging.acquisition_time;

    Eigen::VectorXd rates(n_p);
    for (int k = 0; k < n_p; ++k)
      rates[k] = bg + integration * curveFluxAt(imaging.pixelCentre(k), sources, density,
                                                config.psf);

    const PhotonStack photons =
        samplePoisson(rates, imaging, curve.frameIndex(),
                      config.seed ^ (0x9e3779b97f4a7c15ULL * (f + 1)));
    result.photons[static_cast<std::size_t>(f)] = photons;
    result.greys[static_cast<std::size_t>(f)] = photonsToGrey(config.camera, photons);
  });

  for (const Curve& curve : curves) {
    const double t = curve.frameIndex() * imaging.acquisition_time;
    const int n_bins = binCount(curve.paramLength(), truth_spacing);
    for (int p = 0; p < n_bins; ++p) {
      const double l = std::min((p + 0.5) * truth_spacing, curve.paramLength());
      result.truth.rows.push_back(
          {curve.frameIndex(), t, l, std::max(density(l), 0.0), false});
    }
  }
  return result;
}

ReconstructionResult reconstruct(const ExperimentConfig& config,
                                 const std::vector<Curve>& curves,
                                 const std::vector<GreyStack>& greys, double bin_size,
                                 int quad_points) {
  config.validate();
  if (curves.size() != greys.size())
    throw std::invalid_argument("reconstruct: one curve per stack required");

  const int n_frames = static_cast<int>(curves.size());
  ReconstructionResult result;
  result.phis.resize(curves.size());
  result.bases.resize(curves.size());
  result.diagnostics.resize(curves.size());
  result.kymo.kind = KymographKind::Map;

  std::vector<char> converged(curves.size(), 1);
  parallelFor(n_frames, [&](int f) {
    const Curve& curve = curves[static_cast<std::size_t>(f)];
    const BasisSpec basis = BasisSpec::forCurve(curve, bin_size);
    const VirtualSources sources = buildVirtualSources(curve, bin_size, quad_points);
    const SystemMatrices system = assembleSystem(curve, basis, sources, config.psf,
                                                 config.imaging);
    const double t = curve.frameIndex() * config.imaging.acquisition_time;
    const double bg = backgroundIntegratedAt(config.background, t, config.imaging);

    const PhotonStack photons = greyToPhotons(config.camera, greys[static_cast<std::size_t>(f)]);
    Eigen::VectorXd counts(photons.data.size());
    for (std::size_t k = 0; k < photons.data.size(); ++k)
      counts[static_cast<Eigen::Index>(k)] = photons.data[k];

    MapResult map = runMap(counts, system, bg, whiteningMatrix(basis.n_bases), config.solver);
    converged[static_cast<std::size_t>(f)] = map.diagnostics.converged ? 1 : 0;
    result.phis[static_cast<std::size_t>(f)] = std::move(map.phi);
    result.bases[static_cast<std::size_t>(f)] = basis;
    result.diagnostics[static_cast<std::size_t>(f)] = std::move(map.diagnostics);
  });

  for (std::size_t f = 0; f < curves.size(); ++f) {
    const Curve& curve = curves[f];
    const BasisSpec& basis = result.bases[f];
    const double t = curve.frameIndex() * config.imaging.acquisition_time;
    for (int p = 0; p < basis.n_bases; ++p) {
      const double l =
          0.5 * (p * basis.bin_size + std::min((p + 1) * basis.bin_size, curve.paramLength()));
      result.kymo.rows.push_back(
          {curve.frameIndex(), t, l, result.phis[f].values[p], false});
    }
    if (!converged[f]) result.all_converged = false;
  }
  return result;
}

double l1ErrorOnTruthGrid(const Kymograph& truth,
                          const std::function<double(int frame, double l)>& candidate) {
  if (truth.rows.empty()) throw std::invalid_argument("l1ErrorOnTruthGrid: empty truth");
  double total = 0.0;
  for (const auto& row : truth.rows)
    total += std::abs(candidate(row.frame, row.arc_length_um) - row.intensity);
  return total / static_cast<double>(truth.rows.size());
}

namespace {

// Frame-indexed map into a kymograph's rows for nearest-sample lookup.
struct FrameLookup {
  std::vector<int> frames;
  std::vector<std::vector<const KymographRow*>> rows;

  explicit FrameLookup(const Kymograph& kymo) {
    for (const auto& row : kymo.rows) {
      if (frames.empty() || frames.back() != row.frame) {
        frames.push_back(row.frame);
        rows.emplace_back();
      }
      rows.back().push_back(&row);
    }
  }

  double nearest(int frame, double l) const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i] != frame) continue;
      const auto& frame_rows = rows[i];
      const KymographRow* best = frame_rows.front();
      double best_d = std::abs(best->arc_length_um - l);
      for (const KymographRow* row : frame_rows) {
        const double d = std::abs(row->arc_length_um - l);
        if (d < best_d) {
          best_d = d;
          best = row;
        }
      }
      return best->intensity;
    }
    throw std::invalid_argument("kymograph lookup: missing frame " + std::to_string(frame));
  }
};

}  // namespace

double l1Error(const Kymograph& truth, const ReconstructionResult& recon) {
  return l1ErrorOnTruthGrid(truth, [&](int frame, double l) {
    for (std::size_t f = 0; f < recon.phis.size(); ++f) {
      if (recon.phis[f].frame_index != frame) continue;
      const double domain = recon.bases[f].domainLength();
      return evalSignal(recon.phis[f], recon.bases[f], std::min(l, domain));
    }
    throw std::invalid_argument("l1Error: reconstruction missing frame " + std::to_string(frame));
  });
}

double calibratedNnError(const Kymograph& truth, const Kymograph& nn) {
  const FrameLookup lookup(nn);
  // Least squares for truth ~ a * nn + b on the truth grid.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(truth.rows.size());
  for (const auto& row : truth.rows) {
    const double x = lookup.nearest(row.frame, row.arc_length_um);
    sx += x;
    sy += row.intensity;
    sxx += x * x;
    sxy += x * row.intensity;
  }
  const double denom = n * sxx - sx * sx;
  double a = 0.0, b = sy / n;
  if (std::abs(denom) > 1e-12 * std::max(1.0, n * sxx)) {
    a = (n * sxy - sx * sy) / denom;
    b = (sy - a * sx) / n;
  }
  return l1ErrorOnTruthGrid(
      truth, [&](int frame, double l) { return a * lookup.nearest(frame, l) + b; });
}

std::vector<LambdaSweepRow> lambdaSweep(const ExperimentConfig& config,
                                        const std::vector<Curve>& curves,
                                        const std::vector<GreyStack>& greys,
                                        const Kymograph& truth,
                                        const std::vector<double>& lambdas, double bin_size) {
  if (lambdas.empty()) throw std::invalid_argument("lambdaSweep: empty grid");
  std::vector<LambdaSweepRow> rows(lambdas.size());
  parallelFor(static_cast<int>(lambdas.size()), [&](int i) {
    ExperimentConfig local = config;
    local.solver.prior.lambda = lambdas[static_cast<std::size_t>(i)];
    const ReconstructionResult recon = reconstruct(local, curves, greys, bin_size);
    rows[static_cast<std::size_t>(i)] = {lambdas[static_cast<std::size_t>(i)],
                                         l1Error(truth, recon)};
  });
  return rows;
}

std::vector<BinSweepRow> binSweep(const ExperimentConfig& config, const Curve& curve,
                                  const std::vector<double>& bin_sizes, int quad_points) {
  if (bin_sizes.empty()) throw std::invalid_argument("binSweep: empty grid");
  std::vector<BinSweepRow> rows(bin_sizes.size());
  parallelFor(static_cast<int>(bin_sizes.size()), [&](int i) {
    const double bin = bin_sizes[static_cast<std::size_t>(i)];
    const BasisSpec basis = BasisSpec::forCurve(curve, bin);
    const VirtualSources sources = buildVirtualSources(curve, bin, quad_points);
    const SystemMatrices system =
        assembleSystem(curve, basis, sources, config.psf, config.imaging);
    const Eigen::MatrixXd hth = system.H.transpose() * system.H;
    const Eigen::MatrixXd L = whiteningMatrix(basis.n_bases).dense();
    const Eigen::MatrixXd normal =
        hth + L.transpose() * L + Eigen::MatrixXd::Identity(basis.n_bases, basis.n_bases);
    rows[static_cast<std::size_t>(i)] = {bin, rcn(hth), rcn(normal)};
  });
  return rows;
}

std::vector<PsnrSweepRow> psnrSweep(const ExperimentConfig& config,
                                    const std::vector<Curve>& curves,
                                    const std::function<double(double)>& density,
                                    const std::vector<double>& psnrs, double bin_size) {
  if (psnrs.empty()) throw std::invalid_argument("psnrSweep: empty grid");
  std::vector<PsnrSweepRow> rows(psnrs.size());
  for (std::size_t i = 0; i < psnrs.size(); ++i) {
    const SimulationResult sim = simulate(config, curves, density, psnrs[i]);
    ExperimentConfig local = config;
    local.imaging.acquisition_time = sim.acquisition_time;
    const ReconstructionResult recon = reconstruct(local, curves, sim.greys, bin_size);
    rows[i] = {psnrs[i], sim.acquisition_time, l1Error(sim.truth, recon)};
  }
  return rows;
}

}  // namespace kymo
