#include "kymo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kymo/cmaes.hpp"
#include "kymo/solver.hpp"

namespace kymo {

std::string kymographKindName(KymographKind kind) {
  switch (kind) {
    case KymographKind::Nn: return "nn";
    case KymographKind::Map: return "map";
    case KymographKind::Ml: return "ml";
    case KymographKind::Truth: return "truth";
  }
  return "truth";
}

KymographKind kymographKindFromName(const std::string& name) {
  if (name == "nn") return KymographKind::Nn;
  if (name == "map") return KymographKind::Map;
  if (name == "ml") return KymographKind::Ml;
  if (name == "truth") return KymographKind::Truth;
  throw std::invalid_argument("unknown kymograph kind: " + name);
}

namespace {

// Nearest grid index along one axis with centres at (i+1/2)*step; on an
// exact tie the lower index wins, which makes the lowest linear pixel index
// win overall. Returns whether clamping to the valid range was needed.
int nearestAxisIndex(double coord, double step, int count, bool& clamped) {
  const int raw = static_cast<int>(std::ceil(coord / step)) - 1;
  if (raw < 0) {
    clamped = true;
    return 0;
  }
  if (raw >= count) {
    clamped = true;
    return count - 1;
  }
  return raw;
}

}  // namespace

Kymograph nnKymograph(const std::vector<GreyStack>& greys, const std::vector<Curve>& curves,
                      double sample_spacing, const ImagingConfig& imaging) {
  if (greys.size() != curves.size())
    throw std::invalid_argument("nnKymograph: one curve per stack required");
  if (!(sample_spacing > 0))
    throw std::invalid_argument("nnKymograph: sample spacing must be > 0");

  Kymograph kymo;
  kymo.kind = KymographKind::Nn;
  for (std::size_t f = 0; f < greys.size(); ++f) {
    const Curve& curve = curves[f];
    const GreyStack& stack = greys[f];
    if (stack.n_slices != imaging.n_slices || stack.n_rows != imaging.n_rows ||
        stack.n_cols != imaging.n_cols)
      throw std::invalid_argument("nnKymograph: stack shape does not match imaging config");

    const double time = curve.frameIndex() * imaging.acquisition_time;
    const int n_samples = binCount(curve.paramLength(), sample_spacing);
    for (int j = 0; j < n_samples; ++j) {
      const double l = std::min((j + 0.5) * sample_spacing, curve.paramLength());
      const Eigen::Vector3d y = curve.embed(l);
      bool clamped = false;
      const int col = nearestAxisIndex(y.x(), imaging.pixel_size, imaging.n_cols, clamped);
      const int row = nearestAxisIndex(y.y(), imaging.pixel_size, imaging.n_rows, clamped);
      const int slice = nearestAxisIndex(y.z(), imaging.z_spacing, imaging.n_slices, clamped);
      KymographRow out;
      out.frame = curve.frameIndex();
      out.time_s = time;
      out.arc_length_um = l;
      out.intensity = static_cast<double>(stack.data[imaging.linearIndex(slice, row, col)]);
      out.clamped = clamped;
      kymo.rows.push_back(out);
    }
  }
  return kymo;
}

PhotometryVector modelPhotometry(PhotometryModel model, const Eigen::VectorXd& params,
                                 const BasisSpec& basis, double curve_length, int frame) {
  PhotometryVector phi;
  phi.frame_index = frame;
  phi.values.resize(basis.n_bases);
  for (int p = 0; p < basis.n_bases; ++p) {
    const double l = std::min(p * basis.bin_size, curve_length);  // digital intensities sample the knots
    if (model == PhotometryModel::Pm1) {
      CometParams c{params[0], params[1], params[2], params[3], params[4], params[5]};
      phi.values[p] = cometDensity(c, l);
    } else {
      IslandParams i{params[0], params[1], params[2], params[3], params[4], params[5], params[6]};
      phi.values[p] = islandDensity(i, l, curve_length);
    }
  }
  return phi;
}

MlFitResult parametricMlFit(PhotometryModel model, const Eigen::VectorXd& counts,
                            const Curve& curve, const BasisSpec& basis, const PsfModel& psf,
                            const ImagingConfig& imaging, double bg_integrated,
                            const Eigen::VectorXd& initial, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, int budget, std::uint64_t seed) {
  const int dim = model == PhotometryModel::Pm1 ? 6 : 7;
  if (initial.size() != dim || lower.size() != dim || upper.size() != dim)
    throw std::invalid_argument("parametricMlFit: parameter dimension mismatch");
  if ((lower.array() > upper.array()).any() || (lower.array() < 0).any())
    throw std::invalid_argument("parametricMlFit: bounds must be nonnegative and ordered");

  const VirtualSources sources = buildVirtualSources(curve, basis.bin_size, 10);
  const SystemMatrices system = assembleSystem(curve, basis, sources, psf, imaging);
  const double length = curve.paramLength();

  std::function<void(Eigen::VectorXd&)> repair = nullptr;
  if (model == PhotometryModel::Pm2) {
    repair = [length](Eigen::VectorXd& x) {
      std::sort(x.data() + 3, x.data() + 7);  // keep breakpoints ordered
      for (int i = 3; i < 7; ++i) x[i] = std::min(x[i], length);
    };
  }

  const auto objective = [&](const Eigen::VectorXd& params) {
    const PhotometryVector phi = modelPhotometry(model, params, basis, length);
    return negLogLikelihood(phi, counts, system, bg_integrated);
  };

  CmaOptions options;
  options.max_evals = budget;
  options.seed = seed;
  const double sigma0 = 0.15 * (upper - lower).maxCoeff();
  const CmaResult cma = cmaesMinimize(objective, initial, sigma0, lower, upper, options, repair);

  MlFitResult result;
  result.params = cma.best_x;
  result.nll = cma.best_f;
  result.evaluations = cma.evaluations;
  return result;
}

BackgroundModel fitBackground(const std::vector<GreyStack>& stacks, const CameraModel& camera,
                              const ImagingConfig& imaging, int budget, std::uint64_t seed) {
  if (stacks.size() < 3)
    throw std::invalid_argument("fitBackground: need at least 3 frames");

  const double integration = imaging.pixelArea() * imaging.acquisition_time;
  Eigen::VectorXd rates(stacks.size());
  Eigen::VectorXd times(stacks.size());
  for (std::size_t f = 0; f < stacks.size(); ++f) {
    const PhotonStack photons = greyToPhotons(camera, stacks[f]);
    double mean = 0.0;
    for (float v : photons.data) mean += v;
    mean /= static_cast<double>(photons.data.size());
    rates[f] = mean / integration;
    times[f] = stacks[f].frame_index * imaging.acquisition_time;
  }

  const double mean_rate = rates.mean();
  const double constant_residual = (rates.array() - mean_rate).matrix().squaredNorm();

  const auto residual = [&](const Eigen::VectorXd& p) {
    double r = 0.0;
    for (Eigen::Index f = 0; f < rates.size(); ++f) {
      const double fit = p[0] * std::exp(-p[1] * times[f]) + p[2];
      r += (rates[f] - fit) * (rates[f] - fit);
    }
    return r;
  };

  const double span = std::max(rates.maxCoeff() - rates.minCoeff(), 1e-12);
  const double t_span = std::max(times[times.size() - 1] - times[0], 1e-12);
  Eigen::VectorXd initial(3), lower(3), upper(3);
  initial << std::max(rates[0] - rates[rates.size() - 1], 0.25 * span), 1.0 / t_span,
      std::max(rates.minCoeff(), 0.0);
  lower << 0.0, 0.0, 0.0;
  upper << 10.0 * std::max(rates.maxCoeff(), 1e-12), 100.0 / t_span,
      2.0 * std::max(rates.maxCoeff(), 1e-12);

  CmaOptions options;
  options.max_evals = budget;
  options.seed = seed;
  const CmaResult cma =
      cmaesMinimize(residual, initial, 0.3 * span + 1e-12, lower, upper, options);

  BackgroundModel model;
  if (cma.best_f <= constant_residual) {
    model.amplitude = cma.best_x[0];
    model.decay_rate = cma.best_x[1];
    model.offset = cma.best_x[2];
  } else {
    model.amplitude = 0.0;
    model.decay_rate = 0.0;
    model.offset = mean_rate;
  }
  model.validate();
  return model;
}

}  // namespace kymo
