// Command-line front end for the virtual microscope and the kymograph
// reconstruction pipeline. One process, file in / file out; every
// subcommand writes a manifest with the resolved config, seed and input
// hashes so runs can be reproduced bit for bit.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "kymo/cmaes.hpp"
#include "kymo/conditioning.hpp"
#include "kymo/pipeline.hpp"

using namespace kymo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string fileBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomicWriteText(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;  // <0: keep config seed
  double lambda = -1.0;    // <0: keep config lambda
  double gamma = -1.0;     // <0: keep config gamma
  std::string prior;
  double bin_size = 0.04;
};

struct LoadedConfig {
  ExperimentConfig config;
  bool background_in_file = false;
  json raw;
};

LoadedConfig loadConfig(const CommonOptions& opts) {
  LoadedConfig loaded;
  if (!opts.config_path.empty()) {
    const std::string text = fileBytes(opts.config_path);
    loaded.config = configFromJson(text);
    loaded.raw = json::parse(text);
    loaded.background_in_file = loaded.raw.contains("background");
  } else {
    loaded.config = configFromJson("");
  }
  if (opts.seed >= 0) loaded.config.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.lambda > 0) loaded.config.solver.prior.lambda = opts.lambda;
  if (opts.gamma > 0) loaded.config.solver.gamma = opts.gamma;
  if (opts.prior == "laplace") loaded.config.solver.prior.family = PriorFamily::Laplace;
  else if (opts.prior == "gaussian") loaded.config.solver.prior.family = PriorFamily::Gaussian;
  else if (!opts.prior.empty()) throw CLI::ValidationError("--prior must be laplace|gaussian");
  return loaded;
}

void writeManifest(const fs::path& out_dir, const std::string& subcommand,
                   const ExperimentConfig& config,
                   const std::vector<fs::path>& inputs, const json& extra) {
  json manifest;
  manifest["subcommand"] = subcommand;
  manifest["seed"] = config.seed;
  manifest["config"] = json::parse(configToJson(config));
  manifest["config_hash"] = fnv1a(configToJson(config));
  json input_hashes = json::object();
  for (const auto& path : inputs)
    input_hashes[path.filename().string()] = fnv1a(fileBytes(path));
  manifest["inputs"] = input_hashes;
  manifest["extra"] = extra;
  atomicWriteText(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<Curve> loadGeometry(const std::string& path, int frames) {
  if (path.empty()) throw CLI::ValidationError("--geometry is required");
  std::vector<Curve> curves = readGeometryCsv(path);
  if (frames > 0) {
    if (curves.size() == 1 && frames > 1) {
      // Replicate a static geometry across the requested frames.
      std::vector<Curve> replicated;
      for (int f = 0; f < frames; ++f) {
        Curve c = curves.front();
        if (c.kind() == CurveKind::Line)
          replicated.push_back(Curve::line(c.origin(), c.direction(), c.paramLength(), f));
        else
          replicated.push_back(Curve::quadraticSpline(c.controlPoints(), f));
      }
      return replicated;
    }
    if (static_cast<int>(curves.size()) > frames)
      curves.erase(curves.begin() + frames, curves.end());
  }
  return curves;
}

// Continuous photometry density for simulation and sweeps.
std::function<double(double)> resolveDensity(const std::string& model,
                                             const std::string& photometry_path,
                                             double curve_length) {
  if (model == "pm1") {
    CometParams params;
    params.validate();
    return [params](double l) { return cometDensity(params, l); };
  }
  if (model == "pm2") {
    IslandParams params;
    params.validate();
    if (curve_length < params.d)
      throw CLI::ValidationError("pm2 needs a curve at least 4.5 um long");
    return [params, curve_length](double l) { return islandDensity(params, l, curve_length); };
  }
  if (model == "csv") {
    if (photometry_path.empty())
      throw CLI::ValidationError("--photometry is required with --model csv");
    auto [phi, basis] = readPhotometryCsv(photometry_path);
    return [phi = std::move(phi), basis](double l) {
      return evalSignal(phi, basis, std::min(l, basis.domainLength()));
    };
  }
  throw CLI::ValidationError("--model must be pm1|pm2|csv");
}

struct StackSet {
  std::vector<GreyStack> stacks;
  double acquisition_s = 0.0;  // from the headers; overrides the config
};

StackSet loadStacks(const std::string& dir) {
  std::vector<fs::path> headers;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".json" && p.filename().string().rfind("frame_", 0) == 0)
      headers.push_back(p);
  }
  if (headers.empty()) throw std::runtime_error("no frame_*.json stacks in " + dir);
  std::sort(headers.begin(), headers.end());
  StackSet set;
  for (const auto& h : headers) {
    set.stacks.push_back(readGreyStack(h));
    const json header = json::parse(fileBytes(h));
    const double t = header.value("acquisition_s", 0.0);
    if (set.acquisition_s == 0.0) set.acquisition_s = t;
    else if (std::abs(t - set.acquisition_s) > 1e-12)
      throw std::runtime_error("stacks disagree on acquisition_s");
  }
  return set;
}

void saveStackAtomic(const GreyStack& stack, const fs::path& out_dir, const std::string& name,
                     const ImagingConfig& imaging) {
  const fs::path tmp_payload = out_dir / (".tmp_" + name + ".raw");
  writeStack(stack, tmp_payload, imaging);
  fs::rename(tmp_payload, out_dir / (name + ".raw"));
  fs::rename(out_dir / (".tmp_" + name + ".json"), out_dir / (name + ".json"));
}

std::string kymographCsvText(const Kymograph& kymo) {
  std::ostringstream out;
  out.precision(17);
  out << "frame,time_s,arc_length_um,intensity,kind\n";
  const std::string kind = kymographKindName(kymo.kind);
  for (const auto& row : kymo.rows)
    out << row.frame << ',' << row.time_s << ',' << row.arc_length_um << ',' << row.intensity
        << ',' << kind << '\n';
  return out.str();
}

// Background handling shared by reconstruct/nn: fit from the stacks when the
// config file did not pin one (or when forced).
ExperimentConfig resolveBackground(LoadedConfig loaded, bool force_fit,
                                   const std::vector<GreyStack>& stacks) {
  if ((force_fit || !loaded.background_in_file) && stacks.size() >= 3) {
    loaded.config.background =
        fitBackground(stacks, loaded.config.camera, loaded.config.imaging);
    std::cerr << "background fitted from " << stacks.size() << " stacks\n";
  }
  return loaded.config;
}

std::vector<double> parseList(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  return values;
}

std::vector<int> parseIntList(const std::string& csv) {
  std::vector<int> values;
  for (double v : parseList(csv)) values.push_back(static_cast<int>(v));
  return values;
}

int runSimulate(const CommonOptions& common, const std::string& geometry_path,
                const std::string& model, const std::string& photometry_path, int frames,
                double psnr, double truth_spacing) {
  const LoadedConfig loaded = loadConfig(common);
  const std::vector<Curve> curves = loadGeometry(geometry_path, frames);
  const auto density = resolveDensity(model, photometry_path, curves.front().paramLength());

  fs::create_directories(common.out_dir);
  const std::optional<double> psnr_opt =
      psnr > -1e8 ? std::optional<double>(psnr) : std::nullopt;
  const SimulationResult sim = simulate(loaded.config, curves, density, psnr_opt);

  ImagingConfig imaging = loaded.config.imaging;
  imaging.acquisition_time = sim.acquisition_time;
  for (std::size_t f = 0; f < sim.greys.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu", f);
    saveStackAtomic(sim.greys[f], common.out_dir, name, imaging);
  }
  atomicWriteText(fs::path(common.out_dir) / "truth.csv", kymographCsvText(sim.truth));

  json extra = {{"acquisition_s", sim.acquisition_time},
                {"model", model},
                {"n_frames", sim.greys.size()}};
  if (psnr_opt) extra["psnr_db"] = *psnr_opt;
  writeManifest(common.out_dir, "simulate", loaded.config, {geometry_path}, extra);
  std::cout << "simulated " << sim.greys.size() << " frame(s), t_A = " << sim.acquisition_time
            << " s\n";
  return 0;
}

int runReconstruct(const CommonOptions& common, const std::string& geometry_path,
                   const std::string& stacks_dir, bool fit_bg) {
  LoadedConfig loaded = loadConfig(common);
  StackSet set = loadStacks(stacks_dir);
  if (set.acquisition_s > 0) loaded.config.imaging.acquisition_time = set.acquisition_s;
  const std::vector<GreyStack>& stacks = set.stacks;
  const std::vector<Curve> curves =
      loadGeometry(geometry_path, static_cast<int>(stacks.size()));
  if (curves.size() != stacks.size())
    throw std::runtime_error("geometry provides " + std::to_string(curves.size()) +
                             " frames but " + std::to_string(stacks.size()) +
                             " stacks were found");
  const ExperimentConfig config = resolveBackground(loaded, fit_bg, stacks);

  fs::create_directories(common.out_dir);
  const ReconstructionResult recon = reconstruct(config, curves, stacks, common.bin_size);

  atomicWriteText(fs::path(common.out_dir) / "kymo_map.csv", kymographCsvText(recon.kymo));
  writeHeatmapPgm(recon.kymo, fs::path(common.out_dir) / "kymo_map.pgm");
  for (std::size_t f = 0; f < recon.diagnostics.size(); ++f) {
    const SolverDiagnostics& d = recon.diagnostics[f];
    std::ostringstream out;
    out.precision(17);
    out << "iter,objective,nll,prior,constraint_residual,phi_rel_change\n";
    for (std::size_t i = 0; i < d.objective.size(); ++i)
      out << i << ',' << d.objective[i] << ',' << d.nll[i] << ',' << d.prior[i] << ','
          << d.constraint_residual[i] << ',' << d.phi_rel_change[i] << '\n';
    char name[48];
    std::snprintf(name, sizeof name, "diagnostics_frame_%03zu.csv", f);
    atomicWriteText(fs::path(common.out_dir) / name, out.str());
  }

  json extra = {{"bin_size_um", common.bin_size},
                {"all_converged", recon.all_converged},
                {"n_frames", stacks.size()}};
  writeManifest(common.out_dir, "reconstruct", config, {geometry_path}, extra);
  if (!recon.all_converged) {
    std::cerr << "warning: not all frames converged within max_iters\n";
    return 4;
  }
  std::cout << "reconstructed " << stacks.size() << " frame(s) at bin size " << common.bin_size
            << " um\n";
  return 0;
}

int runNn(const CommonOptions& common, const std::string& geometry_path,
          const std::string& stacks_dir, double spacing) {
  LoadedConfig loaded = loadConfig(common);
  StackSet set = loadStacks(stacks_dir);
  if (set.acquisition_s > 0) loaded.config.imaging.acquisition_time = set.acquisition_s;
  const std::vector<GreyStack>& stacks = set.stacks;
  const std::vector<Curve> curves =
      loadGeometry(geometry_path, static_cast<int>(stacks.size()));
  const double step = spacing > 0 ? spacing : loaded.config.imaging.pixel_size;

  fs::create_directories(common.out_dir);
  const Kymograph kymo = nnKymograph(stacks, curves, step, loaded.config.imaging);
  int clamped = 0;
  for (const auto& row : kymo.rows) clamped += row.clamped ? 1 : 0;
  if (clamped > 0)
    std::cerr << "warning: " << clamped << " sample(s) fell outside the imaging volume\n";

  atomicWriteText(fs::path(common.out_dir) / "kymo_nn.csv", kymographCsvText(kymo));
  writeHeatmapPgm(kymo, fs::path(common.out_dir) / "kymo_nn.pgm");
  writeManifest(common.out_dir, "nn", loaded.config, {geometry_path},
                {{"sample_spacing_um", step}, {"clamped_samples", clamped}});
  return 0;
}

int runFitBackground(const CommonOptions& common, const std::string& stacks_dir) {
  LoadedConfig loaded = loadConfig(common);
  StackSet set = loadStacks(stacks_dir);
  if (set.acquisition_s > 0) loaded.config.imaging.acquisition_time = set.acquisition_s;
  const std::vector<GreyStack>& stacks = set.stacks;
  const BackgroundModel bg =
      fitBackground(stacks, loaded.config.camera, loaded.config.imaging, 4000,
                    loaded.config.seed);
  fs::create_directories(common.out_dir);
  const json out = {{"background",
                     {{"amplitude", bg.amplitude},
                      {"decay_rate", bg.decay_rate},
                      {"offset", bg.offset}}}};
  atomicWriteText(fs::path(common.out_dir) / "background.json", out.dump(2) + "\n");
  writeManifest(common.out_dir, "fit-background", loaded.config, {}, out);
  std::cout << "amplitude " << bg.amplitude << ", decay " << bg.decay_rate << ", offset "
            << bg.offset << "\n";
  return 0;
}

int runFitModel(const CommonOptions& common, const std::string& geometry_path,
                const std::string& stacks_dir, const std::string& model, int budget) {
  LoadedConfig loaded = loadConfig(common);
  StackSet set = loadStacks(stacks_dir);
  if (set.acquisition_s > 0) loaded.config.imaging.acquisition_time = set.acquisition_s;
  const std::vector<GreyStack>& stacks = set.stacks;
  const std::vector<Curve> curves = loadGeometry(geometry_path, 1);
  const Curve& curve = curves.front();
  const ExperimentConfig config = resolveBackground(loaded, false, stacks);

  const PhotonStack photons = greyToPhotons(config.camera, stacks.front());
  Eigen::VectorXd counts(photons.data.size());
  for (std::size_t k = 0; k < photons.data.size(); ++k) counts[k] = photons.data[k];
  const double bg = backgroundIntegratedAt(config.background, 0.0, config.imaging);
  const BasisSpec basis = BasisSpec::forCurve(curve, common.bin_size);

  const double length = curve.paramLength();
  PhotometryModel which;
  Eigen::VectorXd initial, lower, upper;
  if (model == "pm1") {
    which = PhotometryModel::Pm1;
    initial.resize(6);
    lower.resize(6);
    upper.resize(6);
    initial << 0.6 * length, 0.3, 300.0, 0.2, 0.6, 20.0;
    lower << 0.0, 0.02, 1.0, 0.01, 0.02, 0.0;
    upper << length, 2.0, 5000.0, 2.0, 5.0, 500.0;
  } else if (model == "pm2") {
    which = PhotometryModel::Pm2;
    initial.resize(7);
    lower.resize(7);
    upper.resize(7);
    initial << 500.0, 500.0, 500.0, 0.2 * length, 0.45 * length, 0.6 * length, 0.85 * length;
    lower << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
    upper << 5000.0, 5000.0, 5000.0, length, length, length, length;
  } else {
    throw CLI::ValidationError("--model must be pm1|pm2");
  }

  const MlFitResult fit =
      parametricMlFit(which, counts, curve, basis, config.psf, config.imaging, bg, initial,
                      lower, upper, budget, config.seed);

  fs::create_directories(common.out_dir);
  json params = json::array();
  for (Eigen::Index i = 0; i < fit.params.size(); ++i) params.push_back(fit.params[i]);
  const json out = {{"model", model},
                    {"params", params},
                    {"nll", fit.nll},
                    {"evaluations", fit.evaluations}};
  atomicWriteText(fs::path(common.out_dir) / "fit_model.json", out.dump(2) + "\n");

  // ML kymograph on the reconstruction grid.
  const PhotometryVector phi = modelPhotometry(which, fit.params, basis, length);
  Kymograph kymo;
  kymo.kind = KymographKind::Ml;
  for (int p = 0; p < basis.n_bases; ++p)
    kymo.rows.push_back({curve.frameIndex(), 0.0,
                         0.5 * (p * basis.bin_size + std::min((p + 1) * basis.bin_size, length)),
                         std::max(phi.values[p], 0.0), false});
  atomicWriteText(fs::path(common.out_dir) / "kymo_ml.csv", kymographCsvText(kymo));
  writeManifest(common.out_dir, "fit-model", config, {geometry_path}, out);
  std::cout << "fit nll " << fit.nll << " after " << fit.evaluations << " evaluations\n";
  return 0;
}

int runLambdaSweep(const CommonOptions& common, const std::string& geometry_path,
                   const std::string& stacks_dir, const std::string& truth_path,
                   const std::string& lambdas_csv) {
  LoadedConfig loaded = loadConfig(common);
  StackSet set = loadStacks(stacks_dir);
  if (set.acquisition_s > 0) loaded.config.imaging.acquisition_time = set.acquisition_s;
  const std::vector<GreyStack>& stacks = set.stacks;
  const std::vector<Curve> curves =
      loadGeometry(geometry_path, static_cast<int>(stacks.size()));
  const Kymograph truth = readKymographCsv(truth_path);
  const ExperimentConfig config = resolveBackground(loaded, false, stacks);
  const std::vector<double> lambdas = parseList(lambdas_csv);
  if (lambdas.empty()) throw CLI::ValidationError("--lambdas must be a non-empty list");

  const auto rows = lambdaSweep(config, curves, stacks, truth, lambdas, common.bin_size);
  std::ostringstream out;
  out.precision(17);
  out << "lambda,l1_error\n";
  for (const auto& row : rows) out << row.lambda << ',' << row.l1_error << '\n';
  fs::create_directories(common.out_dir);
  atomicWriteText(fs::path(common.out_dir) / "lambda_sweep.csv", out.str());
  writeManifest(common.out_dir, "lambda-sweep", config, {geometry_path, truth_path},
                {{"bin_size_um", common.bin_size}});
  return 0;
}

int runBinSweep(const CommonOptions& common, const std::string& geometry_path,
                const std::string& bins_csv) {
  const LoadedConfig loaded = loadConfig(common);
  const std::vector<Curve> curves = loadGeometry(geometry_path, 1);
  const std::vector<double> bins = parseList(bins_csv);
  if (bins.empty()) throw CLI::ValidationError("--bins must be a non-empty list");

  const auto rows = binSweep(loaded.config, curves.front(), bins);
  std::ostringstream out;
  out.precision(17);
  out << "bin_size_um,rcn_hth,rcn_normal\n";
  for (const auto& row : rows)
    out << row.bin_size << ',' << row.rcn_hth << ',' << row.rcn_normal << '\n';
  fs::create_directories(common.out_dir);
  atomicWriteText(fs::path(common.out_dir) / "bin_sweep.csv", out.str());
  writeManifest(common.out_dir, "bin-sweep", loaded.config, {geometry_path}, {});
  return 0;
}

int runPsnrSweep(const CommonOptions& common, const std::string& geometry_path,
                 const std::string& model, const std::string& photometry_path,
                 const std::string& psnrs_csv) {
  const LoadedConfig loaded = loadConfig(common);
  const std::vector<Curve> curves = loadGeometry(geometry_path, 1);
  const auto density = resolveDensity(model, photometry_path, curves.front().paramLength());
  const std::vector<double> psnrs = parseList(psnrs_csv);
  if (psnrs.empty()) throw CLI::ValidationError("--psnrs must be a non-empty list");

  const auto rows = psnrSweep(loaded.config, curves, density, psnrs, common.bin_size);
  std::ostringstream out;
  out.precision(17);
  out << "psnr_db,acquisition_s,l1_error\n";
  for (const auto& row : rows)
    out << row.psnr_db << ',' << row.acquisition_time << ',' << row.l1_error << '\n';
  fs::create_directories(common.out_dir);
  atomicWriteText(fs::path(common.out_dir) / "psnr_sweep.csv", out.str());
  writeManifest(common.out_dir, "psnr-sweep", loaded.config, {geometry_path},
                {{"model", model}});
  return 0;
}

int runRcnSweep(const CommonOptions& common, const std::string& radii_csv,
                const std::string& counts_csv, int grid_size) {
  const LoadedConfig loaded = loadConfig(common);
  PsfModel psf = loaded.config.psf;
  if (!psf.cutoff_sigmas) psf.cutoff_sigmas = 4.0;  // compact support for the RCN=1 regime
  const ImagingConfig grid = singlePlaneGrid(grid_size, grid_size,
                                             loaded.config.imaging.pixel_size,
                                             loaded.config.imaging.acquisition_time);
  const auto rows = runRcnSweep(parseList(radii_csv), parseIntList(counts_csv), psf, grid);
  std::ostringstream out;
  out.precision(17);
  out << "radius_px,n_sources,rcn\n";
  for (const auto& row : rows) out << row.radius_px << ',' << row.n_sources << ',' << row.rcn << '\n';
  fs::create_directories(common.out_dir);
  atomicWriteText(fs::path(common.out_dir) / "rcn_sweep.csv", out.str());
  writeManifest(common.out_dir, "rcn-sweep", loaded.config, {}, {{"grid", grid_size}});
  return 0;
}

int runErrorSweep(const CommonOptions& common, const std::string& radii_csv,
                  const std::string& counts_csv, int grid_size, int repeats, double mu_bg,
                  double phi_true, double exposure) {
  const LoadedConfig loaded = loadConfig(common);
  PsfModel psf = loaded.config.psf;
  if (!psf.cutoff_sigmas) psf.cutoff_sigmas = 4.0;
  ImagingConfig grid = singlePlaneGrid(grid_size, grid_size, loaded.config.imaging.pixel_size,
                                       loaded.config.imaging.acquisition_time);
  if (exposure > 0) grid.acquisition_time = exposure;

  const auto rows = runErrorSweep(parseList(radii_csv), parseIntList(counts_csv), repeats, psf,
                                  grid, mu_bg, phi_true, loaded.config.seed);
  std::ostringstream out;
  out.precision(17);
  out << "radius_px,n_sources,median_l2_error\n";
  for (const auto& row : rows)
    out << row.radius_px << ',' << row.n_sources << ',' << row.median_l2_error << '\n';
  fs::create_directories(common.out_dir);
  atomicWriteText(fs::path(common.out_dir) / "error_sweep.csv", out.str());
  writeManifest(common.out_dir, "error-sweep", loaded.config, {},
                {{"repeats", repeats}, {"mu_bg", mu_bg}, {"phi_true", phi_true}});
  return 0;
}

int runRender(const CommonOptions& common, const std::string& kymo_path) {
  const Kymograph kymo = readKymographCsv(kymo_path);
  fs::create_directories(common.out_dir);
  const fs::path out =
      fs::path(common.out_dir) / (fs::path(kymo_path).stem().string() + ".pgm");
  writeHeatmapPgm(kymo, out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtual microscope and analog kymograph reconstruction"};
  app.require_subcommand(1);

  CommonOptions common;
  app.add_option("--config", common.config_path, "experiment config JSON");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_option("--seed", common.seed, "override the config seed");
  app.add_option("--lambda", common.lambda, "override the regularisation weight");
  app.add_option("--gamma", common.gamma, "override the Bregman step");
  app.add_option("--prior", common.prior, "laplace|gaussian");
  app.add_option("--bin-size", common.bin_size, "reconstruction bin size (um)");

  std::string geometry, model = "pm2", photometry, stacks_dir = "out", truth_path;
  std::string lambdas = "0.01,0.1,1,10,100", bins = "0.02,0.04,0.08,0.16,0.32,0.64";
  std::string psnrs = "5,15,25", radii = "0.5,1,2,4,8", counts = "1,2,4,8,16,32,64";
  std::string kymo_path;
  int frames = 1, budget = 2000, grid_size = 64, repeats = 20;
  double psnr = -1e9, spacing = -1.0, truth_spacing = 0.02;
  double mu_bg = 10.0, phi_true = 400.0, exposure = -1.0;

  auto* simulate_cmd = app.add_subcommand("simulate", "render synthetic grey stacks");
  simulate_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  simulate_cmd->add_option("--model", model, "pm1|pm2|csv");
  simulate_cmd->add_option("--photometry", photometry, "photometry CSV for --model csv");
  simulate_cmd->add_option("--frames", frames, "number of frames");
  simulate_cmd->add_option("--psnr", psnr, "set acquisition time from a target PSNR (dB)");
  simulate_cmd->add_option("--truth-spacing", truth_spacing, "truth kymograph grid (um)");

  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "MAP kymograph from stacks");
  reconstruct_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  reconstruct_cmd->add_option("--stacks", stacks_dir, "directory with frame_*.json stacks");
  bool fit_bg = false;
  reconstruct_cmd->add_flag("--fit-background", fit_bg, "fit photobleaching from the stacks");

  auto* nn_cmd = app.add_subcommand("nn", "nearest-neighbour kymograph");
  nn_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  nn_cmd->add_option("--stacks", stacks_dir, "directory with frame_*.json stacks");
  nn_cmd->add_option("--spacing", spacing, "sample spacing (um), default one pixel");

  auto* fitbg_cmd = app.add_subcommand("fit-background", "exponential photobleaching fit");
  fitbg_cmd->add_option("--stacks", stacks_dir, "directory with frame_*.json stacks");

  auto* fitmodel_cmd = app.add_subcommand("fit-model", "parametric ML photometry fit");
  fitmodel_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  fitmodel_cmd->add_option("--stacks", stacks_dir, "directory with frame_*.json stacks");
  fitmodel_cmd->add_option("--model", model, "pm1|pm2")->required();
  fitmodel_cmd->add_option("--budget", budget, "objective evaluation budget");

  auto* lambda_cmd = app.add_subcommand("lambda-sweep", "l1 error against truth per lambda");
  lambda_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  lambda_cmd->add_option("--stacks", stacks_dir, "directory with frame_*.json stacks");
  lambda_cmd->add_option("--truth", truth_path, "truth kymograph CSV")->required();
  lambda_cmd->add_option("--lambdas", lambdas, "comma list of lambda values");

  auto* bin_cmd = app.add_subcommand("bin-sweep", "conditioning versus bin size");
  bin_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  bin_cmd->add_option("--bins", bins, "comma list of bin sizes (um)");

  auto* psnr_cmd = app.add_subcommand("psnr-sweep", "reconstruction error versus PSNR");
  psnr_cmd->add_option("--geometry", geometry, "geometry CSV")->required();
  psnr_cmd->add_option("--model", model, "pm1|pm2|csv");
  psnr_cmd->add_option("--photometry", photometry, "photometry CSV for --model csv");
  psnr_cmd->add_option("--psnrs", psnrs, "comma list of PSNR values (dB)");

  auto* rcn_cmd = app.add_subcommand("rcn-sweep", "reciprocal condition number sweep");
  rcn_cmd->add_option("--radii", radii, "circle radii in pixels");
  rcn_cmd->add_option("--counts", counts, "total source counts");
  rcn_cmd->add_option("--grid", grid_size, "single-plane grid size");

  auto* error_cmd = app.add_subcommand("error-sweep", "ML error under Poisson noise");
  error_cmd->add_option("--radii", radii, "circle radii in pixels");
  error_cmd->add_option("--counts", counts, "total source counts");
  error_cmd->add_option("--grid", grid_size, "single-plane grid size");
  error_cmd->add_option("--repeats", repeats, "noise realisations per cell (paper: 100)");
  error_cmd->add_option("--mu-bg", mu_bg, "background counts per pixel");
  error_cmd->add_option("--phi-true", phi_true, "true intensity per source");
  error_cmd->add_option("--exposure", exposure, "override acquisition time (s)");

  auto* render_cmd = app.add_subcommand("render", "kymograph CSV to 16-bit PGM heatmap");
  render_cmd->add_option("--kymograph", kymo_path, "kymograph CSV")->required();

  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate_cmd->parsed())
      return runSimulate(common, geometry, model, photometry, frames, psnr, truth_spacing);
    if (reconstruct_cmd->parsed()) return runReconstruct(common, geometry, stacks_dir, fit_bg);
    if (nn_cmd->parsed()) return runNn(common, geometry, stacks_dir, spacing);
    if (fitbg_cmd->parsed()) return runFitBackground(common, stacks_dir);
    if (fitmodel_cmd->parsed())
      return runFitModel(common, geometry, stacks_dir, model, budget);
    if (lambda_cmd->parsed())
      return runLambdaSweep(common, geometry, stacks_dir, truth_path, lambdas);
    if (bin_cmd->parsed()) return runBinSweep(common, geometry, bins);
    if (psnr_cmd->parsed()) return runPsnrSweep(common, geometry, model, photometry, psnrs);
    if (rcn_cmd->parsed()) return runRcnSweep(common, radii, counts, grid_size);
    if (error_cmd->parsed())
      return runErrorSweep(common, radii, counts, grid_size, repeats, mu_bg, phi_true, exposure);
    if (render_cmd->parsed()) return runRender(common, kymo_path);
  } catch (const SolverDivergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
