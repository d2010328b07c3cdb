#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kymo/baselines.hpp"
#include "kymo/imaging.hpp"
#include "kymo/photometry.hpp"
#include "kymo/psf.hpp"
#include "kymo/solver.hpp"

namespace kymo {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Either a fitted photobleaching model or a constant photon rate
// (per um^2 per second).
using BackgroundSpec = std::variant<double, BackgroundModel>;

double backgroundIntegratedAt(const BackgroundSpec& bg, double t, const ImagingConfig& imaging);

struct ExperimentConfig {
  ImagingConfig imaging;
  CameraModel camera;
  PsfModel psf;
  SolverConfig solver;        // prior lives inside
  BackgroundSpec background = 100.0;
  std::uint64_t seed = 1;

  void validate() const;
};

ExperimentConfig readConfig(const std::filesystem::path& path);
void writeConfig(const ExperimentConfig& config, const std::filesystem::path& path);
std::string configToJson(const ExperimentConfig& config);
ExperimentConfig configFromJson(const std::string& text);

// Raw little-endian stack payload next to a JSON header sidecar. The path
// names the payload ("frame_000.raw"); the header replaces the extension
// with ".json". Photon stacks are f32, grey stacks u16.
void writeStack(const PhotonStack& stack, const std::filesystem::path& path,
                const ImagingConfig& imaging);
void writeStack(const GreyStack& stack, const std::filesystem::path& path,
                const ImagingConfig& imaging);
PhotonStack readPhotonStack(const std::filesystem::path& path);
GreyStack readGreyStack(const std::filesystem::path& path);

void writeKymographCsv(const Kymograph& kymo, const std::filesystem::path& path);
Kymograph readKymographCsv(const std::filesystem::path& path);

// 16-bit PGM heatmap, rows = arc-length bins (per frame sample index),
// columns = frames; linear intensity scaling with min/max recorded in a
// JSON sidecar. Constant input maps to mid-grey.
void writeHeatmapPgm(const Kymograph& kymo, const std::filesystem::path& path);

void writeGeometryCsv(const std::vector<Curve>& curves, const std::filesystem::path& path);
std::vector<Curve> readGeometryCsv(const std::filesystem::path& path);

void writePhotometryCsv(const PhotometryVector& phi, const BasisSpec& basis,
                        const std::filesystem::path& path);
// Returns the intensities with their bin size; bin indices must be 0..N-1.
std::pair<PhotometryVector, BasisSpec> readPhotometryCsv(const std::filesystem::path& path);

}  // namespace kymo
