#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "kymo/io.hpp"

using namespace kymo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("kymo_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("empty config yields the calibrated defaults") {
  const ExperimentConfig config = configFromJson("");
  CHECK(config.imaging.acquisition_time == 0.026);
  CHECK(config.imaging.pixel_size == 0.160);
  CHECK(config.imaging.n_slices == 21);
  CHECK(config.imaging.n_rows == 25);
  CHECK(config.imaging.n_cols == 42);
  CHECK(config.psf.sigma_xy == 0.130);
  CHECK(config.psf.sigma_z == 0.255);
  CHECK(!config.psf.cutoff_sigmas);
  CHECK(config.camera.quantum_efficiency == 0.7);
  CHECK(config.camera.gain == 1200.0);
  CHECK(config.camera.adu_factor == 6.44);
  CHECK(config.camera.bias == 1839.0);
}

TEST_CASE("config validation names the offending field") {
  try {
    configFromJson(R"({"imaging": {"pixel_size_um": -1}})");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("imaging") != std::string::npos);
    CHECK(std::string(e.what()).find("pixel_size") != std::string::npos);
  }
  CHECK_THROWS_AS(configFromJson(R"({"prior": {"family": "cauchy"}})"), FormatError);
  CHECK_THROWS_AS(configFromJson(R"({"background": {"rate": 0}})"), FormatError);
  CHECK_THROWS_AS(configFromJson("{nonsense"), FormatError);
}

TEST_CASE("config serialisation reaches a fixed point after one round trip") {
  const std::string once = configToJson(configFromJson(R"({"seed": 7, "solver": {"gamma": 2}})"));
  const std::string twice = configToJson(configFromJson(once));
  CHECK(once == twice);

  TempDir dir;
  const auto path = dir.path / "config.json";
  writeConfig(configFromJson(once), path);
  CHECK(configToJson(readConfig(path)) == once);
}

TEST_CASE("grey stacks round trip bitwise") {
  TempDir dir;
  ImagingConfig imaging;
  imaging.n_slices = 3;
  imaging.n_rows = 4;
  imaging.n_cols = 5;
  GreyStack stack = GreyStack::zeros(imaging, 2);
  std::mt19937 rng(6);
  for (auto& v : stack.data) v = static_cast<std::uint16_t>(rng());

  const auto path = dir.path / "frame.raw";
  writeStack(stack, path, imaging);
  const GreyStack back = readGreyStack(path);
  CHECK(back.data == stack.data);
  CHECK(back.frame_index == 2);
  CHECK(back.n_slices == 3);
}

TEST_CASE("photon stacks round trip and reject non-finite payloads") {
  TempDir dir;
  ImagingConfig imaging;
  imaging.n_slices = 2;
  imaging.n_rows = 3;
  imaging.n_cols = 3;
  PhotonStack stack = PhotonStack::zeros(imaging, 0);
  for (std::size_t k = 0; k < stack.data.size(); ++k) stack.data[k] = 0.25f * k;

  const auto path = dir.path / "photons.raw";
  writeStack(stack, path, imaging);
  CHECK(readPhotonStack(path).data == stack.data);

  stack.data[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(writeStack(stack, dir.path / "bad.raw", imaging), FormatError);

  // Corrupt the payload on disk and re-read.
  std::ofstream raw(path, std::ios::binary);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t k = 0; k < stack.data.size(); ++k)
    raw.write(reinterpret_cast<const char*>(&nan), sizeof nan);
  raw.close();
  CHECK_THROWS_AS(readPhotonStack(path), FormatError);
}

TEST_CASE("payload length must match the header shape") {
  TempDir dir;
  ImagingConfig imaging;
  imaging.n_slices = 1;
  imaging.n_rows = 2;
  imaging.n_cols = 2;
  GreyStack stack = GreyStack::zeros(imaging);
  const auto path = dir.path / "short.raw";
  writeStack(stack, path, imaging);
  fs::resize_file(path, 6);  // truncate one sample
  CHECK_THROWS_AS(readGreyStack(path), FormatError);
}

TEST_CASE("kymograph csv round trips losslessly") {
  TempDir dir;
  Kymograph kymo;
  kymo.kind = KymographKind::Map;
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 900.0);
  for (int f = 0; f < 2; ++f)
    for (int p = 0; p < 5; ++p)
      kymo.rows.push_back({f, f * 0.026, (p + 0.5) * 0.04, u(rng), false});

  const auto path = dir.path / "kymo.csv";
  writeKymographCsv(kymo, path);
  const Kymograph back = readKymographCsv(path);
  CHECK(back.kind == kymo.kind);
  REQUIRE(back.rows.size() == kymo.rows.size());
  for (std::size_t i = 0; i < kymo.rows.size(); ++i) {
    CHECK(back.rows[i].frame == kymo.rows[i].frame);
    CHECK(back.rows[i].time_s == kymo.rows[i].time_s);
    CHECK(back.rows[i].arc_length_um == kymo.rows[i].arc_length_um);
    CHECK(back.rows[i].intensity == kymo.rows[i].intensity);
  }

  // Row count is frames x bins.
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 1 + 2 * 5);

  Kymograph empty;
  CHECK_THROWS_AS(writeKymographCsv(empty, dir.path / "empty.csv"), FormatError);
}

TEST_CASE("readers reject invariant violations") {
  TempDir dir;
  const auto path = dir.path / "bad.csv";
  {
    std::ofstream out(path);
    out << "frame,time_s,arc_length_um,intensity,kind\n";
    out << "0,0,0.5,10,map\n";
    out << "0,0,0.25,11,map\n";  // arc length decreases
  }
  CHECK_THROWS_AS(readKymographCsv(path), FormatError);
  {
    std::ofstream out(path);
    out << "frame,time_s,arc_length_um,intensity,kind\n";
    out << "0,0,0.5,-10,map\n";  // negative intensity for map kind
  }
  CHECK_THROWS_AS(readKymographCsv(path), FormatError);
  {
    std::ofstream out(path);
    out << "frame,time_s,arc_length_um,intensity,kind\n";
    out << "0,0,0.5,-10,nn\n";  // raw grey values may be anything
  }
  CHECK_NOTHROW(readKymographCsv(path));
}

TEST_CASE("heatmap pgm layout and scaling") {
  TempDir dir;
  Kymograph kymo;
  kymo.kind = KymographKind::Truth;
  // 2 frames x 3 bins.
  for (int f = 0; f < 2; ++f)
    for (int p = 0; p < 3; ++p)
      kymo.rows.push_back({f, f * 1.0, (p + 0.5) * 0.1, static_cast<double>(p + 3 * f), false});

  const auto path = dir.path / "heat.pgm";
  writeHeatmapPgm(kymo, path);

  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  CHECK(magic == "P5");
  CHECK(width == 2);   // columns = frames
  CHECK(height == 3);  // rows = arc-length bins
  CHECK(maxval == 65535);
  in.get();
  std::vector<unsigned char> payload(static_cast<std::size_t>(width) * height * 2);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  CHECK(in.gcount() == static_cast<std::streamsize>(payload.size()));
  // Largest intensity (frame 1, bin 2) sits at the bottom-right, value 65535.
  const std::size_t last = payload.size() - 2;
  CHECK((payload[last] << 8 | payload[last + 1]) == 65535);

  SUBCASE("constant kymograph maps to mid grey") {
    Kymograph flat;
    flat.kind = KymographKind::Truth;
    for (int p = 0; p < 3; ++p) flat.rows.push_back({0, 0.0, (p + 0.5) * 0.1, 7.0, false});
    const auto flat_path = dir.path / "flat.pgm";
    writeHeatmapPgm(flat, flat_path);
    std::ifstream fin(flat_path, std::ios::binary);
    fin >> magic >> width >> height >> maxval;
    fin.get();
    for (int i = 0; i < width * height; ++i) {
      const int hi = fin.get(), lo = fin.get();
      CHECK((hi << 8 | lo) == 32768);
    }
  }
}

TEST_CASE("geometry csv round trips both curve kinds") {
  TempDir dir;
  std::vector<Curve> curves;
  curves.push_back(Curve::line({0.5, 1.0, 2.0}, Eigen::Vector3d(1, 2, 2).normalized(), 4.5, 0));
  curves.push_back(Curve::quadraticSpline(
      {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 0), Eigen::Vector3d(2, 0.5, 0.2),
       Eigen::Vector3d(3, 1.5, 0.1)},
      1));

  const auto path = dir.path / "geometry.csv";
  writeGeometryCsv(curves, path);
  const auto back = readGeometryCsv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].kind() == CurveKind::Line);
  CHECK(back[1].kind() == CurveKind::QuadraticSpline);
  CHECK(back[0].paramLength() == curves[0].paramLength());
  CHECK(back[1].paramLength() == doctest::Approx(curves[1].paramLength()).epsilon(1e-14));
  for (double frac : {0.0, 0.3, 0.9}) {
    CHECK((back[0].embed(frac * back[0].paramLength()) -
           curves[0].embed(frac * curves[0].paramLength()))
              .norm() < 1e-12);
    CHECK((back[1].embed(frac * back[1].paramLength()) -
           curves[1].embed(frac * curves[1].paramLength()))
              .norm() < 1e-12);
  }
}

TEST_CASE("photometry csv round trips") {
  TempDir dir;
  PhotometryVector phi;
  phi.values = Eigen::Vector4d(10.0, 0.0, 300.5, 42.0);
  const BasisSpec basis{0.25, 4};
  const auto path = dir.path / "phi.csv";
  writePhotometryCsv(phi, basis, path);
  const auto [back, back_basis] = readPhotometryCsv(path);
  CHECK(back_basis.n_bases == 4);
  CHECK(back_basis.bin_size == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(back.values == phi.values);

  {
    std::ofstream out(path);
    out << "bin_index,arc_length_um,intensity\n0,0.125,-5\n";
  }
  CHECK_THROWS_AS(readPhotometryCsv(path), FormatError);
}
