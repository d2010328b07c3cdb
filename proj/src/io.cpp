#include "kymo/io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "stack payloads are little-endian; big-endian hosts are unsupported");

namespace kymo {

using nlohmann::json;

namespace {

json toJson(const ImagingConfig& c) {
  return {{"n_slices", c.n_slices},       {"n_rows", c.n_rows},
          {"n_cols", c.n_cols},           {"pixel_size_um", c.pixel_size},
          {"z_spacing_um", c.z_spacing},  {"acquisition_s", c.acquisition_time}};
}

json toJson(const CameraModel& c) {
  return {{"quantum_efficiency", c.quantum_efficiency},
          {"gain", c.gain},
          {"adu_factor", c.adu_factor},
          {"bias", c.bias}};
}

json toJson(const PsfModel& p) {
  json j = {{"sigma_xy_um", p.sigma_xy}, {"sigma_z_um", p.sigma_z}};
  if (p.cutoff_sigmas) j["cutoff_sigmas"] = *p.cutoff_sigmas;
  return j;
}

template <class T>
void readField(const json& j, const char* section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("config: ") + section + "." + key + ": wrong type");
  }
}

void validateNamed(const char* field, const std::function<void()>& check) {
  try {
    check();
  } catch (const std::exception& e) {
    throw FormatError(std::string("config: ") + field + ": " + e.what());
  }
}

std::filesystem::path headerPath(std::filesystem::path path) {
  path.replace_extension(".json");
  return path;
}

std::filesystem::path payloadPath(std::filesystem::path path) {
  if (path.extension() == ".json") path.replace_extension(".raw");
  return path;
}

template <class T>
void writeStackImpl(const Stack3<T>& stack, const std::filesystem::path& path,
                    const ImagingConfig& imaging, const char* dtype) {
  json header = {{"shape", {stack.n_slices, stack.n_rows, stack.n_cols}},
                 {"dtype", dtype},
                 {"order", "z,y,x"},
                 {"pixel_size_um", imaging.pixel_size},
                 {"z_spacing_um", imaging.z_spacing},
                 {"t_index", stack.frame_index},
                 {"acquisition_s", imaging.acquisition_time}};
  std::ofstream hdr(headerPath(path));
  if (!hdr) throw FormatError("writeStack: cannot open " + headerPath(path).string());
  hdr << header.dump(2) << "\n";

  const auto payload = payloadPath(path);
  std::ofstream raw(payload, std::ios::binary);
  if (!raw) throw FormatError("writeStack: cannot open " + payload.string());
  raw.write(reinterpret_cast<const char*>(stack.data.data()),
            static_cast<std::streamsize>(stack.data.size() * sizeof(T)));
}

template <class T>
Stack3<T> readStackImpl(const std::filesystem::path& path, const char* dtype) {
  std::ifstream hdr(headerPath(path));
  if (!hdr) throw FormatError("readStack: cannot open " + headerPath(path).string());
  json header;
  try {
    hdr >> header;
  } catch (const json::exception& e) {
    throw FormatError("readStack: bad header: " + std::string(e.what()));
  }
  if (header.value("dtype", "") != dtype)
    throw FormatError("readStack: expected dtype " + std::string(dtype));
  if (header.value("order", "z,y,x") != "z,y,x")
    throw FormatError("readStack: unsupported axis order");
  const auto shape = header.at("shape");
  if (!shape.is_array() || shape.size() != 3)
    throw FormatError("readStack: shape must have three entries");

  Stack3<T> stack;
  stack.n_slices = shape[0].get<int>();
  stack.n_rows = shape[1].get<int>();
  stack.n_cols = shape[2].get<int>();
  stack.frame_index = header.value("t_index", 0);
  if (stack.n_slices < 1 || stack.n_rows < 1 || stack.n_cols < 1)
    throw FormatError("readStack: invalid shape");

  const auto payload = payloadPath(path);
  std::ifstream raw(payload, std::ios::binary | std::ios::ate);
  if (!raw) throw FormatError("readStack: cannot open " + payload.string());
  const auto bytes = static_cast<std::size_t>(raw.tellg());
  const std::size_t expected = static_cast<std::size_t>(stack.n_slices) * stack.n_rows *
                               stack.n_cols * sizeof(T);
  if (bytes != expected)
    throw FormatError("readStack: payload size " + std::to_string(bytes) +
                      " does not match header shape (" + std::to_string(expected) + " bytes)");
  stack.data.resize(expected / sizeof(T));
  raw.seekg(0);
  raw.read(reinterpret_cast<char*>(stack.data.data()), static_cast<std::streamsize>(expected));
  if (!raw) throw FormatError("readStack: short read on " + payload.string());
  return stack;
}

std::vector<std::string> splitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

double backgroundIntegratedAt(const BackgroundSpec& bg, double t, const ImagingConfig& imaging) {
  if (std::holds_alternative<double>(bg))
    return std::get<double>(bg) * imaging.pixelArea() * imaging.acquisition_time;
  return std::get<BackgroundModel>(bg).integratedAt(t, imaging);
}

void ExperimentConfig::validate() const {
  validateNamed("imaging", [&] { imaging.validate(); });
  validateNamed("camera", [&] { camera.validate(); });
  validateNamed("psf", [&] { psf.validate(); });
  validateNamed("solver", [&] { solver.validate(); });
  if (std::holds_alternative<double>(background)) {
    if (!(std::get<double>(background) > 0))
      throw FormatError("config: background.rate: must be > 0");
  } else {
    validateNamed("background", [&] { std::get<BackgroundModel>(background).validate(); });
    if (!(std::get<BackgroundModel>(background).rateAt(0.0) > 0))
      throw FormatError("config: background: rate must be > 0");
  }
}

std::string configToJson(const ExperimentConfig& config) {
  json j;
  j["imaging"] = toJson(config.imaging);
  j["camera"] = toJson(config.camera);
  j["psf"] = toJson(config.psf);
  j["solver"] = {{"gamma", config.solver.gamma},
                 {"max_iters", config.solver.max_iters},
                 {"rel_tol", config.solver.rel_tol}};
  j["prior"] = {{"family", config.solver.prior.family == PriorFamily::Laplace ? "laplace"
                                                                              : "gaussian"},
                {"lambda", config.solver.prior.lambda}};
  if (std::holds_alternative<double>(config.background)) {
    j["background"] = {{"rate", std::get<double>(config.background)}};
  } else {
    const auto& bg = std::get<BackgroundModel>(config.background);
    j["background"] = {{"amplitude", bg.amplitude},
                       {"decay_rate", bg.decay_rate},
                       {"offset", bg.offset}};
  }
  j["seed"] = config.seed;
  return j.dump(2) + "\n";
}

ExperimentConfig configFromJson(const std::string& text) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("config: parse error: " + std::string(e.what()));
  }

  ExperimentConfig config;  // defaults are the calibrated image-formation parameters
  if (j.contains("imaging")) {
    const auto& s = j["imaging"];
    readField(s, "imaging", "n_slices", config.imaging.n_slices);
    readField(s, "imaging", "n_rows", config.imaging.n_rows);
    readField(s, "imaging", "n_cols", config.imaging.n_cols);
    readField(s, "imaging", "pixel_size_um", config.imaging.pixel_size);
    readField(s, "imaging", "z_spacing_um", config.imaging.z_spacing);
    readField(s, "imaging", "acquisition_s", config.imaging.acquisition_time);
  }
  if (j.contains("camera")) {
    const auto& s = j["camera"];
    readField(s, "camera", "quantum_efficiency", config.camera.quantum_efficiency);
    readField(s, "camera", "gain", config.camera.gain);
    readField(s, "camera", "adu_factor", config.camera.adu_factor);
    readField(s, "camera", "bias", config.camera.bias);
  }
  if (j.contains("psf")) {
    const auto& s = j["psf"];
    readField(s, "psf", "sigma_xy_um", config.psf.sigma_xy);
    readField(s, "psf", "sigma_z_um", config.psf.sigma_z);
    if (s.contains("cutoff_sigmas") && !s["cutoff_sigmas"].is_null()) {
      double cutoff = 0;
      readField(s, "psf", "cutoff_sigmas", cutoff);
      config.psf.cutoff_sigmas = cutoff;
    }
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    readField(s, "solver", "gamma", config.solver.gamma);
    readField(s, "solver", "max_iters", config.solver.max_iters);
    readField(s, "solver", "rel_tol", config.solver.rel_tol);
  }
  if (j.contains("prior")) {
    const auto& s = j["prior"];
    std::string family = "laplace";
    readField(s, "prior", "family", family);
    if (family == "laplace") config.solver.prior.family = PriorFamily::Laplace;
    else if (family == "gaussian") config.solver.prior.family = PriorFamily::Gaussian;
    else throw FormatError("config: prior.family: must be laplace or gaussian");
    readField(s, "prior", "lambda", config.solver.prior.lambda);
  }
  if (j.contains("background")) {
    const auto& s = j["background"];
    if (s.contains("rate")) {
      double rate = 0;
      readField(s, "background", "rate", rate);
      config.background = rate;
    } else {
      BackgroundModel bg;
      readField(s, "background", "amplitude", bg.amplitude);
      readField(s, "background", "decay_rate", bg.decay_rate);
      readField(s, "background", "offset", bg.offset);
      config.background = bg;
    }
  }
  readField(j, "", "seed", config.seed);
  config.validate();
  return config;
}

ExperimentConfig readConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("readConfig: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return configFromJson(buffer.str());
}

void writeConfig(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("writeConfig: cannot open " + path.string());
  out << configToJson(config);
}

void writeStack(const PhotonStack& stack, const std::filesystem::path& path,
                const ImagingConfig& imaging) {
  for (float v : stack.data)
    if (!std::isfinite(v)) throw FormatError("writeStack: non-finite photon value");
  writeStackImpl(stack, path, imaging, "f32");
}

void writeStack(const GreyStack& stack, const std::filesystem::path& path,
                const ImagingConfig& imaging) {
  writeStackImpl(stack, path, imaging, "u16");
}

PhotonStack readPhotonStack(const std::filesystem::path& path) {
  PhotonStack stack = readStackImpl<float>(path, "f32");
  for (float v : stack.data)
    if (!std::isfinite(v)) throw FormatError("readPhotonStack: non-finite payload");
  return stack;
}

GreyStack readGreyStack(const std::filesystem::path& path) {
  return readStackImpl<std::uint16_t>(path, "u16");
}

void writeKymographCsv(const Kymograph& kymo, const std::filesystem::path& path) {
  if (kymo.rows.empty()) throw FormatError("writeKymographCsv: empty kymograph");
  std::ofstream out(path);
  if (!out) throw FormatError("writeKymographCsv: cannot open " + path.string());
  out << "frame,time_s,arc_length_um,intensity,kind\n";
  out.precision(17);
  const std::string kind = kymographKindName(kymo.kind);
  for (const auto& row : kymo.rows)
    out << row.frame << ',' << row.time_s << ',' << row.arc_length_um << ',' << row.intensity
        << ',' << kind << '\n';
}

Kymograph readKymographCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("readKymographCsv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("readKymographCsv: empty file");

  Kymograph kymo;
  bool first = true;
  int prev_frame = -1;
  double prev_l = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = splitCsvLine(line);
    if (fields.size() != 5) throw FormatError("readKymographCsv: expected 5 columns");
    KymographRow row;
    row.frame = std::stoi(fields[0]);
    row.time_s = std::stod(fields[1]);
    row.arc_length_um = std::stod(fields[2]);
    row.intensity = std::stod(fields[3]);
    const KymographKind kind = kymographKindFromName(fields[4]);
    if (first) {
      kymo.kind = kind;
      first = false;
    } else if (kind != kymo.kind) {
      throw FormatError("readKymographCsv: mixed kinds");
    }
    if (row.frame == prev_frame && row.arc_length_um <= prev_l)
      throw FormatError("readKymographCsv: arc length not strictly increasing within frame");
    if (kymo.kind != KymographKind::Nn && row.intensity < 0)
      throw FormatError("readKymographCsv: negative intensity for kind " +
                        kymographKindName(kymo.kind));
    prev_frame = row.frame;
    prev_l = row.arc_length_um;
    kymo.rows.push_back(row);
  }
  if (kymo.rows.empty()) throw FormatError("readKymographCsv: no data rows");
  return kymo;
}

void writeHeatmapPgm(const Kymograph& kymo, const std::filesystem::path& path) {
  if (kymo.rows.empty()) throw FormatError("writeHeatmapPgm: empty kymograph");

  // Column per frame, row per in-frame sample. All frames must align.
  std::vector<int> frames;
  std::vector<std::size_t> counts;
  for (const auto& row : kymo.rows) {
    if (frames.empty() || row.frame != frames.back()) {
      frames.push_back(row.frame);
      counts.push_back(0);
    }
    ++counts.back();
  }
  const std::size_t rows_per_frame = counts.front();
  for (std::size_t c : counts)
    if (c != rows_per_frame)
      throw FormatError("writeHeatmapPgm: frames have different sample counts");

  double lo = kymo.rows.front().intensity, hi = lo;
  for (const auto& row : kymo.rows) {
    lo = std::min(lo, row.intensity);
    hi = std::max(hi, row.intensity);
  }

  const std::size_t width = frames.size();
  const std::size_t height = rows_per_frame;
  std::vector<std::uint16_t> image(width * height, 0);
  for (std::size_t i = 0; i < kymo.rows.size(); ++i) {
    const std::size_t col = i / height;
    const std::size_t row = i % height;
    double scaled = hi > lo ? (kymo.rows[i].intensity - lo) / (hi - lo) : 0.5;
    image[row * width + col] = static_cast<std::uint16_t>(std::lround(scaled * 65535.0));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("writeHeatmapPgm: cannot open " + path.string());
  out << "P5\n" << width << " " << height << "\n65535\n";
  for (std::uint16_t v : image) {  // PGM 16-bit samples are big-endian
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }

  json sidecar = {{"min_intensity", lo}, {"max_intensity", hi},
                  {"n_frames", width},   {"n_bins", height}};
  std::filesystem::path side = path;
  side += ".json";
  std::ofstream sc(side);
  sc << sidecar.dump(2) << "\n";
}

void writeGeometryCsv(const std::vector<Curve>& curves, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("writeGeometryCsv: cannot open " + path.string());
  out << "frame,kind,p1x,p1y,p1z,p2x,p2y,p2z,p3x,p3y,p3z,p4x,p4y,p4z,length_um\n";
  out.precision(17);
  for (const Curve& c : curves) {
    out << c.frameIndex() << ',';
    if (c.kind() == CurveKind::Line) {
      const auto& o = c.origin();
      const auto& d = c.direction();
      out << "line," << o.x() << ',' << o.y() << ',' << o.z() << ',' << d.x() << ',' << d.y()
          << ',' << d.z() << ",,,,,,," << c.paramLength() << '\n';
    } else {
      out << "quadratic-spline";
      for (const auto& p : c.controlPoints())
        out << ',' << p.x() << ',' << p.y() << ',' << p.z();
      out << ",\n";
    }
  }
}

std::vector<Curve> readGeometryCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("readGeometryCsv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("readGeometryCsv: empty file");

  std::vector<Curve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = splitCsvLine(line);
    if (fields.size() != 15) throw FormatError("readGeometryCsv: expected 15 columns");
    const int frame = std::stoi(fields[0]);
    const auto vec = [&](int first) {
      return Eigen::Vector3d(std::stod(fields[first]), std::stod(fields[first + 1]),
                             std::stod(fields[first + 2]));
    };
    if (fields[1] == "line") {
      if (fields[14].empty()) throw FormatError("readGeometryCsv: line row missing length_um");
      curves.push_back(Curve::line(vec(2), vec(5), std::stod(fields[14]), frame));
    } else if (fields[1] == "quadratic-spline") {
      curves.push_back(Curve::quadraticSpline({vec(2), vec(5), vec(8), vec(11)}, frame));
    } else {
      throw FormatError("readGeometryCsv: unknown kind " + fields[1]);
    }
  }
  if (curves.empty()) throw FormatError("readGeometryCsv: no curves");
  return curves;
}

void writePhotometryCsv(const PhotometryVector& phi, const BasisSpec& basis,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("writePhotometryCsv: cannot open " + path.string());
  out << "bin_index,arc_length_um,intensity\n";
  out.precision(17);
  for (int p = 0; p < basis.n_bases; ++p)
    out << p << ',' << (p + 0.5) * basis.bin_size << ',' << phi.values[p] << '\n';
}

std::pair<PhotometryVector, BasisSpec> readPhotometryCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("readPhotometryCsv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("readPhotometryCsv: empty file");

  std::vector<double> centres, values;
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = splitCsvLine(line);
    if (fields.size() != 3) throw FormatError("readPhotometryCsv: expected 3 columns");
    if (std::stoi(fields[0]) != expected++)
      throw FormatError("readPhotometryCsv: bin indices must be contiguous from 0");
    centres.push_back(std::stod(fields[1]));
    const double v = std::stod(fields[2]);
    if (v < 0) throw FormatError("readPhotometryCsv: negative intensity");
    values.push_back(v);
  }
  if (values.empty()) throw FormatError("readPhotometryCsv: no data rows");

  BasisSpec basis;
  basis.n_bases = static_cast<int>(values.size());
  basis.bin_size = centres.size() > 1 ? centres[1] - centres[0] : 2.0 * centres[0];
  if (!(basis.bin_size > 0)) throw FormatError("readPhotometryCsv: invalid bin spacing");

  PhotometryVector phi;
  phi.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return {phi, basis};
}

}  // namespace kymo
