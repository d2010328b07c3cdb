#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace kymo {

// Acquisition grid and timing. Pixel centres sit at half-offsets:
// ((col+1/2)*pixel, (row+1/2)*pixel, (slice+1/2)*z_spacing). Linear pixel
// index runs z, then rows, then columns.
struct ImagingConfig {
  int n_slices = 21;
  int n_rows = 25;
  int n_cols = 42;
  double pixel_size = 0.160;        // um
  double z_spacing = 0.300;         // um; not in the calibration table, see README
  double acquisition_time = 0.026;  // s

  void validate() const {
    if (n_slices < 1 || n_rows < 1 || n_cols < 1)
      throw std::invalid_argument("ImagingConfig: all dimensions must be >= 1");
    if (!(pixel_size > 0)) throw std::invalid_argument("ImagingConfig: pixel_size must be > 0");
    if (!(z_spacing > 0)) throw std::invalid_argument("ImagingConfig: z_spacing must be > 0");
    if (!(acquisition_time > 0))
      throw std::invalid_argument("ImagingConfig: acquisition_time must be > 0");
  }

  int nPixels() const { return n_slices * n_rows * n_cols; }
  double pixelArea() const { return pixel_size * pixel_size; }

  int linearIndex(int slice, int row, int col) const {
    return (slice * n_rows + row) * n_cols + col;
  }

  Eigen::Vector3d pixelCentre(int slice, int row, int col) const {
    return {(col + 0.5) * pixel_size, (row + 0.5) * pixel_size, (slice + 0.5) * z_spacing};
  }

  Eigen::Vector3d pixelCentre(int k) const {
    const int col = k % n_cols;
    const int row = (k / n_cols) % n_rows;
    const int slice = k / (n_cols * n_rows);
    return pixelCentre(slice, row, col);
  }
};

// Deterministic affine EM-CCD model: grey = qe * gain / adu * photons + bias.
struct CameraModel {
  double quantum_efficiency = 0.7;
  double gain = 1200.0;
  double adu_factor = 6.44;
  double bias = 1839.0;

  void validate() const {
    if (!(quantum_efficiency > 0) || quantum_efficiency > 1)
      throw std::invalid_argument("CameraModel: quantum_efficiency must be in (0, 1]");
    if (!(gain > 0)) throw std::invalid_argument("CameraModel: gain must be > 0");
    if (!(adu_factor > 0)) throw std::invalid_argument("CameraModel: adu_factor must be > 0");
  }

  double photonsPerGrey() const { return adu_factor / (quantum_efficiency * gain); }
};

// Spatially uniform background photon rate per um^2 per second, decaying in
// time by photobleaching: rate(t) = amplitude * exp(-decay_rate * t) + offset.
struct BackgroundModel {
  double amplitude = 0.0;
  double decay_rate = 0.0;
  double offset = 0.0;

  void validate() const {
    if (amplitude < 0 || decay_rate < 0 || offset < 0)
      throw std::invalid_argument("BackgroundModel: parameters must be nonnegative");
  }

  double rateAt(double t) const { return amplitude * std::exp(-decay_rate * t) + offset; }

  // Integrated per-pixel background counts for one frame.
  double integratedAt(double t, const ImagingConfig& imaging) const {
    return rateAt(t) * imaging.pixelArea() * imaging.acquisition_time;
  }
};

template <class T>
struct Stack3 {
  int n_slices = 0, n_rows = 0, n_cols = 0;
  int frame_index = 0;
  std::vector<T> data;  // z, y, x order

  static Stack3 zeros(const ImagingConfig& imaging, int frame = 0) {
    Stack3 s;
    s.n_slices = imaging.n_slices;
    s.n_rows = imaging.n_rows;
    s.n_cols = imaging.n_cols;
    s.frame_index = frame;
    s.data.assign(static_cast<std::size_t>(imaging.nPixels()), T{});
    return s;
  }

  std::size_t size() const { return data.size(); }
  T& operator[](std::size_t k) { return data[k]; }
  const T& operator[](std::size_t k) const { return data[k]; }
};

using PhotonStack = Stack3<float>;
using GreyStack = Stack3<std::uint16_t>;

}  // namespace kymo
