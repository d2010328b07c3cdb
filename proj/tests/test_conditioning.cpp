#include <doctest.h>

#include <random>

#include "kymo/conditioning.hpp"

using namespace kymo;

namespace {

PsfModel truncatedPsf() {
  PsfModel psf;
  psf.cutoff_sigmas = 4.0;
  return psf;
}

ImagingConfig grid32() { return singlePlaneGrid(32, 32, 0.160, 0.026); }

Eigen::Vector3d onPlane(const ImagingConfig& grid, double x, double y) {
  return {x, y, 0.5 * grid.z_spacing};
}

}  // namespace

TEST_CASE("single source gives a single perfectly conditioned column") {
  const ImagingConfig grid = grid32();
  const auto system = assemblePointSourceMatrix(
      {onPlane(grid, 16.5 * grid.pixel_size, 16.5 * grid.pixel_size)}, truncatedPsf(), grid);
  CHECK(system.M.cols() == 1);
  CHECK(rcn(system.M) == doctest::Approx(1.0));
  CHECK_THROWS_AS(assemblePointSourceMatrix({}, truncatedPsf(), grid), std::invalid_argument);
}

TEST_CASE("coincident sources produce identical columns and an ill-posed system") {
  const ImagingConfig grid = grid32();
  const Eigen::Vector3d y = onPlane(grid, 16.3 * grid.pixel_size, 15.8 * grid.pixel_size);
  const auto system = assemblePointSourceMatrix({y, y}, truncatedPsf(), grid);
  CHECK(system.M.col(0) == system.M.col(1));
  CHECK(rcn(system.M) < 1e-12);
}

TEST_CASE("whole-pixel translation permutes matrix rows") {
  const ImagingConfig grid = grid32();
  const PsfModel psf = truncatedPsf();
  const double ps = grid.pixel_size;
  const std::vector<Eigen::Vector3d> base = {onPlane(grid, 10.3 * ps, 12.7 * ps),
                                             onPlane(grid, 20.6 * ps, 18.2 * ps)};
  std::vector<Eigen::Vector3d> shifted = base;
  for (auto& y : shifted) y.x() += ps;
  const auto a = assemblePointSourceMatrix(base, psf, grid);
  const auto b = assemblePointSourceMatrix(shifted, psf, grid);
  // Row (r, c) of the shifted system equals row (r, c-1) of the original.
  double worst = 0.0;
  for (int r = 0; r < grid.n_rows; ++r)
    for (int c = 1; c < grid.n_cols; ++c)
      worst = std::max(worst, (b.M.row(grid.linearIndex(0, r, c)) -
                               a.M.row(grid.linearIndex(0, r, c - 1)))
                                  .lpNorm<Eigen::Infinity>());
  CHECK(worst < 1e-12 * a.M.maxCoeff());
}

TEST_CASE("rcn basics") {
  CHECK(rcn(Eigen::MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  CHECK(rcn(d) == doctest::Approx(0.5));
  Eigen::MatrixXd dup(3, 2);
  dup.col(0) = Eigen::Vector3d(1, 2, 3);
  dup.col(1) = Eigen::Vector3d(1, 2, 3);
  CHECK(rcn(dup) < 1e-12);
  CHECK(rcn(Eigen::MatrixXd::Zero(3, 3)) == 0.0);
}

TEST_CASE("rcn is scale invariant and consistent with the Gram matrix") {
  std::mt19937 rng(23);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m(12, 5);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    const double r = rcn(m);
    CHECK(rcn(Eigen::MatrixXd(3.7 * m)) == doctest::Approx(r).epsilon(1e-10));
    CHECK(std::sqrt(rcn(Eigen::MatrixXd(m.transpose() * m))) ==
          doctest::Approx(r).epsilon(1e-8));
  }
}

TEST_CASE("roots of unity placement") {
  const ImagingConfig grid = grid32();
  const Eigen::Vector2d centre(2.0, 3.0);

  const auto single = rootsOfUnitySources(0, 5.0, centre, grid);
  CHECK(single.size() == 1);

  const auto five = rootsOfUnitySources(4, 2.0, centre, grid);
  REQUIRE(five.size() == 5);
  const double r = 2.0 * grid.pixel_size;
  CHECK((five[1].head<2>() - (centre + Eigen::Vector2d(r, 0))).norm() < 1e-12);
  CHECK((five[2].head<2>() - (centre + Eigen::Vector2d(0, r))).norm() < 1e-12);
  CHECK((five[3].head<2>() - (centre - Eigen::Vector2d(r, 0))).norm() < 1e-12);
  CHECK((five[4].head<2>() - (centre - Eigen::Vector2d(0, r))).norm() < 1e-12);
  for (std::size_t j = 1; j < five.size(); ++j)
    CHECK((five[j].head<2>() - centre).norm() == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("disjoint supports realise the column-norm ratio") {
  const ImagingConfig grid = grid32();
  const PsfModel psf = truncatedPsf();
  const double ps = grid.pixel_size;
  // Two interior sources and one close to the boundary, whose truncated
  // support is clipped and so has a smaller column norm.
  const std::vector<Eigen::Vector3d> sources = {onPlane(grid, 10.5 * ps, 10.5 * ps),
                                                onPlane(grid, 24.5 * ps, 20.5 * ps),
                                                onPlane(grid, 1.5 * ps, 28.5 * ps)};
  const auto system = assemblePointSourceMatrix(sources, psf, grid);
  Eigen::VectorXd norms(3);
  for (int j = 0; j < 3; ++j) norms[j] = system.M.col(j).norm();
  const double ratio = norms.minCoeff() / norms.maxCoeff();
  CHECK(ratio < 1.0);
  CHECK(rcn(system.M) == doctest::Approx(ratio).epsilon(1e-10));
}

TEST_CASE("noiseless ml recovers well-separated intensities") {
  const ImagingConfig grid = grid32();
  const PsfModel psf = truncatedPsf();
  const double ps = grid.pixel_size;
  const auto locations = rootsOfUnitySources(3, 8.0, {16.5 * ps, 16.5 * ps}, grid);
  ImagingConfig bright = grid;
  bright.acquisition_time = 0.64;  // paper-scale photon budget per source
  const auto system = assemblePointSourceMatrix(locations, psf, bright);
  const Eigen::VectorXd truth = Eigen::VectorXd::Constant(4, 400.0);
  const Eigen::VectorXd exact_rates = (system.M * truth).array() + 10.0;
  const Eigen::VectorXd estimate = mlPointSourceIntensities(system.M, exact_rates, 10.0);
  CHECK((estimate - truth).norm() / truth.norm() < 1e-3);
}

TEST_CASE("error sweep is deterministic and penalises crowding") {
  const ImagingConfig grid = grid32();
  PsfModel psf = truncatedPsf();
  ImagingConfig bright = grid;
  bright.acquisition_time = 0.64;
  const auto a = runErrorSweep({0.5}, {1, 4}, 5, psf, bright, 10.0, 400.0, 11);
  const auto b = runErrorSweep({0.5}, {1, 4}, 5, psf, bright, 10.0, 400.0, 11);
  REQUIRE(a.size() == 2);
  CHECK(a[0].median_l2_error == b[0].median_l2_error);
  CHECK(a[1].median_l2_error == b[1].median_l2_error);
  CHECK(a[0].median_l2_error < a[1].median_l2_error);  // more sub-pixel sources hurt
  CHECK_THROWS_AS(runErrorSweep({0.5}, {1}, 0, psf, bright, 10.0, 400.0, 1),
                  std::invalid_argument);
}

TEST_CASE("selection matrix assigns samples to nearest pixels") {
  const ImagingConfig grid = singlePlaneGrid(8, 8, 0.160, 0.026);
  const double ps = grid.pixel_size;

  SUBCASE("unique assignments give orthonormal columns") {
    const std::vector<Eigen::Vector3d> samples = {
        onPlane(grid, 1.5 * ps, 1.5 * ps), onPlane(grid, 3.6 * ps, 2.4 * ps),
        onPlane(grid, 6.2 * ps, 5.8 * ps)};
    const SelectionMatrix sel = nnSelectionMatrix(samples, grid);
    CHECK(!sel.has_duplicate_columns);
    const Eigen::MatrixXd gram = sel.S.transpose() * sel.S;
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).lpNorm<Eigen::Infinity>() == 0.0);
    for (Eigen::Index j = 0; j < sel.S.cols(); ++j) CHECK(sel.S.col(j).sum() == 1.0);
  }

  SUBCASE("shared pixels are flagged and make the composite ill-posed") {
    const std::vector<Eigen::Vector3d> samples = {
        onPlane(grid, 3.52 * ps, 3.52 * ps), onPlane(grid, 3.58 * ps, 3.55 * ps)};
    const SelectionMatrix sel = nnSelectionMatrix(samples, grid);
    CHECK(sel.has_duplicate_columns);

    // Digital convolution matrix: point sources at every pixel centre.
    std::vector<Eigen::Vector3d> all_centres;
    for (int k = 0; k < grid.nPixels(); ++k) all_centres.push_back(grid.pixelCentre(k));
    const auto digital = assemblePointSourceMatrix(all_centres, truncatedPsf(), grid);
    CHECK(rcn(Eigen::MatrixXd(digital.M * sel.S)) < 1e-12);
  }
}
