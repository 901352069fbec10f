#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "adsm/cost_volume.hpp"
#include "oracles.hpp"

using namespace adsm;

TEST_CASE("census volume shape and invalid band") {
  std::mt19937_64 rng(1);
  const ImagePlane img = oracle::random_plane(20, 8, rng);
  const CostVolume v = build_dsi_census(img, img, 5, 6);
  CHECK(v.rows() == 8);
  CHECK(v.cols() == 20);
  CHECK(v.levels() == 7);
  CHECK(v.max_disparity() == 6);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 20; ++x)
      for (int d = 0; d <= 6; ++d) CHECK(is_invalid_cost(v(y, x, d)) == (x - d < 0));
}

TEST_CASE("census of identical views has a zero d=0 plane") {
  std::mt19937_64 rng(2);
  const ImagePlane img = oracle::random_plane(16, 9, rng);
  const CostVolume v = build_dsi_census(img, img, 3, 4);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 16; ++x) CHECK(v(y, x, 0) == 0.0);
}

TEST_CASE("census recovers an exact shift in the interior") {
  std::mt19937_64 rng(3);
  const ImagePlane right = oracle::random_plane(40, 12, rng);
  ImagePlane left(40, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 40; ++x) left(x, y) = right(std::max(0, x - 4), y);
  const CostVolume v = build_dsi_census(left, right, 5, 8);
  // window of radius 2 must stay clear of the border and of the replicated left strip
  for (int y = 2; y < 10; ++y)
    for (int x = 4 + 2 + 2; x < 38; ++x) CHECK(v(y, x, 4) == 0.0);
}

TEST_CASE("census matches a brute-force bit count on 7x7 images") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    ImagePlane left(7, 7), right(7, 7);
    std::uniform_int_distribution<int> level(0, 4);  // few levels, so ties happen
    for (double& v : left.values()) v = level(rng) / 4.0;
    for (double& v : right.values()) v = level(rng) / 4.0;
    const CostVolume v = build_dsi_census(left, right, 5, 3);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x)
        for (int d = 0; d <= std::min(3, x); ++d)
          CHECK(v(y, x, d) == oracle::census_cost(left, right, x, y, d, 5));
  }
}

TEST_CASE("census costs are integers within the window bit count") {
  std::mt19937_64 rng(5);
  const ImagePlane a = oracle::random_plane(30, 10, rng);
  const ImagePlane b = oracle::random_plane(30, 10, rng);
  for (int window : {3, 7, 9}) {
    const CostVolume v = build_dsi_census(a, b, window, 10);
    for (double c : v.values()) {
      if (is_invalid_cost(c)) continue;
      CHECK(c == std::floor(c));
      CHECK(c >= 0.0);
      CHECK(c <= window * window - 1);
    }
  }
}

TEST_CASE("census argument errors") {
  const ImagePlane img(6, 6, 0.5);
  CHECK_THROWS_AS(build_dsi_census(img, img, 4, 2), DomainError);
  CHECK_THROWS_AS(build_dsi_census(img, img, 1, 2), DomainError);
  CHECK_THROWS_AS(build_dsi_census(img, img, 7, 2), ShapeError);
  CHECK_THROWS_AS(build_dsi_census(img, ImagePlane(7, 6), 3, 2), ShapeError);
}

TEST_CASE("SAD matches a direct window sum") {
  std::mt19937_64 rng(6);
  const ImagePlane a = oracle::random_plane(15, 9, rng);
  const ImagePlane b = oracle::random_plane(15, 9, rng);
  const CostVolume v = build_dsi_sad(a, b, 3, 4);
  auto at = [](const ImagePlane& p, int x, int y) {
    return p(std::clamp(x, 0, p.width() - 1), std::clamp(y, 0, p.height() - 1));
  };
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 15; ++x)
      for (int d = 0; d <= std::min(4, x); ++d) {
        // per-pixel differences are formed on the shifted grid, then box-summed
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = std::clamp(x + dx, d, 14);
            const int yy = std::clamp(y + dy, 0, 8);
            s += std::abs(at(a, xx, yy) - at(b, xx - d, yy));
          }
        CHECK(v(y, x, d) == doctest::Approx(s).epsilon(1e-12));
      }
}

TEST_CASE("learned cost with a unit 1x1 network is the negated intensity product") {
  ConvLayer unit({1}, 1, 1, false);
  unit.weights = {1.0};
  const FeatureExtractor net({unit});
  std::mt19937_64 rng(7);
  const ImagePlane l = oracle::random_plane(12, 5, rng);
  const ImagePlane r = oracle::random_plane(12, 5, rng);
  const CostVolume v = build_dsi_learned(l, r, net, 5);
  REQUIRE(v.cols() == 12);
  REQUIRE(v.rows() == 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 12; ++x)
      for (int d = 0; d <= 5; ++d) {
        if (x - d < 0) {
          CHECK(is_invalid_cost(v(y, x, d)));
        } else {
          CHECK(v(y, x, d) == -l(x, y) * r(x - d, y));
        }
      }
}

TEST_CASE("learned cost grid is the valid interior and d=0 of a self pair is -|f|^2") {
  const FeatureExtractor net = build_network("2Conv(3)", 4, 3);
  std::mt19937_64 rng(8);
  const ImagePlane img = oracle::random_plane(20, 11, rng);
  const CostVolume v = build_dsi_learned(img, img, net, 6);
  CHECK(v.cols() == 20 - 4);
  CHECK(v.rows() == 11 - 4);
  CHECK(v.levels() == 7);
  const Tensor f = net.forward(to_tensor(img));
  for (int y = 0; y < v.rows(); ++y)
    for (int x = 0; x < v.cols(); ++x) {
      double n2 = 0.0;
      for (double c : f.at(y, x)) n2 += c * c;
      CHECK(v(y, x, 0) == doctest::Approx(-n2).epsilon(1e-12));
    }
  CHECK_THROWS_AS(build_dsi_learned(ImagePlane(4, 4), ImagePlane(4, 4), net, 2), GeometryError);
}

TEST_CASE("right-view volume is an index shift of the left one") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 10);
  CostVolume left(5, 14, 6);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 14; ++x)
      for (int d = 0; d < 6; ++d) left(y, x, d) = x - d < 0 ? CostVolume::kInvalidCost : u(rng);
  const CostVolume right = derive_right_dsi(left);
  CHECK(right(3, 6, 4) == left(3, 10, 4));
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 14; ++x) {
      CHECK(right(y, x, 0) == left(y, x, 0));
      for (int d = 0; d < 6; ++d) {
        if (x + d >= 14) CHECK(is_invalid_cost(right(y, x, d)));
        else CHECK(right(y, x, d) == left(y, x + d, d));
      }
    }
  CHECK(is_invalid_cost(right(0, 13, 5)));
  // shifting back restores every finite cell of the original
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 14; ++x)
      for (int d = 0; d < 6; ++d)
        if (!is_invalid_cost(left(y, x, d))) CHECK(right(y, x - d, d) == left(y, x, d));
}

TEST_CASE("DSI dump round trip") {
  CostVolume v(2, 3, 4);
  double k = 0.0;
  for (double& c : v.values()) c = (k += 0.5);
  v(1, 0, 3) = CostVolume::kInvalidCost;
  std::stringstream buf;
  write_dsi(buf, v);
  CHECK(buf.str().size() == 12 + 24 * 4);
  const CostVolume back = read_dsi(buf);
  CHECK(back == v);
  std::istringstream truncated(buf.str().substr(0, 20));
  CHECK_THROWS_AS(read_dsi(truncated), IoError);
}
