#include <doctest.h>

#include <cmath>
#include <set>

#include "sphcov/geometry.hpp"
#include "sphcov/harmonics.hpp"
#include "support.hpp"

using namespace sphcov;

TEST_CASE("uniform sampling produces unit vectors, deterministically") {
  const auto pts = sample_uniform_sphere(1, 42);
  REQUIRE(pts.size() == 1);
  CHECK(is_unit(pts[0]));

  const auto a = sample_uniform_sphere(50, 7);
  const auto b = sample_uniform_sphere(50, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(is_unit(a[i]));
  }
  CHECK_THROWS_AS(sample_uniform_sphere(0, 1), std::invalid_argument);
}

TEST_CASE("sample mean of many uniform points is near zero") {
  // 3 sigma of ||mean|| for 10^4 points is well under 0.05.
  const auto pts = sample_uniform_sphere(10000, 7);
  double sx = 0, sy = 0, sz = 0;
  for (const auto& p : pts) {
    sx += p.x;
    sy += p.y;
    sz += p.z;
  }
  const double n = static_cast<double>(pts.size());
  const double norm =
      std::sqrt(sx * sx + sy * sy + sz * sz) / n;
  CHECK(norm < 0.05);
}

TEST_CASE("z-coordinate of uniform samples is uniform (chi-squared)") {
  const auto pts = sample_uniform_sphere(100000, 11);
  int bins[20] = {};
  for (const auto& p : pts) {
    int b = static_cast<int>((p.z + 1.0) / 2.0 * 20.0);
    if (b == 20) b = 19;
    ++bins[b];
  }
  const double expected = static_cast<double>(pts.size()) / 20.0;
  double chi2 = 0.0;
  for (int b = 0; b < 20; ++b) {
    const double d = bins[b] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < test::kChi2Crit19At001);
}

TEST_CASE("dot clamps and is exact on axes") {
  const SphericalPoint ex{1, 0, 0}, ey{0, 1, 0};
  CHECK(dot(ex, ex) == 1.0);
  CHECK(dot(ex, {-1, 0, 0}) == -1.0);
  CHECK(dot(ex, ey) == 0.0);
  // Slightly denormalized inputs stay in [-1, 1].
  const SphericalPoint p{1.0 + 5e-13, 0, 0};
  CHECK(dot(p, p) == 1.0);
}

TEST_CASE("fibonacci grid weights and node separation") {
  const SphereGrid tiny = fibonacci_grid(2);
  CHECK(tiny.weights[0] == doctest::Approx(2 * kPi));
  CHECK(tiny.weights[1] == doctest::Approx(2 * kPi));
  CHECK_THROWS_AS(fibonacci_grid(1), std::invalid_argument);

  const SphereGrid grid = fibonacci_grid(1000);
  validate_grid(grid);
  double total = 0.0;
  for (double w : grid.weights) total += w;
  CHECK(std::abs(total - kFourPi) < 1e-9);
  double min_angle = kPi;
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = i + 1; j < 200; ++j) {
      min_angle = std::min(min_angle, angle(grid.nodes[i], grid.nodes[j]));
    }
  }
  CHECK(min_angle > 0.0);
  // quadrature of the constant 1
  CHECK(std::abs(total - kFourPi) < 1e-9);
}

TEST_CASE("fibonacci grid integrates low-degree harmonics to near zero") {
  const SphereGrid grid = fibonacci_grid(2000);
  for (int l = 1; l <= 5; ++l) {
    for (int m = -l; m <= l; ++m) {
      double acc = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        acc += grid.weights[i] * real_sph_harm({l, m}, grid.nodes[i]);
      }
      CHECK(std::abs(acc) < 0.05);
    }
  }
}
