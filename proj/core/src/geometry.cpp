#include "sphcov/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sphcov/rng.hpp"

namespace sphcov {

SphericalPoint make_unit(double x, double y, double z) {
  const double norm = std::sqrt(x * x + y * y + z * z);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("make_unit: zero or non-finite vector");
  }
  return {x / norm, y / norm, z / norm};
}

bool is_unit(const SphericalPoint& p, double tol) {
  const double sq = p.x * p.x + p.y * p.y + p.z * p.z;
  return std::abs(sq - 1.0) <= tol;
}

double dot(const SphericalPoint& u, const SphericalPoint& v) {
  const double t = u.x * v.x + u.y * v.y + u.z * v.z;
  if (t > 1.0) return 1.0;
  if (t < -1.0) return -1.0;
  return t;
}

double angle(const SphericalPoint& u, const SphericalPoint& v) {
  return std::acos(dot(u, v));
}

void validate_grid(const SphereGrid& grid) {
  if (grid.nodes.size() != grid.weights.size()) {
    throw std::invalid_argument("grid: node/weight size mismatch");
  }
  double total = 0.0;
  for (double w : grid.weights) {
    if (!(w > 0.0)) throw std::invalid_argument("grid: nonpositive weight");
    total += w;
  }
  if (std::abs(total - kFourPi) > 1e-9) {
    throw std::invalid_argument("grid: weights sum to " +
                                std::to_string(total) + ", expected 4 pi");
  }
}

std::vector<SphericalPoint> sample_uniform_sphere(std::size_t count,
                                                  std::uint64_t seed) {
  if (count == 0) {
    throw std::invalid_argument("sample_uniform_sphere: count must be >= 1");
  }
  RandomStream rng(seed);
  std::vector<SphericalPoint> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Normalized 3-d standard Gaussian vector is exactly uniform.
    double x, y, z, norm;
    do {
      x = rng.gauss();
      y = rng.gauss();
      z = rng.gauss();
      norm = std::sqrt(x * x + y * y + z * z);
    } while (norm < 1e-12);
    points.push_back({x / norm, y / norm, z / norm});
  }
  return points;
}

SphereGrid fibonacci_grid(std::size_t n_nodes) {
  if (n_nodes < 2) {
    throw std::invalid_argument("fibonacci_grid: need at least 2 nodes");
  }
  SphereGrid grid;
  grid.nodes.reserve(n_nodes);
  grid.weights.assign(n_nodes, kFourPi / static_cast<double>(n_nodes));
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const double z =
        1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n_nodes);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double lon = golden_angle * static_cast<double>(i);
    grid.nodes.push_back({rho * std::cos(lon), rho * std::sin(lon), z});
  }
  return grid;
}

}  // namespace sphcov
