#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sphcov {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kFourPi = 4.0 * kPi;

// Unit vector on the 2-sphere.
struct SphericalPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
};

inline bool operator==(const SphericalPoint& a, const SphericalPoint& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}

// Normalizes an arbitrary nonzero 3-vector onto the sphere.
SphericalPoint make_unit(double x, double y, double z);

bool is_unit(const SphericalPoint& p, double tol = 1e-12);

// Inner product clamped to [-1, 1]; downstream arccos and kernel evaluations
// must never see 1 + eps.
double dot(const SphericalPoint& u, const SphericalPoint& v);

// Geodesic angle in [0, pi].
double angle(const SphericalPoint& u, const SphericalPoint& v);

// Quadrature grid: nodes with positive weights (steradians) summing to 4 pi.
struct SphereGrid {
  std::vector<SphericalPoint> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

void validate_grid(const SphereGrid& grid);

// count i.i.d. uniform points, deterministic in seed. Throws on count == 0.
std::vector<SphericalPoint> sample_uniform_sphere(std::size_t count,
                                                  std::uint64_t seed);

// Spherical Fibonacci lattice with equal weights 4 pi / n; n >= 2.
SphereGrid fibonacci_grid(std::size_t n_nodes);

}  // namespace sphcov
