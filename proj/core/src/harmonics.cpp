#include "sphcov/harmonics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphcov {

double legendre_p(int degree, double t) {
  if (degree < 0) throw std::invalid_argument("legendre_p: negative degree");
  if (t > 1.0 || t < -1.0 || !std::isfinite(t)) {
    throw std::domain_error("legendre_p: t outside [-1, 1]");
  }
  if (degree == 0) return 1.0;
  double prev = 1.0;  // P_0
  double cur = t;     // P_1
  for (int l = 1; l < degree; ++l) {
    const double next =
        ((2.0 * l + 1.0) * t * cur - static_cast<double>(l) * prev) /
        static_cast<double>(l + 1);
    prev = cur;
    cur = next;
  }
  return cur;
}

namespace {

// Fully normalized associated Legendre values N_{l,m}(cos_theta) for fixed m
// and l = m..l_max, such that Y_{l,0} = N_{l,0} and
// Y_{l,m} = sqrt(2) N_{l,|m|} {cos,sin}(|m| phi). Stable upward l-recursion.
void normalized_assoc_legendre(int m, int l_max, double cos_theta,
                               double sin_theta, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(l_max - m + 1), 0.0);
  // N_{m,m} = sqrt((2m+1)/(4 pi)) sqrt((2m-1)!!/(2m)!!) sin^m(theta)
  double pmm = std::sqrt(1.0 / (4.0 * kPi));
  for (int k = 1; k <= m; ++k) {
    pmm *= sin_theta * std::sqrt((2.0 * k + 1.0) / (2.0 * k));
  }
  out[0] = pmm;
  if (l_max == m) return;
  double pm1 = std::sqrt(2.0 * m + 3.0) * cos_theta * pmm;
  out[1] = pm1;
  for (int l = m + 2; l <= l_max; ++l) {
    const double a = std::sqrt((4.0 * l * l - 1.0) /
                               (static_cast<double>(l) * l - m * m));
    const double b =
        std::sqrt(((static_cast<double>(l) - 1.0) * (l - 1.0) - m * m) /
                  (4.0 * (static_cast<double>(l) - 1.0) * (l - 1.0) - 1.0));
    const double next = a * (cos_theta * pm1 - b * pmm);
    pmm = pm1;
    pm1 = next;
    out[static_cast<std::size_t>(l - m)] = next;
  }
}

}  // namespace

double real_sph_harm(const HarmonicIndex& idx, const SphericalPoint& u) {
  const int l = idx.degree;
  const int m = idx.order;
  if (l < 0 || l > kMaxHarmonicDegree || std::abs(m) > l) {
    throw std::invalid_argument("real_sph_harm: invalid index (l=" +
                                std::to_string(l) + ", m=" +
                                std::to_string(m) + ")");
  }
  const double cos_theta = u.z;
  const double sin_theta = std::sqrt(std::max(0.0, u.x * u.x + u.y * u.y));
  const int am = std::abs(m);
  std::vector<double> vals;
  normalized_assoc_legendre(am, l, cos_theta, sin_theta, vals);
  const double nlm = vals.back();
  if (m == 0) return nlm;
  const double phi = std::atan2(u.y, u.x);
  const double s = std::sqrt(2.0);
  return m > 0 ? s * nlm * std::cos(am * phi) : s * nlm * std::sin(am * phi);
}

double addition_theorem_sum(int degree, const SphericalPoint& u,
                            const SphericalPoint& v) {
  double sum = 0.0;
  for (int m = -degree; m <= degree; ++m) {
    sum += real_sph_harm({degree, m}, u) * real_sph_harm({degree, m}, v);
  }
  return sum;
}

}  // namespace sphcov
