#include "sphcov/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "sphcov/errors.hpp"
#include "sphcov/geometry.hpp"

namespace sphcov {

SpectralOperator make_spectral_operator(std::vector<double> coeffs,
                                        double growth_order) {
  if (coeffs.empty()) {
    throw std::invalid_argument("spectral operator: empty coefficients");
  }
  SpectralOperator op;
  op.growth_order = growth_order;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t l = 0; l < coeffs.size(); ++l) {
    const double d = coeffs[l];
    if (d == 0.0 || !std::isfinite(d)) {
      throw std::invalid_argument(
          "spectral operator: D_l must be nonzero and finite (l=" +
          std::to_string(l) + ")");
    }
    const double ratio =
        std::abs(d) / std::pow(1.0 + static_cast<double>(l), growth_order);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  op.coeffs = std::move(coeffs);
  op.ratio_lo = lo;
  op.ratio_hi = hi;
  return op;
}

SpectralOperator sobolev_operator(double p, int l_max) {
  if (!(p > 1.0)) {
    throw std::invalid_argument(
        "sobolev_operator: p must exceed 1 (the native space is a RKHS only "
        "for p > 1)");
  }
  if (l_max < 1) throw std::invalid_argument("sobolev_operator: l_max < 1");
  std::vector<double> coeffs(static_cast<std::size_t>(l_max) + 1);
  for (int l = 0; l <= l_max; ++l) {
    coeffs[static_cast<std::size_t>(l)] =
        std::pow(1.0 + static_cast<double>(l) * (l + 1.0), p / 2.0);
  }
  return make_spectral_operator(std::move(coeffs), p);
}

ZonalKernel ZonalKernel::series(std::vector<double> legendre_coeffs,
                                double growth_order, double tail_bound) {
  if (legendre_coeffs.empty()) {
    throw std::invalid_argument("zonal kernel: empty series");
  }
  ZonalKernel k;
  k.kind_ = Kind::kSeries;
  k.coeffs_ = std::move(legendre_coeffs);
  k.growth_order_ = growth_order;
  k.tail_bound_ = tail_bound;
  return k;
}

ZonalKernel ZonalKernel::matern(double nu, double eps) {
  if (nu != 0.5 && nu != 1.5 && nu != 2.5) {
    throw std::invalid_argument(
        "matern kernel: closed forms exist for nu in {1/2, 3/2, 5/2}, got " +
        std::to_string(nu));
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("matern kernel: eps must be positive");
  }
  ZonalKernel k;
  k.kind_ = Kind::kMatern;
  k.nu_ = nu;
  k.eps_ = eps;
  k.growth_order_ = 2.0 * (nu + 1.0);
  return k;
}

double ZonalKernel::operator()(double t) const {
  if (t > 1.0) t = 1.0;
  if (t < -1.0) t = -1.0;
  if (kind_ == Kind::kMatern) {
    const double s = std::sqrt(std::max(0.0, 2.0 - 2.0 * t));
    if (nu_ == 0.5) {
      return std::exp(-s / eps_);
    }
    if (nu_ == 1.5) {
      const double a = std::sqrt(3.0) * s / eps_;
      return (1.0 + a) * std::exp(-a);
    }
    const double a = std::sqrt(5.0) * s / eps_;
    return (1.0 + a + 5.0 * s * s / (3.0 * eps_ * eps_)) * std::exp(-a);
  }
  // Forward Legendre recurrence, one pass over the series.
  double acc = coeffs_[0];
  if (coeffs_.size() == 1) return acc;
  double prev = 1.0;
  double cur = t;
  acc += coeffs_[1] * t;
  for (std::size_t l = 1; l + 1 < coeffs_.size(); ++l) {
    const double next =
        ((2.0 * l + 1.0) * t * cur - static_cast<double>(l) * prev) /
        static_cast<double>(l + 1);
    prev = cur;
    cur = next;
    acc += coeffs_[l + 1] * next;
  }
  return acc;
}

ZonalKernel green_kernel_dstar_d(const SpectralOperator& op) {
  const int l_max = op.l_max();
  std::vector<double> coeffs(static_cast<std::size_t>(l_max) + 1);
  double value_at_one = 0.0;
  for (int l = 0; l <= l_max; ++l) {
    const double d = op.coeffs[static_cast<std::size_t>(l)];
    const double a = (2.0 * l + 1.0) / (kFourPi * d * d);
    coeffs[static_cast<std::size_t>(l)] = a;
    value_at_one += a;
  }
  // Tail of sum_{l>L} (2l+1)/(4 pi D_l^2) with |D_l| >= ratio_lo (1+l)^p:
  // bounded by the integral of 2 (1+x)^{1-2p} plus its first term.
  const double p2 = 2.0 * op.growth_order;
  double tail = std::numeric_limits<double>::infinity();
  if (p2 > 2.0) {
    const double c = 2.0 / (kFourPi * op.ratio_lo * op.ratio_lo);
    const double edge = 1.0 + static_cast<double>(l_max);
    tail = c * (std::pow(edge, 2.0 - p2) / (p2 - 2.0) +
                std::pow(edge + 1.0, 1.0 - p2));
  }
  if (!(tail <= 1e-6 * value_at_one)) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "green_kernel_dstar_d: truncation tail estimate %.3e "
                  "exceeds 1e-6 of psi(1) = %.6g; increase l_max or growth "
                  "order",
                  tail, value_at_one);
    throw numerical_error(msg);
  }
  return ZonalKernel::series(std::move(coeffs), op.growth_order, tail);
}

ZonalKernel matern_zonal(double nu, double eps) {
  return ZonalKernel::matern(nu, eps);
}

void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  // Newton iteration on P_n from the Chebyshev-like initial guess; the rule
  // is symmetric, so only half the roots are computed.
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double prev = 1.0;
      double cur = x;
      for (int l = 1; l < n; ++l) {
        const double next = ((2.0 * l + 1.0) * x * cur - l * prev) / (l + 1.0);
        prev = cur;
        cur = next;
      }
      dp = n * (x * cur - prev) / (x * x - 1.0);
      const double dx = cur / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
}

std::vector<double> zonal_spectral_coeffs(const ZonalKernel& kernel,
                                          int l_max) {
  if (l_max < 0) throw std::invalid_argument("zonal_spectral_coeffs: l_max");
  const int n_nodes = std::max(4 * (l_max + 1), 64);
  std::vector<double> t, w;
  gauss_legendre(n_nodes, t, w);

  std::vector<double> psi(t.size());
  for (std::size_t q = 0; q < t.size(); ++q) psi[q] = kernel(t[q]);

  std::vector<double> coeffs(static_cast<std::size_t>(l_max) + 1, 0.0);
  // Single sweep of the Legendre recurrence per quadrature node.
  std::vector<double> prev(t.size(), 1.0), cur(t.size());
  for (std::size_t q = 0; q < t.size(); ++q) {
    coeffs[0] += w[q] * psi[q];
    cur[q] = t[q];
  }
  for (int l = 1; l <= l_max; ++l) {
    double acc = 0.0;
    for (std::size_t q = 0; q < t.size(); ++q) {
      acc += w[q] * psi[q] * cur[q];
    }
    coeffs[static_cast<std::size_t>(l)] = acc;
    if (l < l_max) {
      for (std::size_t q = 0; q < t.size(); ++q) {
        const double next =
            ((2.0 * l + 1.0) * t[q] * cur[q] - static_cast<double>(l) * prev[q]) /
            static_cast<double>(l + 1);
        prev[q] = cur[q];
        cur[q] = next;
      }
    }
  }
  double scale = 0.0;
  for (double& c : coeffs) {
    c *= 2.0 * kPi;
    scale = std::max(scale, std::abs(c));
  }
  for (std::size_t l = 0; l < coeffs.size(); ++l) {
    if (coeffs[l] < -1e-10 * scale) {
      throw numerical_error(
          "zonal_spectral_coeffs: coefficient c_" + std::to_string(l) + " = " +
          std::to_string(coeffs[l]) +
          " is negative; kernel is not positive semi-definite");
    }
  }
  return coeffs;
}

}  // namespace sphcov
