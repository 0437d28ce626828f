#pragma once

// Shared fixtures and independent oracles. Everything here recomputes
// expected values from first principles (literal formulas, brute-force
// sums) so the tests do not share code paths with the library internals
// they check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sphcov/estimators.hpp"
#include "sphcov/geometry.hpp"
#include "sphcov/kernels.hpp"
#include "sphcov/rng.hpp"
#include "sphcov/simulation.hpp"

namespace sphcov::test {

inline SourceModel demo_model(std::uint64_t model_seed = 20210) {
  return make_source_model(sample_uniform_sphere(5, model_seed),
                           default_weight_cov(), matern_zonal(2.5, 0.4));
}

inline Dataset demo_dataset(int n, int r, double sigma = 0.1,
                            std::uint64_t seed = 1) {
  return simulate_dataset(demo_model(), n, r, sigma, seed);
}

// Literal Theorem-4.2 Gram: quadruple loop over pair enumerations, no reuse
// of the library assembly. Pair order matches vec_index (k-major).
inline Eigen::MatrixXd oracle_dense_H(const Dataset& data,
                                      const ZonalKernel& kernel) {
  struct Pair {
    SphericalPoint x, y;
    double norm;
  };
  std::vector<Pair> pairs;
  for (const auto& rep : data.replicates) {
    const int ri = static_cast<int>(rep.locations.size());
    for (int k = 0; k < ri; ++k) {
      for (int j = 0; j < ri; ++j) {
        if (j == k) continue;
        pairs.push_back({rep.locations[(std::size_t)j],
                         rep.locations[(std::size_t)k],
                         1.0 / std::sqrt(double(ri) * (ri - 1))});
      }
    }
  }
  Eigen::MatrixXd h(pairs.size(), pairs.size());
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    for (std::size_t b = 0; b < pairs.size(); ++b) {
      h(a, b) = kernel(dot(pairs[a].x, pairs[b].x)) *
                kernel(dot(pairs[a].y, pairs[b].y)) * pairs[a].norm *
                pairs[b].norm;
    }
  }
  return h;
}

// Unnormalized variant (products only), the fast-path system's Gram.
inline Eigen::MatrixXd oracle_dense_H_unnormalized(const Dataset& data,
                                                   const ZonalKernel& kernel) {
  Eigen::MatrixXd h = oracle_dense_H(data, kernel);
  const int r = data.r();
  return h * (static_cast<double>(r) * (r - 1));
}

inline Eigen::VectorXd oracle_z_unnormalized(const Dataset& data) {
  std::vector<double> z;
  for (const auto& rep : data.replicates) {
    const int ri = static_cast<int>(rep.locations.size());
    for (int k = 0; k < ri; ++k) {
      for (int j = 0; j < ri; ++j) {
        if (j == k) continue;
        z.push_back(rep.values[(std::size_t)j] * rep.values[(std::size_t)k]);
      }
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(z.data(),
                                           static_cast<Eigen::Index>(z.size()));
}

// Representer-parameterized objective of the penalized second-moment fit,
// (4 pi)^2/L ||z - H beta||^2 + eta beta^T H beta, with H unnormalized.
inline double oracle_objective(const Eigen::MatrixXd& h_unnorm,
                               const Eigen::VectorXd& z, double eta,
                               const Eigen::VectorXd& beta) {
  const double c = kFourPi * kFourPi / static_cast<double>(z.size());
  const Eigen::VectorXd resid = z - h_unnorm * beta;
  return c * resid.squaredNorm() + eta * beta.dot(h_unnorm * beta);
}

inline Eigen::VectorXd oracle_gradient(const Eigen::MatrixXd& h_unnorm,
                                       const Eigen::VectorXd& z, double eta,
                                       const Eigen::VectorXd& beta) {
  const double c = kFourPi * kFourPi / static_cast<double>(z.size());
  return -2.0 * c * h_unnorm * (z - h_unnorm * beta) +
         2.0 * eta * h_unnorm * beta;
}

// Kolmogorov-Smirnov distance against a N(0, sd) marginal.
inline double ks_normal_distance(std::vector<double> samples, double sd) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf =
        0.5 * (1.0 + std::erf(samples[i] / (sd * std::sqrt(2.0))));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
  }
  return d;
}

// chi^2_{19} critical value at the 0.1% level (20 equal bins).
inline constexpr double kChi2Crit19At001 = 43.8202;
// KS critical scale at the 0.1% level: D_crit = 1.9495 / sqrt(N).
inline constexpr double kKsCritScaleAt001 = 1.9495;

}  // namespace sphcov::test
