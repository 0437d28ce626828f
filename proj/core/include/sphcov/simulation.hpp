#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sphcov/geometry.hpp"
#include "sphcov/kernels.hpp"

namespace sphcov {

// Sparse-source random field X(u) = sum_q xi_q psi(<u, v_q>) with Gaussian
// weights xi ~ N(0, weight_cov).
struct SourceModel {
  std::vector<SphericalPoint> sources;
  Eigen::MatrixXd weight_cov;
  ZonalKernel kernel;

  int q() const { return static_cast<int>(sources.size()); }
};

// Validates: Q >= 1, pairwise distinct sources, weight_cov symmetric within
// 1e-12 and with min eigenvalue >= -1e-10 * trace.
SourceModel make_source_model(std::vector<SphericalPoint> sources,
                              Eigen::MatrixXd weight_cov, ZonalKernel kernel);

// The 5x5 weight covariance of the reference simulation setup.
Eigen::MatrixXd default_weight_cov();

// Random symmetric PSD matrix with unit-scale diagonal, for configurable Q.
Eigen::MatrixXd random_weight_cov(int q, std::uint64_t seed);

struct Replicate {
  std::vector<SphericalPoint> locations;
  std::vector<double> values;
};

// Replicate-indexed samples W_ij = X_i(U_ij) + eps_ij.
struct Dataset {
  std::vector<Replicate> replicates;
  double noise_sd = 0.0;
  bool time_ordered = false;

  int n() const { return static_cast<int>(replicates.size()); }
  std::size_t total_samples() const;
  bool constant_r() const;
  // Common replicate size; -1 when ragged.
  int r() const;
};

// Checks r_i >= 1 (>= 2 when for_covariance) and within-replicate distinct
// locations.
void validate_dataset(const Dataset& data, bool for_covariance);

double eval_field(const Eigen::VectorXd& weights, const SourceModel& model,
                  const SphericalPoint& u);

// E[X(u) X(v)] = sum_{p,q} R_pq psi(<u, v_p>) psi(<v, v_q>).
double true_second_moment(const SourceModel& model, const SphericalPoint& u,
                          const SphericalPoint& v);

// n i.i.d. replicates, r uniform locations each, N(0, sigma^2) noise.
// Deterministic in seed; replicate i draws only from substream (seed, i).
Dataset simulate_dataset(const SourceModel& model, int n, int r,
                         double noise_sd, std::uint64_t seed);

// Stationary functional AR(1): xi_{t+1} = a xi_t + sqrt(1-a^2) eta_t with
// eta_t ~ N(0, weight_cov), started from the marginal law, so the lag-h
// weight covariance is a^{|h|} weight_cov. Requires |a| < 1.
Dataset simulate_far1(const SourceModel& model, int n, int r, double noise_sd,
                      double ar_coeff, std::uint64_t seed);

}  // namespace sphcov
