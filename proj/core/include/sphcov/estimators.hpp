#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sphcov/gram.hpp"
#include "sphcov/kernels.hpp"
#include "sphcov/simulation.hpp"
#include "sphcov/solver.hpp"

namespace sphcov {

// Mean estimate mu(u) = sum_i r_i^{-1/2} sum_j alpha_ij psi(<u, u_ij>).
struct MeanEstimate {
  std::vector<SphericalPoint> locations;  // replicate-major
  Eigen::VectorXd alpha;                  // representer weights
  Eigen::VectorXd eval_weights;           // alpha_ij / sqrt(r_i)
  std::vector<int> r_list;
  ZonalKernel kernel = ZonalKernel::matern(2.5, 0.4);
  double eta = 0.0;
};

// Second-order moment estimate
//   R(u, v) = sum_m eval_weights[m] psi(<u, x_m>) psi(<v, y_m>),
// with pairs in vec_index order (lag 0) or time-block order (lag h != 0).
// beta holds the solver-convention weights; on the constant-r fast path the
// normalization is already folded in and eval_weights == beta.
struct SecondMomentEstimate {
  std::vector<SphericalPoint> x;
  std::vector<SphericalPoint> y;
  Eigen::VectorXd beta;
  Eigen::VectorXd eval_weights;
  ZonalKernel kernel = ZonalKernel::matern(2.5, 0.4);
  double eta = 0.0;
  int lag = 0;
  int n = 0;
  int r = -1;  // -1 for ragged replicate sizes
  // Negative-lag estimates evaluate the transpose of the stored |lag| fit.
  bool transposed = false;

  std::int64_t pair_count() const {
    return static_cast<std::int64_t>(eval_weights.size());
  }
};

struct FitReport {
  std::string path;  // "dense-direct", "sparse-cg", "matrix-free-cg"
  double j_nnz_fraction = -1.0;
  std::int64_t h_nnz = -1;  // explicit H only
  std::int64_t system_dim = 0;
  std::int64_t cg_iterations = 0;
  double cg_rel_residual = 0.0;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
  // Extreme-eigenvalue ratio of the raw mean Gram (dense fits on systems up
  // to 4096 unknowns; -1 when skipped). Flagged when above 1e14.
  double gram_condition_ratio = -1.0;
  bool ill_conditioned = false;
};

// Solves (G + eta n/(4 pi) I) alpha = y, y_ij = w_ij / sqrt(r_i), densely.
MeanEstimate fit_mean(const Dataset& data, const ZonalKernel& kernel,
                      double eta, FitReport* report = nullptr);

double eval_mean(const MeanEstimate& est, const SphericalPoint& u);

// Constant-r fast path: CG on the unnormalized Khatri-Rao system
// (H + eta L/(4 pi)^2 I) beta = z, z_l = w_ij w_ik, L = n r (r-1); explicit
// sparse H while it fits the memory budget, block matrix-free beyond. Ragged
// path: dense solve of the normalized system with the ridge eta n/(4 pi)^2.
// Both yield the same evaluable estimate on constant-r data.
SecondMomentEstimate fit_second_moment(const Dataset& data,
                                       const ZonalKernel& kernel, double eta,
                                       const SolverConfig& cfg = {},
                                       FitReport* report = nullptr);

double eval_second_moment(const SecondMomentEstimate& est,
                          const SphericalPoint& u, const SphericalPoint& v);

// C(u, v) = R(u, v) - mu(u) mu(v); both estimates from the same dataset.
double eval_covariance(const SecondMomentEstimate& r_est,
                       const MeanEstimate& m_est, const SphericalPoint& u,
                       const SphericalPoint& v);

// Lag-h second-moment estimator for time-ordered, constant-r data. Pairs
// (U_{t+h,j}, U_{t,k}) over t = 1..n-h keep the diagonal (noise at distinct
// times is independent); system (H_h + eta (n-h) r^2/(4 pi)^2 I) beta = z_h
// over the (t+h, t) block band, solved matrix-free. h = 0 delegates to
// fit_second_moment; h < 0 returns the transpose evaluator of the |h| fit.
// Requires |h| <= n - 2.
SecondMomentEstimate fit_lag_autocov(const Dataset& data,
                                     const ZonalKernel& kernel, double eta,
                                     int lag, const SolverConfig& cfg = {},
                                     FitReport* report = nullptr);

}  // namespace sphcov
