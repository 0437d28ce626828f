#pragma once

#include <Eigen/Dense>

#include "sphcov/estimators.hpp"
#include "sphcov/geometry.hpp"
#include "sphcov/simulation.hpp"

namespace sphcov {

// Estimate discretized on a spherical grid: N x N matrix of pair values for
// bivariate fields, N x 1 for univariate ones.
struct GridField {
  SphereGrid grid;
  Eigen::MatrixXd values;
  bool bivariate = false;
};

GridField eval_on_grid(const MeanEstimate& est, const SphereGrid& grid);
GridField eval_on_grid(const SecondMomentEstimate& est,
                       const SphereGrid& grid);

// Ground-truth second moment of a source model on a grid.
GridField eval_truth_on_grid(const SourceModel& model, const SphereGrid& grid);

// Covariance field R - mu (x) mu on a grid.
GridField eval_covariance_on_grid(const SecondMomentEstimate& r_est,
                                  const MeanEstimate& m_est,
                                  const SphereGrid& grid);

struct PsdProjection {
  GridField field;
  double clipped_mass = 0.0;  // sum of |negative eigenvalues|
  int clipped_count = 0;      // eigenvalues below -tol
};

// Projects a symmetric bivariate field onto the PSD cone in the
// quadrature-weighted inner product: symmetrize, eigendecompose, clip
// negative eigenvalues to zero, reconstruct. Idempotent; the output's
// minimum eigenvalue is >= -tol up to roundoff.
PsdProjection project_psd(const GridField& field, double tol = 1e-10);

// Quadrature L2 distance: sqrt(sum_ij w_i w_j (a_ij - b_ij)^2) for bivariate
// fields, sqrt(sum_i w_i (a_i - b_i)^2) for univariate. Grids must match.
double l2_error(const GridField& a, const GridField& b);

double l2_norm(const GridField& a);

}  // namespace sphcov
