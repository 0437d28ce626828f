#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sphcov/estimators.hpp"

namespace sphcov {

struct CVConfig {
  int k_folds = 4;
  std::vector<double> eta_grid;  // positive, nondecreasing
  std::uint64_t shuffle_seed = 0;
};

struct CVReport {
  std::vector<double> eta_grid;
  std::vector<double> mean_scores;  // out-of-sample MSE per eta
  Eigen::MatrixXd per_fold;         // k_folds x |eta_grid|, NaN = failed fold
  double selected_eta = 0.0;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::string> warnings;
};

// K-fold cross-validation over eta for the second-moment estimator on
// constant-r data. The pair entries of z are shuffled by a seed-derived
// permutation and split into near-equal folds; training deletes the held-out
// rows and columns of H (ridge constant unchanged), and the held-out MSE of
// w_ij w_ik - R_eta(U_ij, U_ik) is averaged over folds. Ties select the
// smaller eta.
CVReport kfold_cv_second_moment(const Dataset& data, const ZonalKernel& kernel,
                                const CVConfig& cfg,
                                const SolverConfig& solver = {});

}  // namespace sphcov
