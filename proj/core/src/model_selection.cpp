#include "sphcov/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sphcov/parallel.hpp"
#include "sphcov/rng.hpp"

namespace sphcov {

namespace {

inline std::int64_t local_offdiag(int j0, int k0, int r) {
  return static_cast<std::int64_t>(k0) * (r - 1) + j0 - (j0 > k0 ? 1 : 0);
}

std::vector<std::int32_t> shuffled_indices(std::int64_t count,
                                           std::uint64_t seed) {
  std::vector<std::int32_t> perm(static_cast<std::size_t>(count));
  std::iota(perm.begin(), perm.end(), 0);
  RandomStream rng(seed, 0xCF01Du);
  for (std::int64_t i = count - 1; i > 0; --i) {
    const std::uint64_t pick =
        rng.uniform_below(static_cast<std::uint64_t>(i) + 1);
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(pick)]);
  }
  return perm;
}

}  // namespace

CVReport kfold_cv_second_moment(const Dataset& data, const ZonalKernel& kernel,
                                const CVConfig& cfg,
                                const SolverConfig& solver) {
  validate_dataset(data, /*for_covariance=*/true);
  if (!data.constant_r()) {
    throw std::invalid_argument("cross-validation: constant r required");
  }
  if (cfg.eta_grid.empty()) {
    throw std::invalid_argument("cross-validation: empty eta grid");
  }
  for (std::size_t e = 0; e < cfg.eta_grid.size(); ++e) {
    if (!(cfg.eta_grid[e] > 0.0)) {
      throw std::invalid_argument("cross-validation: eta values must be > 0");
    }
    if (e > 0 && cfg.eta_grid[e] < cfg.eta_grid[e - 1]) {
      throw std::invalid_argument(
          "cross-validation: eta grid must be nondecreasing");
    }
  }
  const int n = data.n();
  const int r = data.r();
  const VectorizationSpec spec{n, r};
  const std::int64_t dim = spec.length();
  if (cfg.k_folds < 2) {
    throw std::invalid_argument("cross-validation: k_folds must be >= 2");
  }
  if (static_cast<std::int64_t>(cfg.k_folds) > dim) {
    throw std::invalid_argument("cross-validation: more folds than entries");
  }

  std::vector<std::vector<SphericalPoint>> locs;
  locs.reserve(data.replicates.size());
  for (const auto& rep : data.replicates) locs.push_back(rep.locations);
  const SparseMatrix j = build_J(locs, kernel, solver.threshold_frac);
  const SparseMatrix h = build_H_sparse(j, spec);
  Eigen::VectorXd z(dim);
  for (int i = 0; i < n; ++i) {
    const auto& rep = data.replicates[static_cast<std::size_t>(i)];
    const std::int64_t base = static_cast<std::int64_t>(i) * r * (r - 1);
    for (int k0 = 0; k0 < r; ++k0) {
      for (int j0 = 0; j0 < r; ++j0) {
        if (j0 == k0) continue;
        z[base + local_offdiag(j0, k0, r)] =
            rep.values[static_cast<std::size_t>(j0)] *
            rep.values[static_cast<std::size_t>(k0)];
      }
    }
  }

  // Permutation-derived partition; remainder entries go one per fold.
  const std::vector<std::int32_t> perm = shuffled_indices(dim, cfg.shuffle_seed);
  const int k_folds = cfg.k_folds;
  std::vector<std::vector<std::int32_t>> folds(static_cast<std::size_t>(k_folds));
  {
    const std::int64_t base_size = dim / k_folds;
    std::int64_t cursor = 0;
    for (int f = 0; f < k_folds; ++f) {
      const std::int64_t size = base_size + (f < dim % k_folds ? 1 : 0);
      auto& fold = folds[static_cast<std::size_t>(f)];
      fold.assign(perm.begin() + cursor, perm.begin() + cursor + size);
      std::sort(fold.begin(), fold.end());
      cursor += size;
    }
  }

  CVReport report;
  report.eta_grid = cfg.eta_grid;
  report.shuffle_seed = cfg.shuffle_seed;
  const std::size_t n_eta = cfg.eta_grid.size();
  report.per_fold = Eigen::MatrixXd::Constant(
      k_folds, static_cast<Eigen::Index>(n_eta),
      std::numeric_limits<double>::quiet_NaN());

  // Folds run sequentially (each holds a Gram submatrix); eta points run in
  // parallel within a fold and share the factorized training system.
  for (int f = 0; f < k_folds; ++f) {
    const auto& held = folds[static_cast<std::size_t>(f)];
    std::vector<std::int32_t> train;
    train.reserve(static_cast<std::size_t>(dim) - held.size());
    {
      std::size_t hpos = 0;
      for (std::int32_t idx = 0; idx < dim; ++idx) {
        if (hpos < held.size() && held[hpos] == idx) {
          ++hpos;
        } else {
          train.push_back(idx);
        }
      }
    }
    const SparseMatrix h_tt = submatrix(h, train, train);
    const SparseMatrix h_ht = submatrix(h, held, train);
    Eigen::VectorXd z_t(static_cast<Eigen::Index>(train.size()));
    for (std::size_t a = 0; a < train.size(); ++a) {
      z_t[static_cast<Eigen::Index>(a)] = z[train[a]];
    }
    Eigen::VectorXd z_h(static_cast<Eigen::Index>(held.size()));
    for (std::size_t a = 0; a < held.size(); ++a) {
      z_h[static_cast<Eigen::Index>(a)] = z[held[a]];
    }
    const Eigen::VectorXd h_tt_diag = h_tt.diagonal();

    parallel_for(n_eta, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t e = lo; e < hi; ++e) {
        // Ridge constant unchanged by fold removal (full-system L).
        const double ridge =
            cfg.eta_grid[e] * static_cast<double>(dim) / (kFourPi * kFourPi);
        try {
          const Eigen::VectorXd inv_diag =
              (h_tt_diag.array() + ridge).inverse().matrix();
          const CgResult cg = conjugate_gradient(
              RidgeSparseOperator{&h_tt, ridge}, z_t, inv_diag, solver.tol,
              solver.effective_max_iter(static_cast<std::int64_t>(train.size())));
          Eigen::VectorXd pred;
          h_ht.multiply(cg.x, pred);
          report.per_fold(f, static_cast<Eigen::Index>(e)) =
              (z_h - pred).squaredNorm() / static_cast<double>(z_h.size());
        } catch (const numerical_error&) {
          // leave NaN: fold excluded for this eta
        }
      }
    });
  }

  report.mean_scores.assign(n_eta, 0.0);
  for (std::size_t e = 0; e < n_eta; ++e) {
    double acc = 0.0;
    int valid = 0;
    for (int f = 0; f < k_folds; ++f) {
      const double score = report.per_fold(f, static_cast<Eigen::Index>(e));
      if (std::isfinite(score)) {
        acc += score;
        ++valid;
      }
    }
    if (valid == 0) {
      throw numerical_error(
          "cross-validation: every fold failed for eta = " +
          std::to_string(cfg.eta_grid[e]));
    }
    if (valid < k_folds) {
      report.warnings.push_back(
          std::to_string(k_folds - valid) + " fold(s) failed for eta = " +
          std::to_string(cfg.eta_grid[e]));
    }
    report.mean_scores[e] = acc / valid;
  }

  std::size_t best = 0;
  for (std::size_t e = 1; e < n_eta; ++e) {
    const bool better = report.mean_scores[e] < report.mean_scores[best];
    const bool tie_smaller_eta =
        report.mean_scores[e] == report.mean_scores[best] &&
        cfg.eta_grid[e] < cfg.eta_grid[best];
    if (better || tie_smaller_eta) best = e;
  }
  report.selected_eta = cfg.eta_grid[best];
  return report;
}

}  // namespace sphcov
