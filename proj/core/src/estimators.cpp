#include "sphcov/estimators.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "sphcov/parallel.hpp"

namespace sphcov {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline std::int64_t local_offdiag(int j0, int k0, int r) {
  return static_cast<std::int64_t>(k0) * (r - 1) + j0 - (j0 > k0 ? 1 : 0);
}

std::vector<std::vector<SphericalPoint>> location_lists(const Dataset& data) {
  std::vector<std::vector<SphericalPoint>> locs;
  locs.reserve(data.replicates.size());
  for (const auto& rep : data.replicates) locs.push_back(rep.locations);
  return locs;
}

// The exact minimizer is invariant under the pair swap (j,k) <-> (k,j);
// averaging the two orbits removes the solver's roundoff asymmetry so the
// evaluated estimate is symmetric to machine precision.
void symmetrize_pairs(Eigen::VectorXd& beta, const Dataset& data) {
  std::int64_t base = 0;
  for (const auto& rep : data.replicates) {
    const int ri = static_cast<int>(rep.locations.size());
    for (int k0 = 0; k0 < ri; ++k0) {
      for (int j0 = 0; j0 < k0; ++j0) {
        const std::int64_t a = base + local_offdiag(j0, k0, ri);
        const std::int64_t b = base + local_offdiag(k0, j0, ri);
        const double mean = 0.5 * (beta[a] + beta[b]);
        beta[a] = mean;
        beta[b] = mean;
      }
    }
    base += static_cast<std::int64_t>(ri) * (ri - 1);
  }
}

}  // namespace

MeanEstimate fit_mean(const Dataset& data, const ZonalKernel& kernel,
                      double eta, FitReport* report) {
  validate_dataset(data, /*for_covariance=*/false);
  if (!(eta > 0.0)) throw std::invalid_argument("fit_mean: eta must be > 0");
  const auto t0 = Clock::now();

  const Eigen::Index total = static_cast<Eigen::Index>(data.total_samples());
  Eigen::MatrixXd gram = build_mean_gram(data, kernel);
  Eigen::VectorXd y(total);
  MeanEstimate est;
  est.kernel = kernel;
  est.eta = eta;
  est.locations.reserve(static_cast<std::size_t>(total));
  Eigen::Index pos = 0;
  for (const auto& rep : data.replicates) {
    est.r_list.push_back(static_cast<int>(rep.locations.size()));
    const double inv_sqrt_r =
        1.0 / std::sqrt(static_cast<double>(rep.locations.size()));
    for (std::size_t j = 0; j < rep.locations.size(); ++j) {
      est.locations.push_back(rep.locations[j]);
      y[pos++] = rep.values[j] * inv_sqrt_r;
    }
  }
  const double assembly = seconds_since(t0);

  FitReport rep;
  rep.path = "dense-direct";
  rep.system_dim = total;
  rep.assembly_seconds = assembly;
  if (total <= 4096) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                       Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    rep.gram_condition_ratio =
        lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    rep.ill_conditioned = !(rep.gram_condition_ratio <= 1e14);
  }

  const auto t1 = Clock::now();
  const double ridge = eta * static_cast<double>(data.n()) / kFourPi;
  gram.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    // eta > 0 keeps the system SPD; LDLT covers extreme roundoff.
    est.alpha = gram.ldlt().solve(y);
  } else {
    est.alpha = llt.solve(y);
  }
  rep.solve_seconds = seconds_since(t1);

  est.eval_weights.resize(total);
  pos = 0;
  for (const auto& rp : data.replicates) {
    const double inv_sqrt_r =
        1.0 / std::sqrt(static_cast<double>(rp.locations.size()));
    for (std::size_t j = 0; j < rp.locations.size(); ++j, ++pos) {
      est.eval_weights[pos] = est.alpha[pos] * inv_sqrt_r;
    }
  }
  if (report) *report = rep;
  return est;
}

double eval_mean(const MeanEstimate& est, const SphericalPoint& u) {
  double acc = 0.0;
  for (Eigen::Index m = 0; m < est.eval_weights.size(); ++m) {
    acc += est.eval_weights[m] *
           est.kernel(dot(u, est.locations[static_cast<std::size_t>(m)]));
  }
  return acc;
}

namespace {

SecondMomentEstimate fit_second_moment_fast(const Dataset& data,
                                            const ZonalKernel& kernel,
                                            double eta,
                                            const SolverConfig& cfg,
                                            FitReport* report) {
  const int n = data.n();
  const int r = data.r();
  const VectorizationSpec spec{n, r};
  const std::int64_t dim = spec.length();
  const auto t0 = Clock::now();

  SecondMomentEstimate est;
  est.kernel = kernel;
  est.eta = eta;
  est.lag = 0;
  est.n = n;
  est.r = r;
  est.x.resize(static_cast<std::size_t>(dim));
  est.y.resize(static_cast<std::size_t>(dim));
  Eigen::VectorXd z(dim);
  for (int i = 0; i < n; ++i) {
    const auto& rep = data.replicates[static_cast<std::size_t>(i)];
    const std::int64_t base = static_cast<std::int64_t>(i) * r * (r - 1);
    for (int k0 = 0; k0 < r; ++k0) {
      for (int j0 = 0; j0 < r; ++j0) {
        if (j0 == k0) continue;
        const std::int64_t m = base + local_offdiag(j0, k0, r);
        est.x[static_cast<std::size_t>(m)] =
            rep.locations[static_cast<std::size_t>(j0)];
        est.y[static_cast<std::size_t>(m)] =
            rep.locations[static_cast<std::size_t>(k0)];
        z[m] = rep.values[static_cast<std::size_t>(j0)] *
               rep.values[static_cast<std::size_t>(k0)];
      }
    }
  }

  const double ridge = eta * static_cast<double>(dim) / (kFourPi * kFourPi);
  FitReport rep;
  rep.system_dim = dim;

  const auto locs = location_lists(data);
  CgResult cg;
  const SparseMatrix j = build_J(locs, kernel, cfg.threshold_frac);
  rep.j_nnz_fraction = j.nnz_fraction();
  const bool use_explicit =
      cfg.path == SolverConfig::Path::kSparse ||
      (cfg.path == SolverConfig::Path::kAuto &&
       estimate_H_nnz(j, spec) <= cfg.max_explicit_nnz);
  if (use_explicit) {
    const SparseMatrix h = build_H_sparse(j, spec);
    rep.path = "sparse-cg";
    rep.h_nnz = h.nnz();
    rep.assembly_seconds = seconds_since(t0);
    const auto t1 = Clock::now();
    const Eigen::VectorXd inv_diag =
        (h.diagonal().array() + ridge).inverse().matrix();
    cg = conjugate_gradient(RidgeSparseOperator{&h, ridge}, z, inv_diag,
                            cfg.tol, cfg.effective_max_iter(dim));
    rep.solve_seconds = seconds_since(t1);
  } else {
    KhatriRaoOperator op(build_kernel_matrix_dense(locs, kernel,
                                                   cfg.threshold_frac),
                         n, r, 0);
    rep.path = "matrix-free-cg";
    rep.assembly_seconds = seconds_since(t0);
    const auto t1 = Clock::now();
    const Eigen::VectorXd inv_diag =
        (op.diagonal().array() + ridge).inverse().matrix();
    cg = conjugate_gradient(
        [&op, ridge](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
          op.apply(v, out);
          out += ridge * v;
        },
        z, inv_diag, cfg.tol, cfg.effective_max_iter(dim));
    rep.solve_seconds = seconds_since(t1);
  }
  rep.cg_iterations = cg.iterations;
  rep.cg_rel_residual = cg.rel_residual;

  est.beta = std::move(cg.x);
  symmetrize_pairs(est.beta, data);
  est.eval_weights = est.beta;  // unnormalized system, weights fold to 1
  if (report) *report = rep;
  return est;
}

SecondMomentEstimate fit_second_moment_dense(const Dataset& data,
                                             const ZonalKernel& kernel,
                                             double eta, FitReport* report) {
  const auto t0 = Clock::now();
  SecondMomentEstimate est;
  est.kernel = kernel;
  est.eta = eta;
  est.lag = 0;
  est.n = data.n();
  est.r = -1;

  std::vector<double> norms;
  Eigen::MatrixXd h = build_H_general(data, kernel);
  const Eigen::Index dim = h.rows();
  Eigen::VectorXd z(dim);
  Eigen::Index m = 0;
  for (const auto& rep : data.replicates) {
    const int ri = static_cast<int>(rep.locations.size());
    const double norm = 1.0 / std::sqrt(static_cast<double>(ri) * (ri - 1));
    for (int k0 = 0; k0 < ri; ++k0) {
      for (int j0 = 0; j0 < ri; ++j0) {
        if (j0 == k0) continue;
        est.x.push_back(rep.locations[static_cast<std::size_t>(j0)]);
        est.y.push_back(rep.locations[static_cast<std::size_t>(k0)]);
        z[m] = rep.values[static_cast<std::size_t>(j0)] *
               rep.values[static_cast<std::size_t>(k0)] * norm;
        norms.push_back(norm);
        ++m;
      }
    }
  }

  FitReport rep;
  rep.path = "dense-direct";
  rep.system_dim = dim;
  rep.assembly_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  const double ridge =
      eta * static_cast<double>(data.n()) / (kFourPi * kFourPi);
  h.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    est.beta = h.ldlt().solve(z);
  } else {
    est.beta = llt.solve(z);
  }
  rep.solve_seconds = seconds_since(t1);

  symmetrize_pairs(est.beta, data);
  est.eval_weights.resize(dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    est.eval_weights[a] = est.beta[a] * norms[static_cast<std::size_t>(a)];
  }
  if (report) *report = rep;
  return est;
}

}  // namespace

SecondMomentEstimate fit_second_moment(const Dataset& data,
                                       const ZonalKernel& kernel, double eta,
                                       const SolverConfig& cfg,
                                       FitReport* report) {
  validate_dataset(data, /*for_covariance=*/true);
  if (!(eta > 0.0)) {
    throw std::invalid_argument("fit_second_moment: eta must be > 0");
  }
  if (cfg.path != SolverConfig::Path::kDense && data.constant_r()) {
    return fit_second_moment_fast(data, kernel, eta, cfg, report);
  }
  return fit_second_moment_dense(data, kernel, eta, report);
}

double eval_second_moment(const SecondMomentEstimate& est,
                          const SphericalPoint& u, const SphericalPoint& v) {
  const SphericalPoint& a = est.transposed ? v : u;
  const SphericalPoint& b = est.transposed ? u : v;
  double acc = 0.0;
  for (Eigen::Index m = 0; m < est.eval_weights.size(); ++m) {
    acc += est.eval_weights[m] *
           est.kernel(dot(a, est.x[static_cast<std::size_t>(m)])) *
           est.kernel(dot(b, est.y[static_cast<std::size_t>(m)]));
  }
  return acc;
}

double eval_covariance(const SecondMomentEstimate& r_est,
                       const MeanEstimate& m_est, const SphericalPoint& u,
                       const SphericalPoint& v) {
  return eval_second_moment(r_est, u, v) -
         eval_mean(m_est, u) * eval_mean(m_est, v);
}

SecondMomentEstimate fit_lag_autocov(const Dataset& data,
                                     const ZonalKernel& kernel, double eta,
                                     int lag, const SolverConfig& cfg,
                                     FitReport* report) {
  if (!data.time_ordered) {
    throw std::invalid_argument(
        "fit_lag_autocov: dataset is not time-ordered");
  }
  if (lag == 0) return fit_second_moment(data, kernel, eta, cfg, report);
  if (!(eta > 0.0)) {
    throw std::invalid_argument("fit_lag_autocov: eta must be > 0");
  }
  const int h = std::abs(lag);
  const int n = data.n();
  if (h > n - 2) {
    throw std::invalid_argument(
        "fit_lag_autocov: |h| = " + std::to_string(h) +
        " needs at least h + 2 replicates, have " + std::to_string(n));
  }
  validate_dataset(data, /*for_covariance=*/false);
  if (!data.constant_r()) {
    throw std::invalid_argument("fit_lag_autocov: constant r required");
  }
  const int r = data.r();
  const auto t0 = Clock::now();

  const int blocks = n - h;
  const std::int64_t dim = static_cast<std::int64_t>(blocks) * r * r;
  SecondMomentEstimate est;
  est.kernel = kernel;
  est.eta = eta;
  est.lag = lag;
  est.n = n;
  est.r = r;
  est.x.resize(static_cast<std::size_t>(dim));
  est.y.resize(static_cast<std::size_t>(dim));
  Eigen::VectorXd z(dim);
  for (int t = 0; t < blocks; ++t) {
    const auto& lead = data.replicates[static_cast<std::size_t>(t + h)];
    const auto& base_rep = data.replicates[static_cast<std::size_t>(t)];
    const std::int64_t base = static_cast<std::int64_t>(t) * r * r;
    for (int k0 = 0; k0 < r; ++k0) {
      for (int j0 = 0; j0 < r; ++j0) {
        const std::int64_t m = base + static_cast<std::int64_t>(k0) * r + j0;
        est.x[static_cast<std::size_t>(m)] =
            lead.locations[static_cast<std::size_t>(j0)];
        est.y[static_cast<std::size_t>(m)] =
            base_rep.locations[static_cast<std::size_t>(k0)];
        z[m] = lead.values[static_cast<std::size_t>(j0)] *
               base_rep.values[static_cast<std::size_t>(k0)];
      }
    }
  }

  // Same reduction as the lag-0 fast path applied to the lag functional:
  // unnormalized data and Gram, ridge eta * (pair count) / (4 pi)^2.
  const double ridge = eta * static_cast<double>(dim) / (kFourPi * kFourPi);
  KhatriRaoOperator op(
      build_kernel_matrix_dense(location_lists(data), kernel,
                                cfg.threshold_frac),
      n, r, h);
  FitReport rep;
  rep.path = "matrix-free-cg";
  rep.system_dim = dim;
  rep.assembly_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  const Eigen::VectorXd inv_diag =
      (op.diagonal().array() + ridge).inverse().matrix();
  CgResult cg = conjugate_gradient(
      [&op, ridge](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
        op.apply(v, out);
        out += ridge * v;
      },
      z, inv_diag, cfg.tol, cfg.effective_max_iter(dim));
  rep.solve_seconds = seconds_since(t1);
  rep.cg_iterations = cg.iterations;
  rep.cg_rel_residual = cg.rel_residual;

  est.beta = std::move(cg.x);
  est.eval_weights = est.beta;
  est.transposed = lag < 0;
  if (report) *report = rep;
  return est;
}

}  // namespace sphcov
