#include "sphcov/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sphcov/errors.hpp"
#include "sphcov/parallel.hpp"

namespace sphcov {

namespace {

// N x r matrix of kernel values psi(<g_a, p_j>).
Eigen::MatrixXd kernel_cross(const SphereGrid& grid,
                             const SphericalPoint* pts, int count,
                             const ZonalKernel& kernel) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(grid.size()), count);
  parallel_for(grid.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      for (int j = 0; j < count; ++j) {
        k(static_cast<Eigen::Index>(a), j) = kernel(dot(grid.nodes[a], pts[j]));
      }
    }
  });
  return k;
}

inline std::int64_t local_offdiag(int j0, int k0, int r) {
  return static_cast<std::int64_t>(k0) * (r - 1) + j0 - (j0 > k0 ? 1 : 0);
}

}  // namespace

GridField eval_on_grid(const MeanEstimate& est, const SphereGrid& grid) {
  validate_grid(grid);
  GridField field;
  field.grid = grid;
  field.bivariate = false;
  field.values.resize(static_cast<Eigen::Index>(grid.size()), 1);
  parallel_for(grid.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      field.values(static_cast<Eigen::Index>(a), 0) =
          eval_mean(est, grid.nodes[a]);
    }
  });
  return field;
}

GridField eval_on_grid(const SecondMomentEstimate& est,
                       const SphereGrid& grid) {
  validate_grid(grid);
  const Eigen::Index n_nodes = static_cast<Eigen::Index>(grid.size());
  GridField field;
  field.grid = grid;
  field.bivariate = true;
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n_nodes, n_nodes);

  const std::int64_t pairs = est.pair_count();
  const int r = est.r;
  const std::int64_t per_block =
      est.lag == 0 ? static_cast<std::int64_t>(r) * (r - 1)
                   : static_cast<std::int64_t>(r) * r;
  const bool blocked =
      r >= 1 && per_block > 0 && pairs % per_block == 0 && est.n > 0;
  if (blocked) {
    // Per-block factorization V += KX W KY^T; blocks accumulate serially so
    // the result does not depend on the thread count.
    const std::int64_t blocks = pairs / per_block;
    std::vector<SphericalPoint> xu(static_cast<std::size_t>(r));
    std::vector<SphericalPoint> yu(static_cast<std::size_t>(r));
    Eigen::MatrixXd w(r, r);
    for (std::int64_t b = 0; b < blocks; ++b) {
      const std::int64_t base = b * per_block;
      w.setZero();
      for (int k0 = 0; k0 < r; ++k0) {
        for (int j0 = 0; j0 < r; ++j0) {
          if (est.lag == 0 && j0 == k0) continue;
          const std::int64_t m =
              base + (est.lag == 0 ? local_offdiag(j0, k0, r)
                                   : static_cast<std::int64_t>(k0) * r + j0);
          xu[static_cast<std::size_t>(j0)] = est.x[static_cast<std::size_t>(m)];
          yu[static_cast<std::size_t>(k0)] = est.y[static_cast<std::size_t>(m)];
          w(j0, k0) = est.eval_weights[m];
        }
      }
      const Eigen::MatrixXd kx = kernel_cross(grid, xu.data(), r, est.kernel);
      const Eigen::MatrixXd ky = kernel_cross(grid, yu.data(), r, est.kernel);
      values.noalias() += kx * w * ky.transpose();
    }
  } else {
    // Generic chunked A diag(w) B^T accumulation.
    const std::int64_t chunk = 4096;
    for (std::int64_t start = 0; start < pairs; start += chunk) {
      const int count = static_cast<int>(std::min(chunk, pairs - start));
      const Eigen::MatrixXd kx = kernel_cross(
          grid, est.x.data() + start, count, est.kernel);
      const Eigen::MatrixXd ky = kernel_cross(
          grid, est.y.data() + start, count, est.kernel);
      values.noalias() +=
          kx * est.eval_weights.segment(start, count).asDiagonal() *
          ky.transpose();
    }
  }
  field.values = est.transposed ? values.transpose() : values;
  return field;
}

GridField eval_truth_on_grid(const SourceModel& model, const SphereGrid& grid) {
  validate_grid(grid);
  GridField field;
  field.grid = grid;
  field.bivariate = true;
  const Eigen::MatrixXd k =
      kernel_cross(grid, model.sources.data(), model.q(), model.kernel);
  field.values = k * model.weight_cov * k.transpose();
  return field;
}

GridField eval_covariance_on_grid(const SecondMomentEstimate& r_est,
                                  const MeanEstimate& m_est,
                                  const SphereGrid& grid) {
  GridField field = eval_on_grid(r_est, grid);
  const GridField mean = eval_on_grid(m_est, grid);
  field.values.noalias() -= mean.values.col(0) * mean.values.col(0).transpose();
  return field;
}

PsdProjection project_psd(const GridField& field, double tol) {
  if (!field.bivariate) {
    throw std::invalid_argument("project_psd: needs a bivariate field");
  }
  const Eigen::Index n = field.values.rows();
  if (field.values.cols() != n) {
    throw std::invalid_argument("project_psd: values must be square");
  }
  // Quadrature-weighted congruence makes the discrete projection approximate
  // the operator projection; with equal Fibonacci weights this reduces to a
  // plain symmetric eigendecomposition.
  Eigen::VectorXd sqrt_w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sqrt_w[i] = std::sqrt(field.grid.weights[static_cast<std::size_t>(i)]);
  }
  Eigen::MatrixXd scaled =
      sqrt_w.asDiagonal() * field.values * sqrt_w.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  if (eig.info() != Eigen::Success) {
    throw numerical_error("project_psd: eigendecomposition failed");
  }
  Eigen::VectorXd lam = eig.eigenvalues();
  PsdProjection out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam[i] < 0.0) {
      out.clipped_mass -= lam[i];
      if (lam[i] < -tol) ++out.clipped_count;
      lam[i] = 0.0;
    }
  }
  const Eigen::MatrixXd rebuilt =
      eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  out.field.grid = field.grid;
  out.field.bivariate = true;
  out.field.values = sqrt_w.cwiseInverse().asDiagonal() * rebuilt *
                     sqrt_w.cwiseInverse().asDiagonal();
  return out;
}

namespace {

void check_same_grid(const GridField& a, const GridField& b) {
  if (a.bivariate != b.bivariate || a.grid.size() != b.grid.size()) {
    throw std::invalid_argument("grid fields: shape mismatch");
  }
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    const auto& p = a.grid.nodes[i];
    const auto& q = b.grid.nodes[i];
    if (std::abs(p.x - q.x) > 1e-12 || std::abs(p.y - q.y) > 1e-12 ||
        std::abs(p.z - q.z) > 1e-12 ||
        std::abs(a.grid.weights[i] - b.grid.weights[i]) > 1e-12) {
      throw std::invalid_argument("grid fields: node mismatch");
    }
  }
}

}  // namespace

double l2_error(const GridField& a, const GridField& b) {
  check_same_grid(a, b);
  const Eigen::Index n = static_cast<Eigen::Index>(a.grid.size());
  double acc = 0.0;
  if (a.bivariate) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = a.values(i, j) - b.values(i, j);
        acc += a.grid.weights[static_cast<std::size_t>(i)] *
               a.grid.weights[static_cast<std::size_t>(j)] * d * d;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = a.values(i, 0) - b.values(i, 0);
      acc += a.grid.weights[static_cast<std::size_t>(i)] * d * d;
    }
  }
  return std::sqrt(acc);
}

double l2_norm(const GridField& a) {
  GridField zero;
  zero.grid = a.grid;
  zero.bivariate = a.bivariate;
  zero.values = Eigen::MatrixXd::Zero(a.values.rows(), a.values.cols());
  return l2_error(a, zero);
}

}  // namespace sphcov
