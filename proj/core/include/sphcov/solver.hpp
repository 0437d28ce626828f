#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "sphcov/errors.hpp"
#include "sphcov/sparse.hpp"

namespace sphcov {

struct SolverConfig {
  // Relative residual target ||Ax - b|| / ||b||.
  double tol = 1e-8;
  // 0 selects the default 10 sqrt(L) (at least 200).
  std::int64_t max_iter = 0;
  // J sparsification threshold, fraction of psi(1).
  double threshold_frac = 0.01;
  // Explicit H is materialized while its estimated nnz stays below this;
  // larger systems fall back to the matrix-free block operator.
  std::int64_t max_explicit_nnz = 150000000;

  enum class Path { kAuto, kSparse, kMatrixFree, kDense };
  Path path = Path::kAuto;

  std::int64_t effective_max_iter(std::int64_t dim) const {
    if (max_iter > 0) return max_iter;
    const auto by_dim = static_cast<std::int64_t>(
        10.0 * std::sqrt(static_cast<double>(dim)));
    return by_dim < 200 ? 200 : by_dim;
  }
};

struct CgResult {
  Eigen::VectorXd x;
  std::int64_t iterations = 0;
  double rel_residual = 0.0;
};

// Preconditioned conjugate gradients for SPD operators. apply(x, y) must set
// y = A x; precond_inv_diag holds 1 / diag(A) (Jacobi), or may be empty.
// Convergence is certified against the true residual, not the recursion.
// Throws numerical_error on NaN breakdown or when max_iter is exhausted
// (the message carries the final residual).
template <typename Apply>
CgResult conjugate_gradient(Apply&& apply, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& precond_inv_diag,
                            double tol, std::int64_t max_iter) {
  const auto dim = b.size();
  CgResult out;
  out.x = Eigen::VectorXd::Zero(dim);
  const double norm_b = b.norm();
  if (norm_b == 0.0) return out;

  const bool jacobi = precond_inv_diag.size() != 0;
  Eigen::VectorXd r = b;  // r = b - A*0
  Eigen::VectorXd z = jacobi ? precond_inv_diag.cwiseProduct(r).eval() : r;
  Eigen::VectorXd p = z;
  Eigen::VectorXd ap(dim);
  double rho = r.dot(z);

  std::int64_t it = 0;
  double true_rel = 1.0;
  while (it < max_iter) {
    apply(p, ap);
    const double denom = p.dot(ap);
    if (!std::isfinite(denom) || denom <= 0.0) {
      throw numerical_error(
          "conjugate gradient breakdown: non-SPD direction or NaN at "
          "iteration " +
          std::to_string(it));
    }
    const double alpha = rho / denom;
    out.x += alpha * p;
    r -= alpha * ap;
    ++it;

    if (!std::isfinite(r.squaredNorm())) {
      throw numerical_error("conjugate gradient breakdown: NaN residual");
    }
    if (r.norm() <= tol * norm_b) {
      // Recursive residual can drift; certify with a fresh A x.
      apply(out.x, ap);
      true_rel = (b - ap).norm() / norm_b;
      if (true_rel <= tol) {
        out.iterations = it;
        out.rel_residual = true_rel;
        return out;
      }
    }
    if (jacobi) {
      z = precond_inv_diag.cwiseProduct(r);
    } else {
      z = r;
    }
    const double rho_next = r.dot(z);
    p = z + (rho_next / rho) * p;
    rho = rho_next;
  }
  apply(out.x, ap);
  true_rel = (b - ap).norm() / norm_b;
  throw numerical_error("conjugate gradient: max_iter=" +
                        std::to_string(max_iter) +
                        " exhausted, relative residual " +
                        std::to_string(true_rel));
}

// Ridge-shifted sparse system y = (A + ridge I) x.
struct RidgeSparseOperator {
  const SparseMatrix* matrix = nullptr;
  double ridge = 0.0;

  void operator()(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    matrix->multiply(x, y);
    y += ridge * x;
  }
};

}  // namespace sphcov
