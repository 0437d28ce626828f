#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sphcov/kernels.hpp"
#include "sphcov/simulation.hpp"
#include "sphcov/sparse.hpp"

namespace sphcov {

// Vectorization of off-diagonal triples (i, j, k), j != k, for constant r:
//   l = (i-1) r (r-1) + (k-1)(r-1) + j - 1{j > k},   l in [1, n r (r-1)].
struct VectorizationSpec {
  int n = 0;
  int r = 0;

  std::int64_t length() const {
    return static_cast<std::int64_t>(n) * r * (r - 1);
  }
};

struct IndexTriple {
  int i = 0;
  int j = 0;
  int k = 0;
};

// 1-based forward map; throws on j == k or out-of-range indices.
std::int64_t vec_index(int i, int j, int k, const VectorizationSpec& spec);

// Exact inverse of vec_index; throws on l outside [1, L].
IndexTriple inv_vec_index(std::int64_t l, const VectorizationSpec& spec);

// nr x nr kernel Gram over all sample locations (constant r required),
// entries psi(<u_pg, u_qh>). Values below threshold_frac * psi(1) in
// magnitude become structural zeros; threshold_frac in [0, 1), 0 keeps every
// entry. Symmetric by construction.
SparseMatrix build_J(const std::vector<std::vector<SphericalPoint>>& locations,
                     const ZonalKernel& kernel, double threshold_frac);

// Dense nr x nr kernel matrix with the same thresholding (zeros kept
// in place), backing the matrix-free operator at scales where the explicit
// product does not fit in memory.
Eigen::MatrixXd build_kernel_matrix_dense(
    const std::vector<std::vector<SphericalPoint>>& locations,
    const ZonalKernel& kernel, double threshold_frac);

// H = S (J*J) S^T: blockwise Kronecker products J_pq (x) J_pq with the
// diagonal pairs removed by the selection matrix S. Unnormalized, so for
// constant r it equals r(r-1) times the normalized Gram of build_H_general.
SparseMatrix build_H_sparse(const SparseMatrix& j,
                            const VectorizationSpec& spec);

// Upper bound sum_pq nnz(J_pq)^2 on the nnz of build_H_sparse, for memory
// planning.
std::int64_t estimate_H_nnz(const SparseMatrix& j,
                            const VectorizationSpec& spec);

// Dense mean-estimation Gram, entries psi(<u_a, u_b>) / sqrt(r_a r_b).
Eigen::MatrixXd build_mean_gram(const Dataset& data, const ZonalKernel& kernel);

// Dense second-moment Gram over off-diagonal pairs with the
// 1/sqrt(r_i(r_i-1) r_j(r_j-1)) normalization. Handles ragged replicate
// sizes; serves as the oracle for build_H_sparse on small instances. Pair
// enumeration matches vec_index per replicate.
Eigen::MatrixXd build_H_general(const Dataset& data, const ZonalKernel& kernel);

// Matrix-free y = H x for the (optionally lagged) Khatri-Rao system. For
// lag 0 coordinates run over off-diagonal pairs (j != k) in vec_index order;
// for lag h > 0 over all r^2 pairs of (n - h) time blocks, coordinate
// m = (t-1) r^2 + (k-1) r + j, with row/column block t pairing locations
// (U_{t+h,j}, U_{t,k}). An optional keep-mask zeroes coordinates on both
// sides, which is how cross-validation deletes rows and columns.
class KhatriRaoOperator {
 public:
  KhatriRaoOperator(Eigen::MatrixXd kernel_matrix, int n, int r, int lag);

  std::int64_t dim() const;
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
  Eigen::VectorXd diagonal() const;

  // mask.size() == dim() or empty for no masking.
  void set_mask(std::vector<std::uint8_t> keep);

 private:
  Eigen::MatrixXd kern_;  // nr x nr, thresholded values
  int n_ = 0;
  int r_ = 0;
  int lag_ = 0;
  std::vector<std::uint8_t> keep_;
};

}  // namespace sphcov
