#pragma once

#include <vector>

namespace sphcov {

// Invertible operator acting diagonally on spherical harmonics,
// f -> sum_l D_l sum_m f_{l,m} Y_{l,m}, with polynomial spectral growth:
// ratio_lo (1+l)^p <= |D_l| <= ratio_hi (1+l)^p over the stored range.
struct SpectralOperator {
  std::vector<double> coeffs;  // D_l, l = 0..l_max
  double growth_order = 0.0;   // p
  double ratio_lo = 0.0;       // min |D_l| / (1+l)^p
  double ratio_hi = 0.0;       // max |D_l| / (1+l)^p

  int l_max() const { return static_cast<int>(coeffs.size()) - 1; }
};

// Validates the coefficient sequence (all nonzero, finite ratio bounds).
SpectralOperator make_spectral_operator(std::vector<double> coeffs,
                                        double growth_order);

// D_l = (1 + l(l+1))^{p/2}. Requires p > 1 so the native space is a RKHS.
SpectralOperator sobolev_operator(double p, int l_max);

// Zonal kernel psi(t) of the inner product t = <u, v> in [-1, 1]: either a
// truncated Fourier-Legendre series or the closed-form spherical Matern.
class ZonalKernel {
 public:
  enum class Kind { kSeries, kMatern };

  // coeffs[l] multiplies P_l(t); growth_order and tail_bound are metadata.
  static ZonalKernel series(std::vector<double> legendre_coeffs,
                            double growth_order, double tail_bound);
  static ZonalKernel matern(double nu, double eps);

  double operator()(double t) const;

  Kind kind() const { return kind_; }
  // Spectral growth order p of the inducing operator. For Matern kernels this
  // is 2(nu+1), stored as metadata only: the estimation systems touch psi and
  // the ridge, never the operator coefficients.
  double growth_order() const { return growth_order_; }
  double tail_bound() const { return tail_bound_; }
  int l_max() const { return static_cast<int>(coeffs_.size()) - 1; }
  double nu() const { return nu_; }
  double eps() const { return eps_; }

 private:
  ZonalKernel() = default;

  Kind kind_ = Kind::kMatern;
  std::vector<double> coeffs_;
  double growth_order_ = 0.0;
  double tail_bound_ = 0.0;
  double nu_ = 0.0;
  double eps_ = 0.0;
};

// Green's kernel of D*D: t -> sum_l (2l+1)/(4 pi) P_l(t) / D_l^2.
// Throws when the truncation tail estimate exceeds 1e-6 of the value at t=1.
ZonalKernel green_kernel_dstar_d(const SpectralOperator& op);

// Spherical Matern psi(t) = S_nu^eps(sqrt(2-2t)); closed forms only,
// nu in {1/2, 3/2, 5/2}.
ZonalKernel matern_zonal(double nu, double eps);

// Fourier-Legendre coefficients c_l = 2 pi * int_{-1}^{1} psi(t) P_l(t) dt,
// computed with Gauss-Legendre quadrature on >= 4 l_max nodes. c_l is the
// eigenvalue of the kernel integral operator on degree-l harmonics. Throws
// when some c_l is significantly negative (kernel not positive definite).
std::vector<double> zonal_spectral_coeffs(const ZonalKernel& kernel,
                                          int l_max);

// Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace sphcov
