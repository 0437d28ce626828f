#pragma once

#include "sphcov/geometry.hpp"

namespace sphcov {

// Index (l, m) of a real spherical harmonic, |m| <= l.
struct HarmonicIndex {
  int degree = 0;
  int order = 0;
};

inline constexpr int kMaxHarmonicDegree = 2048;

// Legendre polynomial P_l(t) on [-1, 1]; P_l(1) == 1 exactly.
// Throws std::domain_error for |t| > 1.
double legendre_p(int degree, double t);

// Real spherical harmonic Y_{l,m}(u), orthonormal for the surface measure
// (Y_{0,0} = 1/sqrt(4 pi)), Condon-Shortley-free sign convention.
double real_sph_harm(const HarmonicIndex& idx, const SphericalPoint& u);

// sum_{m=-l}^{l} Y_{l,m}(u) Y_{l,m}(v). Equals (2l+1)/(4 pi) P_l(<u,v>).
double addition_theorem_sum(int degree, const SphericalPoint& u,
                            const SphericalPoint& v);

}  // namespace sphcov
