#pragma once

#include <complex>
#include <string>

#include "isostable/dynamics.hpp"

namespace isostable {

enum class LeadingClass { Real, ComplexPair };
enum class Stability { Stable, Unstable };

[[nodiscard]] const char* to_string(LeadingClass c) noexcept;
[[nodiscard]] const char* to_string(Stability s) noexcept;

/// Complex inner product <u, w> = sum_i u_i conj(w_i).
template <typename DerivedU, typename DerivedW>
[[nodiscard]] std::complex<double> inner(const Eigen::MatrixBase<DerivedU>& u,
                                         const Eigen::MatrixBase<DerivedW>& w) {
  return w.template cast<std::complex<double>>().dot(u.template cast<std::complex<double>>());
}

/// Jacobian spectrum at a hyperbolic fixed point.
///
/// Eigenvalues are ordered slowest first: descending real part for a sink,
/// ascending for a source. Within a conjugate pair the member with positive
/// imaginary part comes first and its partner's eigenvector is the exact
/// conjugate. Right eigenvectors have unit norm with their largest-magnitude
/// component real and positive; left eigenvectors are the columns of V^{-H},
/// so <v_i, vt_j> = delta_ij.
struct Spectrum {
  FixedPoint fixed_point;
  Matrix jacobian;
  Eigen::VectorXcd eigenvalues;
  ComplexMatrix right;
  ComplexMatrix left;
  LeadingClass leading_class = LeadingClass::Real;
  Stability stability = Stability::Stable;

  [[nodiscard]] int dim() const { return static_cast<int>(eigenvalues.size()); }
  [[nodiscard]] const Vector& x_star() const { return fixed_point.location; }
  [[nodiscard]] std::complex<double> lambda(int j) const { return eigenvalues[j]; }
  [[nodiscard]] double sigma1() const { return eigenvalues[0].real(); }
  [[nodiscard]] double omega1() const { return std::abs(eigenvalues[0].imag()); }
  [[nodiscard]] ComplexVector v(int j) const { return right.col(j); }
  [[nodiscard]] ComplexVector v_tilde(int j) const { return left.col(j); }
  /// a = Re{v_1}
  [[nodiscard]] Vector a() const { return right.col(0).real(); }
  /// b = -Im{v_1}
  [[nodiscard]] Vector b() const { return -right.col(0).imag(); }
};

/// Eigen-decomposition and classification of `jacobian` at `fp`.
/// Throws Nonhyperbolic, MixedStability or RepeatedEigenvalue.
[[nodiscard]] Spectrum compute_spectrum(const Matrix& jacobian, const FixedPoint& fp);

[[nodiscard]] Spectrum compute_spectrum(const VectorFieldModel& model, const FixedPoint& fp);

/// T_1 = 2 pi / omega_1. Throws RealLeadingEigenvalue.
[[nodiscard]] double reduced_period(const Spectrum& spectrum);

/// Spectrum of the time-reversed field: eigenvalues negated, vectors kept.
[[nodiscard]] Spectrum time_reversed(const Spectrum& spectrum);

/// Hex digest of the fixed point and eigen-data printed at 17 digits.
[[nodiscard]] std::string fingerprint(const Spectrum& spectrum);

}  // namespace isostable
