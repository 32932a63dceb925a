#include "isostable/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include "isostable/error.hpp"

namespace isostable {
namespace {

ComplexVector normalize_phase(ComplexVector v) {
  v /= v.norm();
  const double largest = v.cwiseAbs().maxCoeff();
  Eigen::Index k = 0;
  while (std::abs(v[k]) < largest * (1.0 - 1e-12)) ++k;
  v *= std::conj(v[k]) / std::abs(v[k]);
  v[k] = std::complex<double>(v[k].real(), 0.0);
  return v;
}

}  // namespace

const char* to_string(LeadingClass c) noexcept {
  return c == LeadingClass::Real ? "Real" : "ComplexPair";
}

const char* to_string(Stability s) noexcept { return s == Stability::Stable ? "Stable" : "Unstable"; }

Spectrum compute_spectrum(const Matrix& jacobian, const FixedPoint& fp) {
  const auto n = jacobian.rows();
  if (n == 0 || jacobian.cols() != n) throw Error(ErrorKind::InvalidArgument, "jacobian must be square");
  if (!jacobian.allFinite()) throw Error(ErrorKind::NonFiniteField, "jacobian not finite");

  Eigen::EigenSolver<Matrix> solver(jacobian, true);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NoConvergence, "eigen-decomposition failed");
  const Eigen::VectorXcd values = solver.eigenvalues();
  const ComplexMatrix vectors = solver.eigenvectors();

  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::abs(values[j].real()) < 1e-10) {
      throw Error(ErrorKind::Nonhyperbolic, "eigenvalue with |Re| < 1e-10");
    }
  }
  const bool any_stable = (values.real().array() < 0.0).any();
  const bool any_unstable = (values.real().array() > 0.0).any();
  if (any_stable && any_unstable) {
    throw Error(ErrorKind::MixedStability, "saddle-type fixed point has no basin of attraction");
  }
  const double radius = values.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(values[i] - values[j]) < 1e-8 * radius) {
        throw Error(ErrorKind::RepeatedEigenvalue, "eigenvalues closer than 1e-8 spectral radius");
      }
    }
  }

  Spectrum s;
  s.fixed_point = fp;
  s.jacobian = jacobian;
  s.stability = any_unstable ? Stability::Unstable : Stability::Stable;

  // Slowest first; positive imaginary part before its conjugate.
  const double sign = s.stability == Stability::Stable ? -1.0 : 1.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) {
    const double rp = sign * values[p].real();
    const double rq = sign * values[q].real();
    if (rp != rq) return rp < rq;
    const double ap = std::abs(values[p].imag());
    const double aq = std::abs(values[q].imag());
    if (ap != aq) return ap < aq;
    return values[p].imag() > values[q].imag();
  });

  s.eigenvalues.resize(n);
  s.right.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    s.eigenvalues[k] = values[src];
    if (values[src].imag() == 0.0) {
      s.right.col(k) = normalize_phase(vectors.col(src).real().cast<std::complex<double>>());
    } else if (values[src].imag() > 0.0) {
      s.right.col(k) = normalize_phase(vectors.col(src));
    } else {
      // partner of the previous column
      s.eigenvalues[k] = std::conj(s.eigenvalues[k - 1]);
      s.right.col(k) = s.right.col(k - 1).conjugate();
    }
  }

  Eigen::FullPivLU<ComplexMatrix> lu(s.right);
  if (!lu.isInvertible()) throw Error(ErrorKind::RepeatedEigenvalue, "eigenvector basis is singular");
  s.left = lu.inverse().adjoint();

  s.leading_class = s.eigenvalues[0].imag() == 0.0 ? LeadingClass::Real : LeadingClass::ComplexPair;
  return s;
}

Spectrum compute_spectrum(const VectorFieldModel& model, const FixedPoint& fp) {
  return compute_spectrum(jacobian_at(model, fp.location), fp);
}

double reduced_period(const Spectrum& spectrum) {
  if (spectrum.leading_class != LeadingClass::ComplexPair) {
    throw Error(ErrorKind::RealLeadingEigenvalue, "reduced period needs a complex leading pair");
  }
  return 2.0 * std::numbers::pi / spectrum.omega1();
}

Spectrum time_reversed(const Spectrum& spectrum) {
  Spectrum r = spectrum;
  r.jacobian = -spectrum.jacobian;
  r.eigenvalues = -spectrum.eigenvalues;
  // -conj keeps the positive-imaginary member first; swap vectors to match.
  for (int k = 0; k + 1 < r.dim(); ++k) {
    if (r.eigenvalues[k].imag() < 0.0 && r.eigenvalues[k + 1].imag() > 0.0) {
      r.eigenvalues.row(k).swap(r.eigenvalues.row(k + 1));
      r.right.col(k).swap(r.right.col(k + 1));
      r.left.col(k).swap(r.left.col(k + 1));
      r.right.col(k) = normalize_phase(r.right.col(k));
      r.right.col(k + 1) = r.right.col(k).conjugate();
      ++k;
    }
  }
  Eigen::FullPivLU<ComplexMatrix> lu(r.right);
  r.left = lu.inverse().adjoint();
  r.stability = spectrum.stability == Stability::Stable ? Stability::Unstable : Stability::Stable;
  return r;
}

std::string fingerprint(const Spectrum& spectrum) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < spectrum.x_star().size(); ++i) os << spectrum.x_star()[i] << ';';
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) os << spectrum.eigenvalues[i] << ';';
  for (Eigen::Index i = 0; i < spectrum.right.size(); ++i) os << spectrum.right.data()[i] << ';';
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace isostable
