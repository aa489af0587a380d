#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirtytx {

using cplx = std::complex<double>;
using CVec2 = std::array<cplx, 2>;

// Inputs outside the model's domain (negative gains, |ξ| > 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A solver or root finder could not deliver its contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A "unique positive root" premise did not hold for the given parameters.
class StructuralAssumptionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Non-fatal diagnostic attached to results.
struct Warning {
  std::string code;
  std::string message;
};

using Warnings = std::vector<Warning>;

// Dense 2x2 complex matrix, row-major.
struct ComplexMat2 {
  cplx m11{}, m12{}, m21{}, m22{};

  static constexpr ComplexMat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr ComplexMat2 diag(cplx a, cplx b) { return {a, 0.0, 0.0, b}; }

  cplx det() const { return m11 * m22 - m12 * m21; }
  cplx trace() const { return m11 + m22; }

  ComplexMat2 adjoint() const {
    return {std::conj(m11), std::conj(m21), std::conj(m12), std::conj(m22)};
  }

  ComplexMat2 inverse() const {
    const cplx d = det();
    if (d == cplx{}) throw NumericalError("ComplexMat2::inverse: singular matrix");
    return {m22 / d, -m12 / d, -m21 / d, m11 / d};
  }

  double frobenius_norm() const {
    return std::sqrt(std::norm(m11) + std::norm(m12) + std::norm(m21) + std::norm(m22));
  }

  CVec2 operator*(const CVec2& v) const {
    return {m11 * v[0] + m12 * v[1], m21 * v[0] + m22 * v[1]};
  }

  friend ComplexMat2 operator*(const ComplexMat2& a, const ComplexMat2& b) {
    return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
            a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
  }
  friend ComplexMat2 operator+(const ComplexMat2& a, const ComplexMat2& b) {
    return {a.m11 + b.m11, a.m12 + b.m12, a.m21 + b.m21, a.m22 + b.m22};
  }
  friend ComplexMat2 operator-(const ComplexMat2& a, const ComplexMat2& b) {
    return {a.m11 - b.m11, a.m12 - b.m12, a.m21 - b.m21, a.m22 - b.m22};
  }
  friend ComplexMat2 operator*(cplx s, const ComplexMat2& a) {
    return {s * a.m11, s * a.m12, s * a.m21, s * a.m22};
  }
  friend bool operator==(const ComplexMat2&, const ComplexMat2&) = default;
};

// Hermitian positive-semidefinite test with a trace-relative tolerance.
bool is_hermitian_psd(const ComplexMat2& m, double rel_tol = 1e-10);

}  // namespace dirtytx
