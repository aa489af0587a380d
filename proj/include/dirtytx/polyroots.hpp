#pragma once

#include <vector>

#include "dirtytx/types.hpp"

namespace dirtytx {

// Real polynomial, coefficients highest degree first.
struct RealPoly {
  std::vector<double> coeffs;

  RealPoly() = default;
  RealPoly(std::initializer_list<double> c) : coeffs(c) {}
  explicit RealPoly(std::vector<double> c) : coeffs(std::move(c)) {}

  // Degree after dropping leading zeros; -1 for the zero polynomial.
  int degree() const;
  RealPoly trimmed() const;
  RealPoly derivative() const;
  double operator()(double x) const;
  double max_abs_coeff() const;

  // For p(x) = q(x^2) returns q; throws DomainError if p has odd terms.
  RealPoly even_part_in_square() const;
};

struct RootReport {
  std::vector<double> real_roots;      // ascending
  std::vector<double> positive_roots;  // subset > 0, ascending
  std::vector<double> residuals;       // |p(root)| per entry of real_roots
};

// All real roots of a polynomial of degree 1..6 (degree counted after
// trimming). Roots are isolated between consecutive critical points and
// polished by safeguarded Newton. Even-multiplicity roots are reported once.
RootReport real_roots(const RealPoly& p);

// The only positive root. Throws StructuralAssumptionError if there are none
// or several.
double unique_positive_root(const RealPoly& p);

// Residual bound every reported root satisfies.
double root_residual_bound(const RealPoly& p, double root);

}  // namespace dirtytx
