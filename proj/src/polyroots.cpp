#include "dirtytx/polyroots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dirtytx {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxDegree = 6;

// Horner rounding-error scale: sum |a_k| |x|^k.
double abs_eval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  const double ax = std::abs(x);
  for (double a : c) acc = acc * ax + std::abs(a);
  return acc;
}

double eval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (double a : c) acc = acc * x + a;
  return acc;
}

double eval_deriv(const std::vector<double>& c, double x) {
  double acc = 0.0;
  const std::size_t n = c.size() - 1;
  for (std::size_t k = 0; k < n; ++k) acc = acc * x + c[k] * static_cast<double>(n - k);
  return acc;
}

// Root of c on [lo, hi] given a sign change. rtsafe-style: Newton steps while
// they stay in the bracket and shrink fast enough, bisection otherwise.
double bracketed_root(const std::vector<double>& c, double lo, double hi) {
  double flo = eval(c, lo);
  if (flo == 0.0) return lo;
  if (eval(c, hi) == 0.0) return hi;
  if (flo > 0.0) std::swap(lo, hi);  // now p(lo) < 0 < p(hi)
  double x = 0.5 * (lo + hi);
  double dx_old = std::abs(hi - lo);
  double dx = dx_old;
  double f = eval(c, x);
  double df = eval_deriv(c, x);
  for (int it = 0; it < 400; ++it) {
    const bool newton_leaves = ((x - hi) * df - f) * ((x - lo) * df - f) > 0.0;
    const bool newton_slow = std::abs(2.0 * f) > std::abs(dx_old * df);
    dx_old = dx;
    if (newton_leaves || newton_slow || df == 0.0) {
      dx = 0.5 * (hi - lo);
      x = lo + dx;
    } else {
      dx = f / df;
      x -= dx;
    }
    if (std::abs(dx) <= 2.0 * kEps * std::abs(x) || std::abs(dx) < 1e-300) break;
    f = eval(c, x);
    df = eval_deriv(c, x);
    if (f == 0.0) break;
    if (f < 0.0)
      lo = x;
    else
      hi = x;
  }
  return x;
}

std::vector<double> derivative_coeffs(const std::vector<double>& c) {
  std::vector<double> d;
  const std::size_t n = c.size() - 1;
  d.reserve(n);
  for (std::size_t k = 0; k < n; ++k) d.push_back(c[k] * static_cast<double>(n - k));
  return d;
}

void push_unique(std::vector<double>& roots, double r) {
  for (double q : roots)
    if (std::abs(q - r) <= 8.0 * kEps * std::max(std::abs(q), std::abs(r))) return;
  roots.push_back(r);
}

// Real roots of c (leading coefficient non-zero) inside [lo, hi].
std::vector<double> isolate(const std::vector<double>& c, double lo, double hi) {
  const std::size_t deg = c.size() - 1;
  std::vector<double> roots;
  if (deg == 1) {
    const double r = -c[1] / c[0];
    if (r >= lo && r <= hi) roots.push_back(r);
    return roots;
  }
  const auto crit = isolate(derivative_coeffs(c), lo, hi);
  std::vector<double> pts;
  pts.reserve(crit.size() + 2);
  pts.push_back(lo);
  pts.insert(pts.end(), crit.begin(), crit.end());
  pts.push_back(hi);

  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i], b = pts[i + 1];
    const double fa = eval(c, a), fb = eval(c, b);
    if (fa == 0.0) push_unique(roots, a);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) push_unique(roots, bracketed_root(c, a, b));
  }
  if (eval(c, hi) == 0.0) push_unique(roots, hi);
  // Touching roots at critical points show no sign change.
  for (double x : crit) {
    if (std::abs(eval(c, x)) <= 64.0 * kEps * abs_eval(c, x)) push_unique(roots, x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace

int RealPoly::degree() const {
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    if (coeffs[i] != 0.0) return static_cast<int>(coeffs.size() - 1 - i);
  return -1;
}

RealPoly RealPoly::trimmed() const {
  auto it = std::find_if(coeffs.begin(), coeffs.end(), [](double a) { return a != 0.0; });
  return RealPoly(std::vector<double>(it, coeffs.end()));
}

RealPoly RealPoly::derivative() const {
  const RealPoly t = trimmed();
  if (t.coeffs.size() <= 1) return RealPoly{0.0};
  return RealPoly(derivative_coeffs(t.coeffs));
}

double RealPoly::operator()(double x) const { return coeffs.empty() ? 0.0 : eval(coeffs, x); }

double RealPoly::max_abs_coeff() const {
  double m = 0.0;
  for (double a : coeffs) m = std::max(m, std::abs(a));
  return m;
}

RealPoly RealPoly::even_part_in_square() const {
  const RealPoly t = trimmed();
  const std::size_t n = t.coeffs.size();
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t power = n - 1 - k;
    if (power % 2 == 1) {
      if (t.coeffs[k] != 0.0) throw DomainError("even_part_in_square: polynomial has odd terms");
    } else {
      out.push_back(t.coeffs[k]);
    }
  }
  return RealPoly(std::move(out));
}

double root_residual_bound(const RealPoly& p, double root) {
  const int deg = std::max(p.degree(), 0);
  return 1e-8 * p.max_abs_coeff() * std::pow(std::max(1.0, std::abs(root)), deg);
}

RootReport real_roots(const RealPoly& p) {
  const RealPoly t = p.trimmed();
  const int deg = t.degree();
  if (deg < 1) throw DomainError("real_roots: polynomial has degree < 1 after trimming");
  if (deg > kMaxDegree) throw DomainError("real_roots: degree above 6 is not supported");
  for (double a : t.coeffs)
    if (!std::isfinite(a)) throw DomainError("real_roots: non-finite coefficient");

  // Monic form and Fujiwara bound on |root|.
  std::vector<double> monic(t.coeffs);
  const double lead = monic[0];
  for (double& a : monic) a /= lead;
  double bound = 0.0;
  for (int k = 1; k <= deg; ++k) {
    const double a = std::abs(monic[k]);
    if (a == 0.0) continue;
    const double r = (k == deg) ? std::pow(a / 2.0, 1.0 / k) : std::pow(a, 1.0 / k);
    bound = std::max(bound, r);
  }
  bound = 2.0 * bound * (1.0 + 1e-6) + 1e-300;

  RootReport rep;
  rep.real_roots = isolate(monic, -bound, bound);
  for (double r : rep.real_roots) {
    rep.residuals.push_back(std::abs(t(r)));
    if (r > 0.0) rep.positive_roots.push_back(r);
  }
  return rep;
}

double unique_positive_root(const RealPoly& p) {
  const RootReport rep = real_roots(p);
  if (rep.positive_roots.size() != 1) {
    std::ostringstream msg;
    msg << "unique_positive_root: expected exactly one positive root, found "
        << rep.positive_roots.size();
    throw StructuralAssumptionError(msg.str());
  }
  return rep.positive_roots.front();
}

}  // namespace dirtytx
