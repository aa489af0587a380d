#include "dirtytx/nmse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dirtytx/kernels.hpp"
#include "dirtytx/units.hpp"

namespace dirtytx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative tolerance for a Case-3 root to count as NMSE1 = NMSE2.
constexpr double kCrossingTol = 1e-6;
// Two candidate objective values closer than this (relative) are a tie.
constexpr double kTieTol = 1e-12;

struct BranchPieces {
  // eℓℓ = c3 P^3 + c2 P^2 + c1 P + σ_w², normalization n P.
  double c3, c2, c1, norm;
};

std::array<BranchPieces, 2> pieces(const HardwareConfig& hw, const SignalSpec& spec) {
  const auto ic = internal_covariance(hw, spec);
  const double g1 = hw.gamma[0], g2 = hw.gamma[1];
  const cplx k1 = hw.kappa[0], k2 = hw.kappa[1];
  const double r1 = hw.rho[0], r2 = hw.rho[1];
  const double b = spec.beta;
  const cplx xi = spec.xi;

  BranchPieces one{};
  one.c3 = 6.0 * r1 * r1 * ic.t11 * ic.t11 * ic.t11;
  one.c2 = 4.0 * g1 * g1 * g2 * ic.t11 * r1 *
           (g2 * b * b * std::norm(k2) + b * (k2 * std::conj(xi)).real());
  one.c1 = b * b * g1 * g1 * g2 * g2 * std::norm(k2);
  one.norm = g1 * g1;

  BranchPieces two{};
  two.c3 = 6.0 * r2 * r2 * ic.t22 * ic.t22 * ic.t22;
  two.c2 = 4.0 * g1 * g2 * g2 * ic.t22 * r2 * (g1 * std::norm(k1) + b * (k1 * xi).real());
  two.c1 = g1 * g1 * g2 * g2 * std::norm(k1);
  two.norm = g2 * g2 * b * b;
  return {one, two};
}

NmseTerms terms_at(const BranchPieces& bp, double sigma_w2, double p) {
  if (bp.norm == 0.0 || p == 0.0) return {0.0, 0.0, 0.0, kInf};
  const double n = bp.norm * p;
  return {bp.c3 * p * p * p / n, bp.c2 * p * p / n, bp.c1 * p / n, sigma_w2 / n};
}

// Zero out coefficients of a - b that cancel to rounding level.
double cancel(double a, double b) {
  const double d = a - b;
  return std::abs(d) <= 1e-12 * std::max(std::abs(a), std::abs(b)) ? 0.0 : d;
}

}  // namespace

double NmseCurve::operator()(double p) const {
  if (inverse == kInf) return kInf;
  return quadratic * p * p + linear * p + constant + inverse / p;
}

double NmseCurve::first_derivative(double p) const {
  return 2.0 * quadratic * p + linear - inverse / (p * p);
}

double NmseCurve::second_derivative(double p) const {
  return 2.0 * quadratic + 2.0 * inverse / (p * p * p);
}

std::array<NmseCurve, 2> nmse_curves(const HardwareConfig& hw, const SignalSpec& spec) {
  const auto bp = pieces(hw, spec);
  std::array<NmseCurve, 2> out;
  for (int l = 0; l < 2; ++l) {
    if (bp[l].norm == 0.0) {
      out[l] = {0.0, 0.0, 0.0, kInf};
      continue;
    }
    out[l] = {bp[l].c3 / bp[l].norm, bp[l].c2 / bp[l].norm, bp[l].c1 / bp[l].norm,
              hw.sigma_w2 / bp[l].norm};
  }
  return out;
}

ErrorVariances error_covariance_diag(const HardwareConfig& hw, const SignalSpec& spec,
                                     double p_x) {
  const auto bp = pieces(hw, spec);
  const double p = p_x;
  auto e = [&](const BranchPieces& b) {
    return ((b.c3 * p + b.c2) * p + b.c1) * p + hw.sigma_w2;
  };
  return {e(bp[0]), e(bp[1])};
}

double NmseReport::nmse1_db() const { return units::linear_to_db(nmse1); }
double NmseReport::nmse2_db() const { return units::linear_to_db(nmse2); }

NmseReport nmse_branches(const HardwareConfig& hw, const SignalSpec& spec, double p_x) {
  hw.validate();
  spec.validate();
  if (!(p_x >= 0.0)) throw DomainError("nmse_branches: p_x must be >= 0");
  const auto bp = pieces(hw, spec);
  const auto e = error_covariance_diag(hw, spec, p_x);

  NmseReport r;
  r.e11 = e.e11;
  r.e22 = e.e22;
  r.terms = {terms_at(bp[0], hw.sigma_w2, p_x), terms_at(bp[1], hw.sigma_w2, p_x)};
  r.nmse1 = (p_x == 0.0) ? kInf : e.e11 / (bp[0].norm * p_x);
  r.nmse2 = (p_x == 0.0 || bp[1].norm == 0.0) ? kInf : e.e22 / (bp[1].norm * p_x);
  return r;
}

std::array<double, 2> nmse_second_derivative(const HardwareConfig& hw, const SignalSpec& spec,
                                             double p_x) {
  if (!(p_x > 0.0)) throw DomainError("nmse_second_derivative: p_x must be > 0");
  const auto c = nmse_curves(hw, spec);
  return {c[0].second_derivative(p_x), c[1].second_derivative(p_x)};
}

double approx_nmse1(const HardwareConfig& hw, const SignalSpec& spec, double p_x) {
  const double g1 = hw.gamma[0], g2 = hw.gamma[1], r1 = hw.rho[0];
  const double re = (hw.kappa[1] * std::conj(spec.xi)).real();
  return 6.0 * r1 * r1 * std::pow(g1, 4) * p_x * p_x + 4.0 * r1 * spec.beta * g2 * re * g1 * g1 * p_x +
         hw.sigma_w2 / (g1 * g1 * p_x);
}

double siso_optimal_power(double gamma, double rho, double sigma_w2) {
  if (rho == 0.0) throw DomainError("siso_optimal_power: rho = 0 has no finite optimum");
  if (!(gamma > 0.0) || !(sigma_w2 > 0.0))
    throw DomainError("siso_optimal_power: gamma and sigma_w2 must be positive");
  return std::cbrt(sigma_w2 / (12.0 * rho * rho)) / (gamma * gamma);
}

RealPoly branch_stationarity_poly(const HardwareConfig& hw, const SignalSpec& spec, int branch) {
  if (branch != 1 && branch != 2) throw DomainError("branch_stationarity_poly: branch is 1 or 2");
  const auto bp = pieces(hw, spec)[branch - 1];
  // d/dP of eℓℓ / (n P), times n P^2.
  return RealPoly{2.0 * bp.c3, bp.c2, 0.0, -hw.sigma_w2};
}

RealPoly nmse_crossing_poly(const HardwareConfig& hw, const SignalSpec& spec) {
  const auto c = nmse_curves(hw, spec);
  return RealPoly{cancel(c[0].quadratic, c[1].quadratic), cancel(c[0].linear, c[1].linear),
                  cancel(c[0].constant, c[1].constant), cancel(c[0].inverse, c[1].inverse)};
}

std::vector<double> BackoffSolution::candidates() const {
  std::vector<double> out{p1, p2};
  if (p3) out.push_back(*p3);
  return out;
}

BackoffSolution minmax_backoff(const HardwareConfig& hw, const SignalSpec& spec) {
  hw.validate();
  spec.validate();
  if (!(hw.rho[0] < 0.0) || !(hw.rho[1] < 0.0))
    throw DomainError("minmax_backoff: both rho must be strictly negative");
  if (!(spec.beta > 0.0)) throw DomainError("minmax_backoff: beta must be positive");

  const auto curves = nmse_curves(hw, spec);
  auto worst = [&](double p) { return std::max(curves[0](p), curves[1](p)); };

  BackoffSolution s;
  if (auto w = small_error_warning(hw)) s.warnings.push_back(*w);
  s.p1 = unique_positive_root(branch_stationarity_poly(hw, spec, 1));
  s.p2 = unique_positive_root(branch_stationarity_poly(hw, spec, 2));

  const RealPoly diff = nmse_crossing_poly(hw, spec);
  if (diff.degree() >= 1) {
    const auto rep = real_roots(diff);
    double best = kInf;
    for (double r : rep.positive_roots) {
      const double n1 = curves[0](r), n2 = curves[1](r);
      if (std::abs(n1 - n2) > kCrossingTol * std::max(n1, n2)) {
        std::ostringstream msg;
        msg << "crossing root " << r << " W dropped: NMSE1 and NMSE2 differ by "
            << std::abs(n1 - n2) / std::max(n1, n2) << " relative";
        s.warnings.push_back({"crossing-root-dropped", msg.str()});
        continue;
      }
      s.crossing_roots.push_back(r);
      const double v = std::max(n1, n2);
      // Roots are ascending, so strict < keeps the smaller power on ties.
      if (v < best * (1.0 - kTieTol)) {
        best = v;
        s.p3 = r;
      } else if (v <= best * (1.0 + kTieTol)) {
        s.tie = true;
      }
    }
  } else if (diff.degree() == -1) {
    s.warnings.push_back({"identical-branches", "NMSE1 and NMSE2 coincide for every power"});
  }

  struct Cand {
    double p;
    int which;
  };
  std::vector<Cand> cands{{s.p1, 1}, {s.p2, 2}};
  if (s.p3) cands.push_back({*s.p3, 3});

  double best = kInf;
  for (const auto& c : cands) {
    const double v = worst(c.p);
    if (v < best * (1.0 - kTieTol)) {
      best = v;
      s.p_x_opt = c.p;
      s.active_case = c.which;
      s.achieved = v;
    } else if (v <= best * (1.0 + kTieTol)) {
      // Equal power (symmetric branches) is not a tie worth flagging.
      if (std::abs(c.p - s.p_x_opt) > kTieTol * s.p_x_opt) s.tie = true;
      if (c.p < s.p_x_opt) {
        s.p_x_opt = c.p;
        s.active_case = c.which;
        s.achieved = v;
      }
    }
  }
  if (s.tie)
    s.warnings.push_back({"tie", "several candidates reach the same objective; kept the smaller power"});
  return s;
}

std::vector<double> log_power_grid(const GridOptions& opt) {
  if (opt.points < 2 || !(opt.hi_dbm > opt.lo_dbm))
    throw DomainError("log_power_grid: need at least two points and hi > lo");
  std::vector<double> g(static_cast<std::size_t>(opt.points));
  const double step = (opt.hi_dbm - opt.lo_dbm) / (opt.points - 1);
  for (int i = 0; i < opt.points; ++i) g[i] = units::dbm_to_watt(opt.lo_dbm + step * i);
  return g;
}

GridMinimum grid_minmax_backoff(const HardwareConfig& hw, const SignalSpec& spec,
                                const GridOptions& opt, Exec exec) {
  hw.validate();
  spec.validate();
  const auto grid = log_power_grid(opt);
  const auto curves = nmse_curves(hw, spec);
  const auto am = kernels::minmax_grid(exec, curves, grid);
  return {grid[am.index], am.value, am.index, (opt.hi_dbm - opt.lo_dbm) / (opt.points - 1)};
}

}  // namespace dirtytx
