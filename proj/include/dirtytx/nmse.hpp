#pragma once

// Closed-form per-branch NMSE between the transmitter output and the ideally
// amplified input, and the min-max power back-off built on it.

#include <array>
#include <optional>
#include <vector>

#include "dirtytx/core_model.hpp"
#include "dirtytx/exec.hpp"
#include "dirtytx/polyroots.hpp"

namespace dirtytx {

// NMSE(P) = quadratic P^2 + linear P + constant + inverse / P.
struct NmseCurve {
  double quadratic = 0.0;
  double linear = 0.0;
  double constant = 0.0;
  double inverse = 0.0;

  double operator()(double p) const;
  double first_derivative(double p) const;
  double second_derivative(double p) const;
};

// Branch curves for fixed (hw, β, ξ); spec.p_x is ignored. Branch 2 is
// undefined for β = 0 and evaluates to +inf.
std::array<NmseCurve, 2> nmse_curves(const HardwareConfig& hw, const SignalSpec& spec);

struct ErrorVariances {
  double e11 = 0.0;
  double e22 = 0.0;
};

ErrorVariances error_covariance_diag(const HardwareConfig& hw, const SignalSpec& spec, double p_x);

// Additive pieces of NMSEℓ: P^2, P, constant and 1/P contributions.
struct NmseTerms {
  double cubic = 0.0;      // from the P^3 part of eℓℓ
  double quadratic = 0.0;  // from the P^2 part
  double linear = 0.0;     // from the P part
  double noise = 0.0;      // thermal noise

  double total() const { return cubic + quadratic + linear + noise; }
};

struct NmseReport {
  double nmse1 = 0.0;
  double nmse2 = 0.0;
  double e11 = 0.0;
  double e22 = 0.0;
  std::array<NmseTerms, 2> terms;

  double nmse1_db() const;
  double nmse2_db() const;
  double worst() const { return nmse1 > nmse2 ? nmse1 : nmse2; }
};

// p_x = 0 yields +inf NMSEs.
NmseReport nmse_branches(const HardwareConfig& hw, const SignalSpec& spec, double p_x);

// Second derivative of each branch NMSE with respect to P_x.
std::array<double, 2> nmse_second_derivative(const HardwareConfig& hw, const SignalSpec& spec,
                                             double p_x);

// Weak-crosstalk approximation of NMSE1 (t11 ≈ γ1², linear term dropped).
double approx_nmse1(const HardwareConfig& hw, const SignalSpec& spec, double p_x);

// NMSE-minimizing power of a single branch, γ^-2 (σ_w² / 12ρ²)^(1/3).
// Throws DomainError for ρ = 0.
double siso_optimal_power(double gamma, double rho, double sigma_w2);

// Stationarity polynomials of NMSE1 and NMSE2 (cubic in P_x).
RealPoly branch_stationarity_poly(const HardwareConfig& hw, const SignalSpec& spec, int branch);

// Cubic whose positive roots are the powers with NMSE1 = NMSE2, expressed
// from the hardware parameters. Coefficients that cancel to rounding level
// are set to zero.
RealPoly nmse_crossing_poly(const HardwareConfig& hw, const SignalSpec& spec);

struct BackoffSolution {
  double p_x_opt = 0.0;
  double p1 = 0.0;                 // minimizer of NMSE1
  double p2 = 0.0;                 // minimizer of NMSE2
  std::optional<double> p3;        // best crossing NMSE1 = NMSE2, if any
  std::vector<double> crossing_roots;
  double achieved = 0.0;           // max(NMSE1, NMSE2) at p_x_opt
  int active_case = 0;             // 1, 2: branch minimizer p1 or p2 wins; 3: crossing point p3
  bool tie = false;                // candidates tied; the smaller power was kept
  Warnings warnings;

  std::vector<double> candidates() const;
};

// Power minimizing max(NMSE1, NMSE2) from the three-candidate closed form.
// Requires ρℓ < 0 and β > 0.
BackoffSolution minmax_backoff(const HardwareConfig& hw, const SignalSpec& spec);

struct GridOptions {
  double lo_dbm = -40.0;
  double hi_dbm = 20.0;
  int points = 10000;
};

struct GridMinimum {
  double p_x = 0.0;
  double value = 0.0;
  std::size_t index = 0;
  double step_db = 0.0;
};

// Brute-force oracle: log-spaced grid search of max(NMSE1, NMSE2).
GridMinimum grid_minmax_backoff(const HardwareConfig& hw, const SignalSpec& spec,
                                const GridOptions& opt = {}, Exec exec = Exec::parallel);

// Log-spaced powers (W) from lo_dbm to hi_dbm inclusive.
std::vector<double> log_power_grid(const GridOptions& opt);

}  // namespace dirtytx
