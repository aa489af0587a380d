#pragma once

// Transmitter model: a 2x2 amplifier pair with backward crosstalk (a feedback
// network from each amplifier output to the other branch input) and a
// memoryless third-order compression r = u + ρ u |u|^2 per branch.
//
// Under the small-error approximation the amplifier inputs are u ≈ Q x, which
// keeps u Gaussian and makes every second- to sixth-order statistic needed for
// the Bussgang decomposition available in closed form.

#include <array>
#include <optional>

#include "dirtytx/types.hpp"

namespace dirtytx {

// Physical transmitter parameters. Powers in watts.
struct HardwareConfig {
  std::array<double, 2> gamma{1.0, 1.0};  // amplitude gains γℓ > 0
  std::array<cplx, 2> kappa{};            // backward crosstalk κℓ
  std::array<double, 2> rho{};            // compression ρℓ ≤ 0, 1/W
  double sigma_w2 = 1e-4;                 // thermal noise variance, W

  // Throws DomainError on γℓ ≤ 0, ρℓ > 0, σ_w² ≤ 0 or non-finite entries.
  void validate() const;

  // |γ1 γ2 κ1 κ2|, the loop gain of the crosstalk feedback.
  double loop_gain() const;
};

// Threshold on loop_gain() above which the u ≈ Qx approximation is flagged.
inline constexpr double kSmallErrorLoopGainLimit = 0.01;

// Structured warning when the loop gain exceeds kSmallErrorLoopGainLimit.
std::optional<Warning> small_error_warning(const HardwareConfig& hw);

// Input covariance C_x = P_x [[1, βξ], [βξ*, β²]].
struct SignalSpec {
  double p_x = 0.0;  // E|x1|^2, W
  double beta = 1.0;
  cplx xi{};

  void validate() const;
  ComplexMat2 covariance() const;
  SignalSpec with_power(double p) const { return {p, beta, xi}; }

  // Rank-one covariance c c^H of a precoded transmission.
  static SignalSpec from_precoder(const CVec2& c);
};

// Q = [[γ1, γ1κ2γ2], [γ2κ1γ1, γ2]]. Throws NumericalError when
// |det Q| < 1e-12 ‖Q‖_F^2.
ComplexMat2 build_q(const HardwareConfig& hw);

// Gain matrix L = diag(γ1, γ2).
ComplexMat2 gain_matrix(const HardwareConfig& hw);

// Feedback matrix K = [[0, γ1κ2], [γ2κ1, 0]].
ComplexMat2 feedback_matrix(const HardwareConfig& hw);

struct InternalCovariance {
  double t11 = 0.0;
  cplx t12{};
  double t22 = 0.0;
  ComplexMat2 u;  // U = P_x [[t11, t12], [t12*, t22]]
};

InternalCovariance internal_covariance(const HardwareConfig& hw, const SignalSpec& spec);

struct BussgangGains {
  std::array<double, 2> a{1.0, 1.0};
  std::array<bool, 2> nonpositive{false, false};

  bool any_nonpositive() const { return nonpositive[0] || nonpositive[1]; }
  ComplexMat2 matrix() const { return ComplexMat2::diag(a[0], a[1]); }
};

// aℓ = 1 + 2ρℓ uℓℓ, flagged when aℓ ≤ 0.
BussgangGains bussgang_matrix(const ComplexMat2& u_cov, const std::array<double, 2>& rho);

// E[f(u) u^H] = 2 B U with B = diag(u11, u22).
ComplexMat2 fourth_order_moment(const ComplexMat2& u_cov);

// The matrix C with diagonal uℓℓ^3 and off-diagonal u12 |u12|^2.
ComplexMat2 cubic_moment_matrix(const ComplexMat2& u_cov);

// E[f(u) f(u)^H] = 4 B U B + 2 C.
ComplexMat2 sixth_order_moment(const ComplexMat2& u_cov);

// V = 2 G C G^H, G = diag(ρ1, ρ2).
ComplexMat2 distortion_covariance(const ComplexMat2& u_cov, const std::array<double, 2>& rho);

struct LinearSymmetricGain {
  double gain = 0.0;           // γ̄ = γ √(1+δ²) / (1−δ²)
  ComplexMat2 output_cov;      // E[r r^H] for C_x = P_x I
};

// Linear (ρ = 0) symmetric transmitter with common real loop term δ = γκ.
// Throws DomainError for |δ| ≥ 1.
LinearSymmetricGain linear_symmetric_gain(double gamma, double delta, double p_x = 1.0);

// Every closed-form quantity of the Bussgang description at one operating point.
struct BussgangModel {
  ComplexMat2 q;
  ComplexMat2 u_cov;
  double t11 = 0.0;
  cplx t12{};
  double t22 = 0.0;
  BussgangGains a;
  ComplexMat2 v_cov;
  Warnings warnings;
};

BussgangModel build_bussgang_model(const HardwareConfig& hw, const SignalSpec& spec);

}  // namespace dirtytx
