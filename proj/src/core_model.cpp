#include "dirtytx/core_model.hpp"

#include <cmath>
#include <sstream>

namespace dirtytx {

namespace {

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

bool is_hermitian_psd(const ComplexMat2& m, double rel_tol) {
  const double scale = std::max({std::abs(m.m11), std::abs(m.m22), std::abs(m.m12), 1e-300});
  const double tol = rel_tol * scale;
  if (std::abs(m.m11.imag()) > tol || std::abs(m.m22.imag()) > tol) return false;
  if (std::abs(m.m12 - std::conj(m.m21)) > tol) return false;
  if (m.m11.real() < -tol || m.m22.real() < -tol) return false;
  return m.det().real() >= -rel_tol * scale * scale;
}

void HardwareConfig::validate() const {
  for (int l = 0; l < 2; ++l) {
    if (!(gamma[l] > 0.0) || !std::isfinite(gamma[l]))
      throw DomainError("HardwareConfig: gamma must be positive and finite");
    if (!(rho[l] <= 0.0) || !std::isfinite(rho[l]))
      throw DomainError("HardwareConfig: rho must be non-positive (compression)");
    if (!finite(kappa[l])) throw DomainError("HardwareConfig: kappa must be finite");
  }
  if (!(sigma_w2 > 0.0) || !std::isfinite(sigma_w2))
    throw DomainError("HardwareConfig: sigma_w2 must be positive");
}

double HardwareConfig::loop_gain() const {
  return std::abs(gamma[0] * gamma[1] * kappa[0] * kappa[1]);
}

std::optional<Warning> small_error_warning(const HardwareConfig& hw) {
  const double g = hw.loop_gain();
  if (g <= kSmallErrorLoopGainLimit) return std::nullopt;
  std::ostringstream msg;
  msg << "|g1 g2 k1 k2| = " << g << " exceeds " << kSmallErrorLoopGainLimit
      << "; the u ~ Qx approximation may be inaccurate";
  return Warning{"small-error-regime", msg.str()};
}

void SignalSpec::validate() const {
  if (!(p_x >= 0.0) || !std::isfinite(p_x)) throw DomainError("SignalSpec: p_x must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("SignalSpec: beta must be >= 0");
  if (!finite(xi) || std::abs(xi) > 1.0 + 1e-12)
    throw DomainError("SignalSpec: |xi| must not exceed 1");
}

ComplexMat2 SignalSpec::covariance() const {
  return {p_x, p_x * beta * xi, p_x * beta * std::conj(xi), p_x * beta * beta};
}

SignalSpec SignalSpec::from_precoder(const CVec2& c) {
  const double p = std::norm(c[0]);
  if (p == 0.0) throw DomainError("SignalSpec::from_precoder: c1 must be non-zero");
  const cplx cross = c[0] * std::conj(c[1]);
  const cplx xi = std::abs(cross) > 0.0 ? cross / std::abs(cross) : cplx{1.0, 0.0};
  return {p, std::abs(c[1]) / std::abs(c[0]), xi};
}

ComplexMat2 gain_matrix(const HardwareConfig& hw) {
  return ComplexMat2::diag(hw.gamma[0], hw.gamma[1]);
}

ComplexMat2 feedback_matrix(const HardwareConfig& hw) {
  return {0.0, hw.gamma[0] * hw.kappa[1], hw.gamma[1] * hw.kappa[0], 0.0};
}

ComplexMat2 build_q(const HardwareConfig& hw) {
  const double g1 = hw.gamma[0], g2 = hw.gamma[1];
  const ComplexMat2 q{g1, g1 * hw.kappa[1] * g2, g2 * hw.kappa[0] * g1, g2};
  const double n = q.frobenius_norm();
  if (std::abs(q.det()) < 1e-12 * n * n)
    throw NumericalError("build_q: Q is numerically singular (pathological crosstalk)");
  return q;
}

InternalCovariance internal_covariance(const HardwareConfig& hw, const SignalSpec& spec) {
  const double g1 = hw.gamma[0], g2 = hw.gamma[1];
  const cplx k1 = hw.kappa[0], k2 = hw.kappa[1];
  const double b = spec.beta;
  const cplx xi = spec.xi;

  InternalCovariance out;
  out.t11 = g1 * g1 + 2.0 * g1 * g1 * g2 * b * (std::conj(k2) * xi).real() +
            g1 * g1 * g2 * g2 * std::norm(k2) * b * b;
  out.t12 = g1 * g2 *
            (g1 * std::conj(k1) + b * xi + g1 * g2 * std::conj(k1) * k2 * b * std::conj(xi) +
             g2 * k2 * b * b);
  out.t22 = g2 * g2 * b * b + 2.0 * g1 * g2 * g2 * b * (k1 * xi).real() +
            g1 * g1 * g2 * g2 * std::norm(k1);
  const double p = spec.p_x;
  out.u = {p * out.t11, p * out.t12, p * std::conj(out.t12), p * out.t22};
  return out;
}

BussgangGains bussgang_matrix(const ComplexMat2& u_cov, const std::array<double, 2>& rho) {
  BussgangGains g;
  g.a[0] = 1.0 + 2.0 * rho[0] * u_cov.m11.real();
  g.a[1] = 1.0 + 2.0 * rho[1] * u_cov.m22.real();
  g.nonpositive = {g.a[0] <= 0.0, g.a[1] <= 0.0};
  return g;
}

ComplexMat2 fourth_order_moment(const ComplexMat2& u) {
  const ComplexMat2 b = ComplexMat2::diag(u.m11.real(), u.m22.real());
  return 2.0 * (b * u);
}

ComplexMat2 cubic_moment_matrix(const ComplexMat2& u) {
  const double u11 = u.m11.real(), u22 = u.m22.real();
  const double a12 = std::norm(u.m12);
  return {u11 * u11 * u11, u.m12 * a12, std::conj(u.m12) * a12, u22 * u22 * u22};
}

ComplexMat2 sixth_order_moment(const ComplexMat2& u) {
  const ComplexMat2 b = ComplexMat2::diag(u.m11.real(), u.m22.real());
  return 4.0 * (b * u * b) + 2.0 * cubic_moment_matrix(u);
}

ComplexMat2 distortion_covariance(const ComplexMat2& u, const std::array<double, 2>& rho) {
  const ComplexMat2 g = ComplexMat2::diag(rho[0], rho[1]);
  return 2.0 * (g * cubic_moment_matrix(u) * g.adjoint());
}

LinearSymmetricGain linear_symmetric_gain(double gamma, double delta, double p_x) {
  if (std::abs(delta) >= 1.0)
    throw DomainError("linear_symmetric_gain: |delta| >= 1, feedback loop diverges");
  const double d2 = delta * delta;
  const double den = (1.0 - d2) * (1.0 - d2);
  LinearSymmetricGain out;
  out.gain = gamma * std::sqrt(1.0 + d2) / (1.0 - d2);
  const double g2 = gamma * gamma;
  out.output_cov = {p_x * g2 * (1.0 + d2) / den, p_x * 2.0 * delta * g2 / den,
                    p_x * 2.0 * delta * g2 / den, p_x * g2 * (1.0 + d2) / den};
  return out;
}

BussgangModel build_bussgang_model(const HardwareConfig& hw, const SignalSpec& spec) {
  hw.validate();
  spec.validate();
  BussgangModel m;
  m.q = build_q(hw);
  const auto ic = internal_covariance(hw, spec);
  m.t11 = ic.t11;
  m.t12 = ic.t12;
  m.t22 = ic.t22;
  m.u_cov = ic.u;
  m.a = bussgang_matrix(m.u_cov, hw.rho);
  m.v_cov = distortion_covariance(m.u_cov, hw.rho);
  if (auto w = small_error_warning(hw)) m.warnings.push_back(*w);
  if (m.a.any_nonpositive())
    m.warnings.push_back({"bussgang-gain", "a Bussgang gain is <= 0 (outside practical regime)"});
  return m;
}

}  // namespace dirtytx
