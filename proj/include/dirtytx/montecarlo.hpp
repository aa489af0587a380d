#pragma once

// Monte Carlo ground truth: draw Gaussian inputs, solve the exact nonlinear
// feedback system u = Lx + K r(u) per sample, and measure the statistics the
// closed forms predict.
//
// Random numbers come in blocks of kBlockSize samples; block b of stream s is
// generated by an engine seeded from (seed, s, b). A batch is therefore the
// same for every thread count.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dirtytx/core_model.hpp"
#include "dirtytx/exec.hpp"

namespace dirtytx {

inline constexpr std::size_t kBlockSize = 1024;

enum class Stream : std::uint64_t {
  inputs = 1,
  thermal = 2,
  channels = 3,
  gaussian = 4,
  mxm = 5,
};

std::mt19937_64 block_engine(std::uint64_t seed, Stream stream, std::uint64_t block);

// n draws of CN(0, cov). cov must be Hermitian PSD.
std::vector<CVec2> sample_gaussian(const ComplexMat2& cov, std::size_t n, std::uint64_t seed,
                                   Stream stream = Stream::gaussian, Exec exec = Exec::parallel);

// n draws of x ~ CN(0, C_x).
std::vector<CVec2> sample_inputs(const SignalSpec& spec, std::size_t n, std::uint64_t seed,
                                 Exec exec = Exec::parallel);

// n channels with i.i.d. CN(0, 1) entries from the channel stream.
std::vector<CVec2> sample_channels(std::size_t n, std::uint64_t seed);

struct FeedbackOptions {
  int max_iterations = 500;
  double tolerance = 1e-10;  // on ‖u − (Lx + K r(u))‖ / ‖u‖
  int newton_iterations = 50;
};

struct FeedbackResult {
  CVec2 u{};
  bool converged = false;
  bool used_newton = false;
  int iterations = 0;
  double residual = 0.0;  // relative
};

// ‖u − (Lx + K r(u))‖ / ‖u‖ (absolute when u = 0).
double feedback_residual(const CVec2& u, const CVec2& x, const HardwareConfig& hw);

// Damped fixed-point iteration from u = Qx, halving the step whenever the
// residual grows, with a real 4x4 Newton fallback.
FeedbackResult solve_feedback(const CVec2& x, const HardwareConfig& hw,
                              const FeedbackOptions& opt = {});

// r = u + ρ u |u|^2 per branch.
CVec2 amplifier(const CVec2& u, const std::array<double, 2>& rho);

struct SampleBatch {
  std::vector<CVec2> x, u, r, y;
  std::vector<std::uint8_t> converged;
  std::uint64_t seed = 0;
  std::size_t n_failed = 0;
  std::size_t n_newton = 0;
  int max_iterations_used = 0;

  std::size_t size() const { return x.size(); }
  std::size_t n_converged() const { return x.size() - n_failed; }
};

struct SimulationOptions {
  FeedbackOptions feedback;
  double max_failure_rate = 1e-3;
  Exec exec = Exec::parallel;
};

// Throws NumericalError when more than max_failure_rate of samples fail.
SampleBatch simulate(const HardwareConfig& hw, const SignalSpec& spec, std::size_t n,
                     std::uint64_t seed, const SimulationOptions& opt = {});

// Sample-mean |yℓ − γℓ xℓ|^2 over converged samples, normalized like the
// closed-form NMSE. Throws DomainError for an empty batch.
std::array<double, 2> empirical_nmse(const SampleBatch& b, const HardwareConfig& hw,
                                     const SignalSpec& spec);

// Ê[v v^H] over entries with mask[i] != 0 (all when mask is empty).
ComplexMat2 empirical_covariance(const std::vector<CVec2>& v,
                                 const std::vector<std::uint8_t>& mask = {});

// Bussgang gains from the batch's own covariance of u.
BussgangGains empirical_bussgang_gains(const SampleBatch& b, const HardwareConfig& hw);

// max entry of |Ê[v u^H]| / √(Ê|vℓ|² Ê|um|²) with v = r − A u.
double bussgang_residual(const SampleBatch& b, const BussgangGains& a);
double bussgang_residual(const SampleBatch& b, const BussgangModel& model);

struct KsReport {
  std::array<double, 4> d{};  // Re u1, Im u1, Re u2, Im u2
  std::size_t n = 0;

  double max() const;
};

// KS distance between solved-u marginals and the Gaussian marginals of the
// model covariance.
KsReport empirical_cdf_distance(const SampleBatch& b, const BussgangModel& model);

// KS distance of samples against N(0, variance).
double ks_distance_normal(std::vector<double> samples, double variance);

// Distance between the sample covariance of the solved u and that of Qx on
// the same inputs: Frobenius-relative and cross-term-relative (linear).
struct CovarianceNmse {
  double full = 0.0;
  double cross = 0.0;
};

CovarianceNmse covariance_nmse(const SampleBatch& b, const HardwareConfig& hw);

struct EmpiricalMoments {
  ComplexMat2 second;  // Ê[u u^H]
  ComplexMat2 fourth;  // Ê[f(u) u^H]
  ComplexMat2 sixth;   // Ê[f(u) f(u)^H]
};

// f(u) = u |u|^2 elementwise.
EmpiricalMoments empirical_moments(const std::vector<CVec2>& u);

// JSON record of the batch statistics.
std::string batch_statistics_json(const SampleBatch& b, const HardwareConfig& hw,
                                  const SignalSpec& spec, const std::string& config_hash);

}  // namespace dirtytx
