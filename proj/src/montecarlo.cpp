#include "dirtytx/montecarlo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <sstream>

#include "dirtytx/kernels.hpp"

namespace dirtytx {

namespace {

double vnorm(const CVec2& v) { return std::sqrt(std::norm(v[0]) + std::norm(v[1])); }

// Lower Cholesky factor of a Hermitian PSD 2x2, tolerant of rank one.
ComplexMat2 cholesky(const ComplexMat2& c) {
  if (!is_hermitian_psd(c, 1e-9)) throw DomainError("sample_gaussian: covariance is not Hermitian PSD");
  const double c11 = std::max(c.m11.real(), 0.0);
  const double l11 = std::sqrt(c11);
  const cplx l21 = l11 > 0.0 ? c.m21 / l11 : cplx{};
  const double l22 = std::sqrt(std::max(c.m22.real() - std::norm(l21), 0.0));
  return {l11, 0.0, l21, l22};
}

CVec2 feedback_map(const CVec2& u, const CVec2& lx, const ComplexMat2& k,
                   const std::array<double, 2>& rho) {
  const CVec2 kr = k * amplifier(u, rho);
  return {lx[0] + kr[0], lx[1] + kr[1]};
}

double rel_residual(const CVec2& u, const CVec2& g) {
  const double d = vnorm({u[0] - g[0], u[1] - g[1]});
  const double s = vnorm(u);
  return s > 0.0 ? d / s : d;
}

// Newton on the stacked real system F(u) = u − Lx − K r(u).
bool newton(CVec2& u, const CVec2& lx, const ComplexMat2& k, const std::array<double, 2>& rho,
            const FeedbackOptions& opt, int& iters) {
  const cplx kk[2][2] = {{k.m11, k.m12}, {k.m21, k.m22}};
  for (int it = 0; it < opt.newton_iterations; ++it) {
    ++iters;
    const CVec2 g = feedback_map(u, lx, k, rho);
    if (rel_residual(u, g) <= opt.tolerance) return true;
    // dr_m/da_m and dr_m/db_m for u_m = a + jb.
    cplx dra[2], drb[2];
    for (int m = 0; m < 2; ++m) {
      const double a = u[m].real(), b = u[m].imag(), p = std::norm(u[m]);
      dra[m] = 1.0 + rho[m] * (p + 2.0 * a * u[m]);
      drb[m] = cplx{0.0, 1.0} + rho[m] * (cplx{0.0, p} + 2.0 * b * u[m]);
    }
    Eigen::Matrix4d j;
    Eigen::Vector4d f;
    for (int l = 0; l < 2; ++l) {
      const cplx fl = u[l] - g[l];
      f(2 * l) = fl.real();
      f(2 * l + 1) = fl.imag();
      for (int m = 0; m < 2; ++m) {
        const cplx da = (l == m ? 1.0 : 0.0) - kk[l][m] * dra[m];
        const cplx db = (l == m ? cplx{0.0, 1.0} : cplx{}) - kk[l][m] * drb[m];
        j(2 * l, 2 * m) = da.real();
        j(2 * l + 1, 2 * m) = da.imag();
        j(2 * l, 2 * m + 1) = db.real();
        j(2 * l + 1, 2 * m + 1) = db.imag();
      }
    }
    const Eigen::Vector4d step = j.partialPivLu().solve(f);
    if (!step.allFinite()) return false;
    u = {u[0] - cplx{step(0), step(1)}, u[1] - cplx{step(2), step(3)}};
  }
  return rel_residual(u, feedback_map(u, lx, k, rho)) <= opt.tolerance;
}

}  // namespace

std::mt19937_64 block_engine(std::uint64_t seed, Stream stream, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(block),
                    static_cast<std::uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

std::vector<CVec2> sample_gaussian(const ComplexMat2& cov, std::size_t n, std::uint64_t seed,
                                   Stream stream, Exec exec) {
  return kernels::gaussian_blocks(exec, cholesky(cov), n, seed, stream);
}

std::vector<CVec2> sample_inputs(const SignalSpec& spec, std::size_t n, std::uint64_t seed,
                                 Exec exec) {
  if (n < 1) throw DomainError("sample_inputs: n must be >= 1");
  spec.validate();
  return sample_gaussian(spec.covariance(), n, seed, Stream::inputs, exec);
}

std::vector<CVec2> sample_channels(std::size_t n, std::uint64_t seed) {
  return kernels::gaussian_blocks(Exec::serial, ComplexMat2::identity(), n, seed,
                                  Stream::channels);
}

CVec2 amplifier(const CVec2& u, const std::array<double, 2>& rho) {
  return {u[0] + rho[0] * u[0] * std::norm(u[0]), u[1] + rho[1] * u[1] * std::norm(u[1])};
}

double feedback_residual(const CVec2& u, const CVec2& x, const HardwareConfig& hw) {
  const CVec2 lx{hw.gamma[0] * x[0], hw.gamma[1] * x[1]};
  return rel_residual(u, feedback_map(u, lx, feedback_matrix(hw), hw.rho));
}

FeedbackResult solve_feedback(const CVec2& x, const HardwareConfig& hw,
                              const FeedbackOptions& opt) {
  const ComplexMat2 k = feedback_matrix(hw);
  const CVec2 lx{hw.gamma[0] * x[0], hw.gamma[1] * x[1]};
  FeedbackResult res;
  CVec2 u = build_q(hw) * x;
  CVec2 g = feedback_map(u, lx, k, hw.rho);
  double r = rel_residual(u, g);
  double alpha = 1.0;
  int it = 0;
  while (r > opt.tolerance && it < opt.max_iterations && alpha > 1e-6) {
    ++it;
    const CVec2 cand{(1.0 - alpha) * u[0] + alpha * g[0], (1.0 - alpha) * u[1] + alpha * g[1]};
    const CVec2 gc = feedback_map(cand, lx, k, hw.rho);
    const double rc = rel_residual(cand, gc);
    if (rc > r) {
      alpha *= 0.5;
      continue;
    }
    u = cand;
    g = gc;
    r = rc;
  }
  res.iterations = it;
  if (r > opt.tolerance) {
    res.used_newton = true;
    newton(u, lx, k, hw.rho, opt, res.iterations);
    r = rel_residual(u, feedback_map(u, lx, k, hw.rho));
  }
  res.u = u;
  res.residual = r;
  res.converged = std::isfinite(r) && r <= opt.tolerance;
  return res;
}

SampleBatch simulate(const HardwareConfig& hw, const SignalSpec& spec, std::size_t n,
                     std::uint64_t seed, const SimulationOptions& opt) {
  hw.validate();
  SampleBatch b;
  b.seed = seed;
  b.x = sample_inputs(spec, n, seed, opt.exec);
  const auto w = sample_gaussian(ComplexMat2::diag(hw.sigma_w2, hw.sigma_w2), n, seed,
                                 Stream::thermal, opt.exec);
  const auto sol = kernels::feedback_batch(opt.exec, hw, std::span<const CVec2>(b.x), opt.feedback);
  b.u.resize(n);
  b.r.resize(n);
  b.y.resize(n);
  b.converged.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.u[i] = sol[i].u;
    b.r[i] = amplifier(sol[i].u, hw.rho);
    b.y[i] = {b.r[i][0] + w[i][0], b.r[i][1] + w[i][1]};
    b.converged[i] = sol[i].converged ? 1 : 0;
    if (!sol[i].converged) ++b.n_failed;
    if (sol[i].used_newton) ++b.n_newton;
    b.max_iterations_used = std::max(b.max_iterations_used, sol[i].iterations);
  }
  if (static_cast<double>(b.n_failed) > opt.max_failure_rate * static_cast<double>(n)) {
    std::ostringstream msg;
    msg << "simulate: " << b.n_failed << " of " << n
        << " samples failed to solve the feedback system (limit " << opt.max_failure_rate * 100
        << "%); loop gain " << hw.loop_gain() << ", P_x " << spec.p_x << " W";
    throw NumericalError(msg.str());
  }
  return b;
}

std::array<double, 2> empirical_nmse(const SampleBatch& b, const HardwareConfig& hw,
                                     const SignalSpec& spec) {
  if (b.n_converged() == 0) throw DomainError("empirical_nmse: empty batch");
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.converged[i]) continue;
    s1 += std::norm(b.y[i][0] - hw.gamma[0] * b.x[i][0]);
    s2 += std::norm(b.y[i][1] - hw.gamma[1] * b.x[i][1]);
  }
  const double n = static_cast<double>(b.n_converged());
  const double g1 = hw.gamma[0], g2 = hw.gamma[1];
  const double d2 = g2 * g2 * spec.beta * spec.beta * spec.p_x;
  return {s1 / n / (g1 * g1 * spec.p_x),
          d2 > 0.0 ? s2 / n / d2 : std::numeric_limits<double>::infinity()};
}

ComplexMat2 empirical_covariance(const std::vector<CVec2>& v, const std::vector<std::uint8_t>& mask) {
  ComplexMat2 acc{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    acc.m11 += std::norm(v[i][0]);
    acc.m12 += v[i][0] * std::conj(v[i][1]);
    acc.m22 += std::norm(v[i][1]);
    ++n;
  }
  if (n == 0) throw DomainError("empirical_covariance: no samples");
  acc.m21 = std::conj(acc.m12);
  return cplx(1.0 / static_cast<double>(n)) * acc;
}

BussgangGains empirical_bussgang_gains(const SampleBatch& b, const HardwareConfig& hw) {
  return bussgang_matrix(empirical_covariance(b.u, b.converged), hw.rho);
}

double bussgang_residual(const SampleBatch& b, const BussgangGains& a) {
  cplx cross[2][2] = {};
  double pv[2] = {}, pu[2] = {};
  std::size_t n = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.converged[i]) continue;
    const CVec2& u = b.u[i];
    const CVec2 v{b.r[i][0] - a.a[0] * u[0], b.r[i][1] - a.a[1] * u[1]};
    for (int l = 0; l < 2; ++l) {
      pv[l] += std::norm(v[l]);
      pu[l] += std::norm(u[l]);
      for (int m = 0; m < 2; ++m) cross[l][m] += v[l] * std::conj(u[m]);
    }
    ++n;
  }
  if (n == 0) throw DomainError("bussgang_residual: empty batch");
  double worst = 0.0;
  for (int l = 0; l < 2; ++l)
    for (int m = 0; m < 2; ++m) {
      const double den = std::sqrt(pv[l] * pu[m]);
      if (den > 0.0) worst = std::max(worst, std::abs(cross[l][m]) / den);
    }
  return worst;
}

double bussgang_residual(const SampleBatch& b, const BussgangModel& model) {
  return bussgang_residual(b, model.a);
}

double KsReport::max() const { return *std::max_element(d.begin(), d.end()); }

double ks_distance_normal(std::vector<double> s, double variance) {
  if (s.empty()) throw DomainError("ks_distance_normal: no samples");
  if (!(variance > 0.0)) throw DomainError("ks_distance_normal: variance must be > 0");
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const double scale = std::sqrt(2.0 * variance);
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = 0.5 * std::erfc(-s[i] / scale);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

KsReport empirical_cdf_distance(const SampleBatch& b, const BussgangModel& model) {
  KsReport rep;
  std::array<std::vector<double>, 4> parts;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.converged[i]) continue;
    parts[0].push_back(b.u[i][0].real());
    parts[1].push_back(b.u[i][0].imag());
    parts[2].push_back(b.u[i][1].real());
    parts[3].push_back(b.u[i][1].imag());
  }
  rep.n = parts[0].size();
  const double v1 = 0.5 * model.u_cov.m11.real(), v2 = 0.5 * model.u_cov.m22.real();
  rep.d = {ks_distance_normal(parts[0], v1), ks_distance_normal(parts[1], v1),
           ks_distance_normal(parts[2], v2), ks_distance_normal(parts[3], v2)};
  return rep;
}

CovarianceNmse covariance_nmse(const SampleBatch& b, const HardwareConfig& hw) {
  const ComplexMat2 q = build_q(hw);
  std::vector<CVec2> qx(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) qx[i] = q * b.x[i];
  const ComplexMat2 ce = empirical_covariance(b.u, b.converged);
  const ComplexMat2 ca = empirical_covariance(qx, b.converged);
  const double fa = ca.frobenius_norm();
  CovarianceNmse out;
  out.full = std::pow((ce - ca).frobenius_norm() / fa, 2);
  out.cross = std::norm(ce.m12 - ca.m12) / std::norm(ca.m12);
  return out;
}

EmpiricalMoments empirical_moments(const std::vector<CVec2>& u) {
  if (u.empty()) throw DomainError("empirical_moments: no samples");
  EmpiricalMoments m{};
  for (const auto& s : u) {
    const CVec2 f{s[0] * std::norm(s[0]), s[1] * std::norm(s[1])};
    const ComplexMat2 uu{std::norm(s[0]), s[0] * std::conj(s[1]), s[1] * std::conj(s[0]), std::norm(s[1])};
    const ComplexMat2 fu{f[0] * std::conj(s[0]), f[0] * std::conj(s[1]), f[1] * std::conj(s[0]),
                         f[1] * std::conj(s[1])};
    const ComplexMat2 ff{std::norm(f[0]), f[0] * std::conj(f[1]), f[1] * std::conj(f[0]), std::norm(f[1])};
    m.second = m.second + uu;
    m.fourth = m.fourth + fu;
    m.sixth = m.sixth + ff;
  }
  const cplx inv = 1.0 / static_cast<double>(u.size());
  m.second = inv * m.second;
  m.fourth = inv * m.fourth;
  m.sixth = inv * m.sixth;
  return m;
}

std::string batch_statistics_json(const SampleBatch& b, const HardwareConfig& hw,
                                  const SignalSpec& spec, const std::string& config_hash) {
  using nlohmann::json;
  const auto nm = empirical_nmse(b, hw, spec);
  const auto model = build_bussgang_model(hw, spec);
  const auto cov = covariance_nmse(b, hw);
  const auto ks = empirical_cdf_distance(b, model);
  json j;
  j["seed"] = b.seed;
  j["n"] = b.size();
  j["n_failed"] = b.n_failed;
  j["n_newton"] = b.n_newton;
  j["config_hash"] = config_hash;
  j["p_x_w"] = spec.p_x;
  j["nmse"] = {nm[0], nm[1]};
  j["bussgang_residual_model"] = bussgang_residual(b, model);
  j["bussgang_residual_empirical"] = bussgang_residual(b, empirical_bussgang_gains(b, hw));
  j["covariance_nmse_full"] = cov.full;
  j["covariance_nmse_cross"] = cov.cross;
  j["ks"] = {ks.d[0], ks.d[1], ks.d[2], ks.d[3]};
  return j.dump(2);
}

}  // namespace dirtytx
