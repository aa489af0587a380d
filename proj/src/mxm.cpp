#include "dirtytx/mxm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dirtytx/montecarlo.hpp"
#include "dirtytx/polyroots.hpp"
#include "dirtytx/units.hpp"

namespace dirtytx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CMat gain_m(const HardwareConfigM& hw) { return hw.gamma.cast<cplx>().asDiagonal(); }

void require_compression(const HardwareConfigM& hw, const char* who) {
  if (!(hw.rho.array() < 0.0).all())
    throw DomainError(std::string(who) + ": every rho must be strictly negative");
}

// f(u) = u|u|^2 applied through r = u + ρ f(u).
CVecX amplifier_m(const CVecX& u, const RVecX& rho) {
  CVecX r = u;
  for (int l = 0; l < u.size(); ++l) r(l) += rho(l) * u(l) * std::norm(u(l));
  return r;
}

PrecoderSolutionM solution_m(const CVecX& c_eff, const CMat& q, const ChannelSpecM& ch,
                             const HardwareConfigM& hw, std::string provenance) {
  PrecoderSolutionM s;
  s.c_eff = c_eff;
  s.c = q.partialPivLu().solve(c_eff);
  s.sndr = sndr_m(c_eff, ch, hw);
  s.se = achievable_se(s.sndr);
  s.p_x = std::norm(s.c(0));
  s.provenance = std::move(provenance);
  return s;
}

struct MrtConstantsM {
  CVecX c_hat;
  cplx k0, k1;
  double sigma2;
};

MrtConstantsM mrt_constants_m(const ChannelSpecM& ch, const HardwareConfigM& hw, const CMat& q) {
  if (std::abs(ch.h(0)) == 0.0) throw DomainError("conventional MRT: h1 = 0");
  MrtConstantsM m;
  m.c_hat = q * ch.h.conjugate() / std::abs(ch.h(0));
  m.k0 = (ch.h.array() * m.c_hat.array()).sum();
  m.k1 = 0.0;
  for (int l = 0; l < ch.h.size(); ++l)
    m.k1 += 2.0 * ch.h(l) * hw.rho(l) * std::norm(m.c_hat(l)) * m.c_hat(l);
  m.sigma2 = 2.0 * hw.sigma_w2 * ch.h.squaredNorm() + 2.0 * ch.sigma_n2;
  return m;
}

}  // namespace

void HardwareConfigM::validate() const {
  const int m = size();
  if (m < 1) throw DomainError("HardwareConfigM: need at least one branch");
  if (kappa.rows() != m || kappa.cols() != m || rho.size() != m)
    throw DomainError("HardwareConfigM: dimension mismatch");
  for (int l = 0; l < m; ++l) {
    if (!(gamma(l) > 0.0) || !std::isfinite(gamma(l)))
      throw DomainError("HardwareConfigM: gamma must be positive");
    if (!(rho(l) <= 0.0) || !std::isfinite(rho(l)))
      throw DomainError("HardwareConfigM: rho must be non-positive");
    if (kappa(l, l) != cplx{}) throw DomainError("HardwareConfigM: kappa diagonal must be zero");
  }
  if (!kappa.allFinite()) throw DomainError("HardwareConfigM: kappa must be finite");
  if (!(sigma_w2 > 0.0)) throw DomainError("HardwareConfigM: sigma_w2 must be positive");
}

HardwareConfigM HardwareConfigM::from_2x2(const HardwareConfig& hw) {
  HardwareConfigM m;
  m.gamma = RVecX::Zero(2);
  m.rho = RVecX::Zero(2);
  m.kappa = CMat::Zero(2, 2);
  for (int l = 0; l < 2; ++l) {
    m.gamma(l) = hw.gamma[l];
    m.rho(l) = hw.rho[l];
  }
  m.kappa(0, 1) = hw.kappa[0];  // branch 1 into branch 2
  m.kappa(1, 0) = hw.kappa[1];
  m.sigma_w2 = hw.sigma_w2;
  return m;
}

void SignalSpecM::validate(int m) const {
  if (shape.rows() != m || shape.cols() != m) throw DomainError("SignalSpecM: dimension mismatch");
  if (std::abs(shape(0, 0) - cplx{1.0}) > 1e-12)
    throw DomainError("SignalSpecM: shape(0, 0) must be 1");
  if (!shape.isApprox(shape.adjoint(), 1e-12))
    throw DomainError("SignalSpecM: shape must be Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(shape, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff())
    throw DomainError("SignalSpecM: shape must be PSD");
  if (!(p_x >= 0.0)) throw DomainError("SignalSpecM: p_x must be >= 0");
}

SignalSpecM SignalSpecM::from_2x2(const SignalSpec& spec) {
  SignalSpecM s;
  s.shape = CMat(2, 2);
  s.shape << 1.0, spec.beta * spec.xi, spec.beta * std::conj(spec.xi), spec.beta * spec.beta;
  s.p_x = spec.p_x;
  return s;
}

CMat feedback_matrix_m(const HardwareConfigM& hw) {
  const int m = hw.size();
  CMat k = CMat::Zero(m, m);
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < m; ++j) k(l, j) = hw.gamma(l) * hw.kappa(j, l);
  return k;
}

CMat build_q_m(const HardwareConfigM& hw, QApproximation mode) {
  hw.validate();
  const CMat l = gain_m(hw);
  const CMat k = feedback_matrix_m(hw);
  if (mode == QApproximation::first_order) return l + k * l;
  const int m = hw.size();
  const CMat ik = CMat::Identity(m, m) - k;
  Eigen::FullPivLU<CMat> lu(ik);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12)
    throw NumericalError("build_q_m: I - K is singular");
  return lu.solve(l);
}

std::vector<NmseCurve> nmse_curves_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                     QApproximation mode) {
  const int m = hw.size();
  spec.validate(m);
  const CMat q = build_q_m(hw, mode);
  const CMat dq = q - gain_m(hw);
  const CMat t = q * spec.shape * q.adjoint();
  CMat dt_g = CMat::Zero(m, m);
  for (int l = 0; l < m; ++l) dt_g(l, l) = t(l, l).real() * hw.rho(l);
  const CMat lin = dq * spec.shape * q.adjoint() * dt_g;
  const CMat off = dq * spec.shape * dq.adjoint();

  std::vector<NmseCurve> out(static_cast<std::size_t>(m));
  for (int l = 0; l < m; ++l) {
    const double norm = hw.gamma(l) * hw.gamma(l) * spec.shape(l, l).real();
    if (!(norm > 0.0)) {
      out[l] = {0.0, 0.0, 0.0, kInf};
      continue;
    }
    const double tl = t(l, l).real();
    out[l] = {6.0 * hw.rho(l) * hw.rho(l) * tl * tl * tl / norm, 4.0 * lin(l, l).real() / norm,
              off(l, l).real() / norm, hw.sigma_w2 / norm};
  }
  return out;
}

std::vector<double> nmse_branches_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                    double p_x, QApproximation mode) {
  if (!(p_x >= 0.0)) throw DomainError("nmse_branches_m: p_x must be >= 0");
  const auto curves = nmse_curves_m(hw, spec, mode);
  std::vector<double> out;
  for (const auto& c : curves) out.push_back(p_x == 0.0 ? kInf : c(p_x));
  return out;
}

BackoffSolutionM minmax_backoff_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                  QApproximation mode, double rel_tol) {
  require_compression(hw, "minmax_backoff_m");
  const auto curves = nmse_curves_m(hw, spec, mode);
  double lo = kInf, hi = 0.0;
  for (const auto& c : curves) {
    if (c.inverse == kInf) throw DomainError("minmax_backoff_m: a branch carries no power");
    // d/dP NMSE times P^2: 2q P^3 + l P^2 − inv.
    const double p = unique_positive_root(RealPoly{2.0 * c.quadratic, c.linear, 0.0, -c.inverse});
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  auto active = [&](double p) {
    int best = 0;
    for (int l = 1; l < static_cast<int>(curves.size()); ++l)
      if (curves[l](p) > curves[best](p)) best = l;
    return best;
  };

  BackoffSolutionM s;
  // The pointwise max is convex; its minimizer lies between the branch minimizers.
  while (hi - lo > rel_tol * hi && s.iterations < 400) {
    ++s.iterations;
    const double mid = 0.5 * (lo + hi);
    if (curves[active(mid)].first_derivative(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  s.p_x_opt = 0.5 * (lo + hi);
  s.active_branch = active(s.p_x_opt);
  s.achieved = curves[s.active_branch](s.p_x_opt);
  return s;
}

double sndr_m(const CVecX& c, const ChannelSpecM& ch, const HardwareConfigM& hw) {
  const int m = hw.size();
  const CMat u = c * c.adjoint();
  CMat a = CMat::Zero(m, m), g = CMat::Zero(m, m), cm(m, m);
  for (int l = 0; l < m; ++l) {
    a(l, l) = 1.0 + 2.0 * hw.rho(l) * u(l, l).real();
    g(l, l) = hw.rho(l);
  }
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < m; ++j) cm(l, j) = u(l, j) * std::norm(u(l, j));
  const CMat v = 2.0 * g * cm * g.adjoint();
  const cplx sig = ch.h.transpose() * a * c;
  const double dist = (ch.h.transpose() * v * ch.h.conjugate())(0, 0).real();
  return std::norm(sig) / (dist + hw.sigma_w2 * ch.h.squaredNorm() + ch.sigma_n2);
}

double conventional_mrt_se_m(const ChannelSpecM& ch, const HardwareConfigM& hw, double p_x,
                             QApproximation mode) {
  const auto m = mrt_constants_m(ch, hw, build_q_m(hw, mode));
  return achievable_se(sndr_m(std::sqrt(p_x) * m.c_hat, ch, hw));
}

MrtVariantsM mrt_variants_m(const ChannelSpecM& ch, const HardwareConfigM& hw,
                            QApproximation mode, const EtaGridOptions& eta) {
  require_compression(hw, "mrt_variants_m");
  if (ch.h.size() != hw.size()) throw DomainError("mrt_variants_m: channel dimension mismatch");
  if (!(ch.h.squaredNorm() > 0.0) || !(ch.sigma_n2 > 0.0))
    throw DomainError("mrt_variants_m: need a non-zero channel and sigma_n2 > 0");
  const CMat q = build_q_m(hw, mode);
  MrtVariantsM out;

  {
    const auto m = mrt_constants_m(ch, hw, q);
    const double a = std::norm(m.k1), b = std::norm(m.k0);
    const double r = (m.k0 * std::conj(m.k1)).real();
    const double s2 = m.sigma2;
    const RealPoly quartic{2.0 * a * r, 2.0 * a * b, -3.0 * a * s2, -4.0 * r * s2, -b * s2};
    std::vector<double> roots;
    try {
      roots = real_roots(quartic).positive_roots;
    } catch (const DomainError& e) {
      throw NumericalError(std::string("mrt_variants_m: degenerate quartic: ") + e.what());
    }
    if (roots.empty()) throw NumericalError("mrt_variants_m: quartic has no positive root");
    double best_p = roots.front(), best_v = -1.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < roots.size(); ++i) {
      const double v = sndr_m(std::sqrt(roots[i]) * m.c_hat, ch, hw);
      if (v > best_v * (1.0 + 1e-12)) {
        best_v = v;
        best_p = roots[i];
        k = i;
      }
    }
    std::ostringstream tag;
    tag << "quartic root " << k + 1 << " of " << roots.size();
    out.conventional = solution_m(std::sqrt(best_p) * m.c_hat, q, ch, hw, tag.str());
  }

  {
    if (eta.points < 2 || !(eta.hi_dbm > eta.lo_dbm))
      throw DomainError("mrt_variants_m: need at least two eta points and hi > lo");
    const CVecX qh = q.partialPivLu().solve(CVecX(ch.h.conjugate()));
    const double lin = std::norm(qh(0));
    if (!(lin > 0.0)) throw DomainError("mrt_variants_m: (Q^-1 h*)_1 vanishes");
    const double step = (eta.hi_dbm - eta.lo_dbm) / (eta.points - 1);
    double best_se = -1.0;
    CVecX best_c;
    int best_k = 0;
    for (int k = 0; k < eta.points; ++k) {
      const double e = units::dbm_to_watt(eta.lo_dbm + step * k) / lin;
      CVecX c = CVecX::Zero(hw.size());
      for (int l = 0; l < hw.size(); ++l) {
        const double ah = std::abs(ch.h(l));
        if (ah == 0.0) continue;
        const double x = 8.0 * hw.rho(l) * ah * ah * e;
        const double amp = (-x / (1.0 + std::sqrt(1.0 - x))) / (4.0 * hw.rho(l) * ah * std::sqrt(e));
        c(l) = std::polar(amp, -std::arg(ch.h(l)));
      }
      const double se = achievable_se(sndr_m(c, ch, hw));
      if (se > best_se) {
        best_se = se;
        best_c = c;
        best_k = k;
      }
    }
    std::ostringstream tag;
    tag << "eta grid point " << best_k << " of " << eta.points;
    out.distortion_aware = solution_m(best_c, q, ch, hw, tag.str());
  }
  return out;
}

std::vector<double> monte_carlo_nmse_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                       double p_x, std::size_t n, std::uint64_t seed) {
  const int m = hw.size();
  spec.validate(m);
  if (n == 0 || !(p_x > 0.0)) throw DomainError("monte_carlo_nmse_m: need n >= 1 and p_x > 0");
  const CMat l = gain_m(hw);
  const CMat k = feedback_matrix_m(hw);
  const CMat q = build_q_m(hw, QApproximation::exact);

  // Square root of the (possibly singular) covariance via its eigendecomposition.
  Eigen::SelfAdjointEigenSolver<CMat> es(p_x * spec.shape);
  const CMat root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cast<cplx>().asDiagonal();

  std::vector<double> err(static_cast<std::size_t>(m), 0.0);
  std::size_t used = 0, failed = 0;
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  const double sw = std::sqrt(hw.sigma_w2);
  for (std::size_t b = 0; b * kBlockSize < n; ++b) {
    auto eng = block_engine(seed, Stream::mxm, b);
    const std::size_t count = std::min(kBlockSize, n - b * kBlockSize);
    for (std::size_t i = 0; i < count; ++i) {
      CVecX z(m), w(m);
      for (int j = 0; j < m; ++j) z(j) = cplx{nd(eng), nd(eng)};
      for (int j = 0; j < m; ++j) w(j) = sw * cplx{nd(eng), nd(eng)};
      const CVecX x = root * z;
      const CVecX lx = l * x;
      CVecX u = q * x;
      double alpha = 1.0;
      double res = (lx + k * amplifier_m(u, hw.rho) - u).norm();
      bool ok = false;
      for (int it = 0; it < 500 && alpha > 1e-6; ++it) {
        if (res <= 1e-10 * std::max(u.norm(), 1e-300)) {
          ok = true;
          break;
        }
        const CVecX cand = (1.0 - alpha) * u + alpha * (lx + k * amplifier_m(u, hw.rho));
        const double rc = (lx + k * amplifier_m(cand, hw.rho) - cand).norm();
        if (rc > res) {
          alpha *= 0.5;
          continue;
        }
        u = cand;
        res = rc;
      }
      if (!ok) ok = res <= 1e-10 * std::max(u.norm(), 1e-300);
      if (!ok) {
        ++failed;
        continue;
      }
      const CVecX y = amplifier_m(u, hw.rho) + w;
      for (int j = 0; j < m; ++j) err[j] += std::norm(y(j) - hw.gamma(j) * x(j));
      ++used;
    }
  }
  if (static_cast<double>(failed) > 1e-3 * static_cast<double>(n))
    throw NumericalError("monte_carlo_nmse_m: too many samples failed to converge");
  for (int j = 0; j < m; ++j) {
    const double norm = hw.gamma(j) * hw.gamma(j) * spec.shape(j, j).real() * p_x;
    err[j] = norm > 0.0 ? err[j] / static_cast<double>(used) / norm : kInf;
  }
  return err;
}

}  // namespace dirtytx
