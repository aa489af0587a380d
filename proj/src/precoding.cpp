#include "dirtytx/precoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dirtytx/kernels.hpp"
#include "dirtytx/polyroots.hpp"
#include "dirtytx/units.hpp"

namespace dirtytx {

namespace {

constexpr double kTieTol = 1e-12;

double norm2(const CVec2& v) { return std::norm(v[0]) + std::norm(v[1]); }

void require_compression(const HardwareConfig& hw, const char* who) {
  if (!(hw.rho[0] < 0.0) || !(hw.rho[1] < 0.0))
    throw DomainError(std::string(who) + ": both rho must be strictly negative");
}

// Positive root ϱ of 2X²ϱ⁶ − 6ρσ²ϱ² − σ², solved as a cubic in ϱ².
double sextic_amplitude(double x, double rho, double sigma2) {
  const RealPoly cubic{2.0 * x * x, 0.0, -6.0 * rho * sigma2, -sigma2};
  return std::sqrt(unique_positive_root(cubic));
}

bool same_vec(const CVec2& a, const CVec2& b) {
  const double scale = std::max({std::sqrt(norm2(a)), std::sqrt(norm2(b)), 1e-300});
  return std::abs(a[0] - b[0]) <= 1e-12 * scale && std::abs(a[1] - b[1]) <= 1e-12 * scale;
}

BussgangGains gains_of(const CVec2& c_eff, const HardwareConfig& hw) {
  const ComplexMat2 u{std::norm(c_eff[0]), c_eff[0] * std::conj(c_eff[1]),
                      c_eff[1] * std::conj(c_eff[0]), std::norm(c_eff[1])};
  return bussgang_matrix(u, hw.rho);
}

}  // namespace

void ChannelSpec::validate() const {
  if (!(norm2(h) > 0.0) || !std::isfinite(norm2(h)))
    throw DomainError("ChannelSpec: h must be non-zero and finite");
  if (!(sigma_n2 > 0.0) || !std::isfinite(sigma_n2))
    throw DomainError("ChannelSpec: sigma_n2 must be positive");
}

EffectiveNoise effective_noise(const ChannelSpec& ch, const HardwareConfig& hw) {
  return {{2.0 * ch.h[0] * hw.rho[0], 2.0 * ch.h[1] * hw.rho[1]},
          2.0 * hw.sigma_w2 * norm2(ch.h) + 2.0 * ch.sigma_n2};
}

double sndr(const CVec2& c, const ChannelSpec& ch, const HardwareConfig& hw) {
  const auto en = effective_noise(ch, hw);
  const cplx d = en.h_tilde[0] * std::norm(c[0]) * c[0] + en.h_tilde[1] * std::norm(c[1]) * c[1];
  const cplx n = ch.h[0] * c[0] + ch.h[1] * c[1] + d;
  return 2.0 * std::norm(n) / (std::norm(d) + en.sigma2);
}

double sndr_matrix_form(const CVec2& c, const ChannelSpec& ch, const HardwareConfig& hw) {
  const ComplexMat2 u{std::norm(c[0]), c[0] * std::conj(c[1]), c[1] * std::conj(c[0]),
                      std::norm(c[1])};
  const ComplexMat2 a = bussgang_matrix(u, hw.rho).matrix();
  const ComplexMat2 v = distortion_covariance(u, hw.rho);
  const CVec2 ac = a * c;
  const cplx sig = ch.h[0] * ac[0] + ch.h[1] * ac[1];
  const CVec2 hc{std::conj(ch.h[0]), std::conj(ch.h[1])};
  const CVec2 vh = v * hc;
  const double dist = (ch.h[0] * vh[0] + ch.h[1] * vh[1]).real();
  return std::norm(sig) / (dist + hw.sigma_w2 * norm2(ch.h) + ch.sigma_n2);
}

double achievable_se(double s) {
  if (!(s >= 0.0)) throw DomainError("achievable_se: sndr must be >= 0");
  return std::log2(1.0 + s);
}

PrecoderSolution make_solution(const CVec2& c_eff, const ChannelSpec& ch,
                               const HardwareConfig& hw, std::string provenance) {
  PrecoderSolution s;
  s.c_eff = c_eff;
  s.c = build_q(hw).inverse() * c_eff;
  s.sndr = sndr(c_eff, ch, hw);
  s.se = achievable_se(s.sndr);
  s.p_x = std::norm(s.c[0]);
  s.provenance = std::move(provenance);
  s.bussgang_gains = gains_of(c_eff, hw);
  return s;
}

std::vector<PrecoderCandidate> optimal_precoder_candidates(const ChannelSpec& ch,
                                                           const HardwareConfig& hw) {
  ch.validate();
  hw.validate();
  require_compression(hw, "optimal_precoder");
  const auto en = effective_noise(ch, hw);
  const double r1 = hw.rho[0], r2 = hw.rho[1];
  const double s = std::sqrt(std::abs(r1) / std::abs(r2));
  const double s3 = s * s * s;
  const double a1 = std::abs(en.h_tilde[0]), a2 = std::abs(en.h_tilde[1]);

  const double b_edge = std::sqrt(1.0 / (-2.0 * r2));
  const double c_edge = std::sqrt(1.0 / (-2.0 * r1));
  const double b_int = sextic_amplitude(a2, r2, en.sigma2);
  const double c_int = sextic_amplitude(a1, r1, en.sigma2);
  const double d_int = sextic_amplitude(a1 + s3 * a2, r1, en.sigma2);
  const double e_int = sextic_amplitude(a1 - s3 * a2, r1, en.sigma2);

  const double ang = std::arg(std::conj(ch.h[0]) * ch.h[1]);
  const cplx chi = std::polar(1.0, ang);
  const cplx chi_pi = std::polar(1.0, ang + std::numbers::pi);

  const std::vector<std::pair<CVec2, const char*>> raw{
      {{0.0, b_edge}, "1-B-1"},
      {{0.0, b_int}, "1-B-2"},
      {{c_edge, 0.0}, "1-C-1"},
      {{c_int, 0.0}, "1-C-2"},
      {{c_edge * chi, s * c_edge}, "1-D-1"},
      {{d_int * chi, s * d_int}, "1-D-2"},
      {{c_edge * chi_pi, s * c_edge}, "2-1"},
      {{e_int * chi_pi, s * e_int}, "2-2"},
  };

  std::vector<PrecoderCandidate> out;
  for (const auto& [c, tag] : raw) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const PrecoderCandidate& p) { return same_vec(p.c_eff, c); });
    if (it != out.end()) {
      it->tag += std::string("|") + tag;
      continue;
    }
    const double v = sndr(c, ch, hw);
    out.push_back({c, tag, std::isfinite(v) ? achievable_se(v) : v, gains_of(c, hw)});
  }
  return out;
}

PrecoderSolution optimal_precoder(const ChannelSpec& ch, const HardwareConfig& hw) {
  const auto cands = optimal_precoder_candidates(ch, hw);

  // Positive Bussgang gains rank ahead; ties go to the smaller ‖c̃‖.
  const PrecoderCandidate* best = nullptr;
  const PrecoderCandidate* best_any = nullptr;
  bool tie = false;
  auto better = [&](const PrecoderCandidate& a, const PrecoderCandidate* b, bool& tied) {
    if (!b) return true;
    if (a.se > b->se * (1.0 + kTieTol) + 1e-300) return true;
    if (a.se >= b->se * (1.0 - kTieTol)) {
      if (norm2(a.c_eff) != norm2(b->c_eff)) tied = true;
      return norm2(a.c_eff) < norm2(b->c_eff);
    }
    return false;
  };
  for (const auto& c : cands) {
    if (!std::isfinite(c.se)) continue;
    bool ignored = false;
    if (better(c, best_any, ignored)) best_any = &c;
    if (c.gains.any_nonpositive()) continue;
    bool t = false;
    const bool wins = better(c, best, t);
    if (wins) {
      tie = t;
      best = &c;
    } else if (t) {
      tie = true;
    }
  }
  if (!best_any) throw NumericalError("optimal_precoder: every candidate is non-finite");

  PrecoderSolution sol;
  if (best) {
    sol = make_solution(best->c_eff, ch, hw, best->tag);
    if (best_any != best && best_any->se > best->se)
      sol.warnings.push_back({"bussgang-gain",
                              "candidate " + best_any->tag +
                                  " scored higher but has a Bussgang gain <= 0; downgraded"});
  } else {
    sol = make_solution(best_any->c_eff, ch, hw, best_any->tag);
    sol.warnings.push_back({"bussgang-gain", "no candidate has positive Bussgang gains"});
  }
  if (tie) {
    sol.provenance += " (tie: smaller norm kept)";
    sol.warnings.push_back({"tie", "candidates reach the same SE; kept the smaller norm"});
  }
  if (auto w = small_error_warning(hw)) sol.warnings.push_back(*w);
  return sol;
}

double perturbed_se_phase(const PrecoderSolution& sol, const ChannelSpec& ch,
                          const HardwareConfig& hw, double theta) {
  CVec2 c = sol.c_eff;
  c[0] *= std::polar(1.0, theta);
  return achievable_se(sndr(c, ch, hw));
}

double perturbed_se_scale(const PrecoderSolution& sol, const ChannelSpec& ch,
                          const HardwareConfig& hw, double scale) {
  CVec2 c = sol.c_eff;
  c[0] *= scale;
  return achievable_se(sndr(c, ch, hw));
}

namespace {

struct MrtConstants {
  CVec2 c_hat;  // Q h* / |h1|
  cplx k0, k1;
  double sigma2;
};

MrtConstants mrt_constants(const ChannelSpec& ch, const HardwareConfig& hw) {
  if (std::abs(ch.h[0]) == 0.0) throw DomainError("conventional_mrt: h1 = 0");
  const auto en = effective_noise(ch, hw);
  const CVec2 hc{std::conj(ch.h[0]), std::conj(ch.h[1])};
  CVec2 c = build_q(hw) * hc;
  const double h1 = std::abs(ch.h[0]);
  c = {c[0] / h1, c[1] / h1};
  const cplx k0 = ch.h[0] * c[0] + ch.h[1] * c[1];
  const cplx k1 =
      en.h_tilde[0] * std::norm(c[0]) * c[0] + en.h_tilde[1] * std::norm(c[1]) * c[1];
  return {c, k0, k1, en.sigma2};
}

}  // namespace

double conventional_mrt_se(const ChannelSpec& ch, const HardwareConfig& hw, double p_x) {
  const auto m = mrt_constants(ch, hw);
  const double r = std::sqrt(p_x);
  return achievable_se(sndr({r * m.c_hat[0], r * m.c_hat[1]}, ch, hw));
}

PrecoderSolution conventional_mrt(const ChannelSpec& ch, const HardwareConfig& hw) {
  ch.validate();
  hw.validate();
  require_compression(hw, "conventional_mrt");
  const auto m = mrt_constants(ch, hw);
  const double a = std::norm(m.k1), b = std::norm(m.k0);
  const double r = (m.k0 * std::conj(m.k1)).real();
  const double s2 = m.sigma2;
  const RealPoly quartic{2.0 * a * r, 2.0 * a * b, -3.0 * a * s2, -4.0 * r * s2, -b * s2};

  std::vector<double> roots;
  try {
    roots = real_roots(quartic).positive_roots;
  } catch (const DomainError& e) {
    throw NumericalError(std::string("conventional_mrt: degenerate quartic: ") + e.what());
  }
  if (roots.empty())
    throw NumericalError("conventional_mrt: quartic has no positive root (boundary supremum)");

  double best_p = roots.front();
  double best_v = -1.0;
  for (double p : roots) {
    const double rp = std::sqrt(p);
    const double v = sndr({rp * m.c_hat[0], rp * m.c_hat[1]}, ch, hw);
    if (v > best_v * (1.0 + kTieTol)) {
      best_v = v;
      best_p = p;
    }
  }
  const double rp = std::sqrt(best_p);
  std::ostringstream tag;
  tag << "quartic root " << (std::find(roots.begin(), roots.end(), best_p) - roots.begin()) + 1
      << " of " << roots.size();
  auto sol = make_solution({rp * m.c_hat[0], rp * m.c_hat[1]}, ch, hw, tag.str());
  if (sol.bussgang_gains.any_nonpositive())
    sol.warnings.push_back({"bussgang-gain", "conventional MRT optimum has a Bussgang gain <= 0"});
  return sol;
}

CVec2 distortion_aware_effective(const ChannelSpec& ch, const HardwareConfig& hw, double eta) {
  if (!(eta > 0.0)) throw DomainError("distortion_aware_effective: eta must be > 0");
  CVec2 c{};
  for (int l = 0; l < 2; ++l) {
    const double ah = std::abs(ch.h[l]);
    const double rho = hw.rho[l];
    if (ah == 0.0) continue;
    const double x = 8.0 * rho * ah * ah * eta;  // ≤ 0
    // 1 − √(1 − x) = x / (1 + √(1 − x)) avoids cancellation for small x.
    const double num = x / (1.0 + std::sqrt(1.0 - x));
    const double amp = num / (4.0 * rho * ah * std::sqrt(eta));
    c[l] = std::polar(amp, -std::arg(ch.h[l]));
  }
  return c;
}

std::vector<double> eta_grid(const ChannelSpec& ch, const HardwareConfig& hw,
                             const EtaGridOptions& opt) {
  if (opt.points < 2 || !(opt.hi_dbm > opt.lo_dbm))
    throw DomainError("eta_grid: need at least two points and hi > lo");
  // Small-signal c̃ ≈ √η h*, so P_x = η |(Q^-1 h*)_1|^2.
  const CVec2 hc{std::conj(ch.h[0]), std::conj(ch.h[1])};
  const double lin = std::norm((build_q(hw).inverse() * hc)[0]);
  if (!(lin > 0.0)) throw DomainError("eta_grid: (Q^-1 h*)_1 vanishes");
  std::vector<double> g(static_cast<std::size_t>(opt.points));
  const double step = (opt.hi_dbm - opt.lo_dbm) / (opt.points - 1);
  for (int i = 0; i < opt.points; ++i) g[i] = units::dbm_to_watt(opt.lo_dbm + step * i) / lin;
  return g;
}

DaMrtCurve distortion_aware_mrt_curve(const ChannelSpec& ch, const HardwareConfig& hw,
                                      const EtaGridOptions& opt) {
  ch.validate();
  hw.validate();
  require_compression(hw, "distortion_aware_mrt");
  const ComplexMat2 qi = build_q(hw).inverse();
  DaMrtCurve out;
  out.eta = eta_grid(ch, hw, opt);
  for (double eta : out.eta) {
    const CVec2 c = distortion_aware_effective(ch, hw, eta);
    out.p_x.push_back(std::norm((qi * c)[0]));
    out.se.push_back(achievable_se(sndr(c, ch, hw)));
  }
  return out;
}

PrecoderSolution distortion_aware_mrt(const ChannelSpec& ch, const HardwareConfig& hw,
                                      const EtaGridOptions& opt) {
  const auto curve = distortion_aware_mrt_curve(ch, hw, opt);
  std::size_t k = 0;
  for (std::size_t i = 1; i < curve.se.size(); ++i)
    if (curve.se[i] > curve.se[k]) k = i;
  std::ostringstream tag;
  tag << "eta grid point " << k << " of " << curve.se.size();
  auto sol = make_solution(distortion_aware_effective(ch, hw, curve.eta[k]), ch, hw, tag.str());
  if (k == 0 || k + 1 == curve.se.size())
    sol.warnings.push_back({"grid-edge", "distortion-aware MRT optimum on the eta grid boundary"});
  return sol;
}

PrecoderGridResult grid_optimal_precoder(const ChannelSpec& ch, const HardwareConfig& hw,
                                         int points, Exec exec) {
  ch.validate();
  hw.validate();
  require_compression(hw, "grid_optimal_precoder");
  if (points < 2) throw DomainError("grid_optimal_precoder: points must be >= 2");
  const double ext1 = 5.0 * std::sqrt(1.0 / (-2.0 * hw.rho[0]));
  const double ext2 = 5.0 * std::sqrt(1.0 / (-2.0 * hw.rho[1]));
  const double ang = std::arg(std::conj(ch.h[0]) * ch.h[1]);

  PrecoderGridResult best;
  best.se = -1.0;
  for (double phase : {ang, ang + std::numbers::pi}) {
    const auto r = kernels::precoder_grid(exec, ch, hw, phase, ext1, ext2, points);
    if (r.se > best.se) {
      best.se = r.se;
      best.c_eff = r.c_eff;
    }
  }
  best.step1 = ext1 / (points - 1);
  best.step2 = ext2 / (points - 1);
  return best;
}

}  // namespace dirtytx
