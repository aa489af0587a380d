// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "dirtytx/kernels.hpp"
#include "dirtytx/montecarlo.hpp"
#include "dirtytx/mxm.hpp"
#include "dirtytx/nmse.hpp"
#include "dirtytx/polyroots.hpp"
#include "dirtytx/precoding.hpp"
#include "dirtytx/units.hpp"
#include "oracles.hpp"

using namespace dirtytx;
using oracle::rel;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const char* title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s (%.2f s)%s\n", o.pass ? "PASS" : "FAIL", id, title, s,
              o.detail.str().c_str());
  std::fflush(stdout);
}

double db(double x) { return units::linear_to_db(x); }

SignalSpec sym_at(double dbm) { return {units::dbm_to_watt(dbm), 1.0, 0.0}; }

ChannelSpec random_channel(std::mt19937_64& rng, double sigma_n2 = 1.0) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  return {{cplx{nd(rng), nd(rng)}, cplx{nd(rng), nd(rng)}}, sigma_n2};
}

double refine_grid_min(const std::function<double(double)>& f, double lo, double hi) {
  for (int round = 0; round < 12; ++round) {
    const int n = 401;
    double best = lo, bv = INFINITY;
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i) {
      const double x = std::exp(llo + (lhi - llo) * i / (n - 1));
      const double v = f(x);
      if (v < bv) {
        bv = v;
        best = x;
      }
    }
    const double w = (lhi - llo) / (n - 1);
    lo = std::exp(std::log(best) - 2.0 * w);
    hi = std::exp(std::log(best) + 2.0 * w);
  }
  return std::sqrt(lo * hi);
}

void criterion1(Outcome& o) {
  const auto hw = oracle::reference_symmetric(-50.0);
  const std::array<double, 3> p{-20.0, -10.0, 0.0}, want{-32.0, -22.0, -29.0};
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 3; ++i) {
    const auto b = simulate(hw, sym_at(p[i]), 10000, 42);
    const double got = db(covariance_nmse(b, hw).cross);
    o.detail << " " << p[i] << " dBm: " << got << " dB (target " << want[i] << ");";
    o.require(std::abs(got - want[i]) <= 3.0, "covariance NMSE at " + std::to_string(int(p[i])) + " dBm");
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(s < 30.0, "runtime");
}

void criterion2(Outcome& o) {
  double worst = 0.0;
  for (double k2 : {-70.0, -60.0, -50.0}) {
    const auto hw = oracle::reference_symmetric(k2);
    for (int i = 0; i < 20; ++i) {
      const double dbm = -30.0 + 2.0 * i;
      const auto s = sym_at(dbm);
      const auto b = simulate(hw, s, 10000, 100 + i);
      const auto e = empirical_nmse(b, hw, s);
      const auto a = nmse_branches(hw, s, s.p_x);
      worst = std::max({worst, std::abs(db(e[0]) - db(a.nmse1)), std::abs(db(e[1]) - db(a.nmse2))});
    }
  }
  o.detail << " max |analytic - MC| = " << worst << " dB over 60 points;";
  o.require(worst <= 1.0, "analytic vs MC within 1 dB");

  const auto hw = oracle::reference_symmetric(-70.0);
  const auto sol = minmax_backoff(hw, {0.0, 1.0, 0.0});
  const double opt_dbm = units::watt_to_dbm(sol.p_x_opt);
  o.detail << " optimum " << opt_dbm << " dBm;";
  o.require(std::abs(opt_dbm + 6.0) <= 1.0, "optimum within 1 dB of -6 dBm");
  const double base = db(sol.achieved);
  for (double d : {-4.0, 4.0}) {
    const double p = units::dbm_to_watt(opt_dbm + d);
    const double rise = db(nmse_branches(hw, sym_at(opt_dbm + d), p).nmse1) - base;
    o.detail << " rise at " << (d > 0 ? "+" : "") << d << " dB: " << rise << " dB;";
    o.require(std::abs(rise - 2.0) <= 0.7, "rise of 2 +/- 0.7 dB");
  }
}

void criterion3(Outcome& o) {
  std::mt19937_64 rng(16);
  int misses = 0;
  for (int i = 0; i < 100; ++i) {
    const auto hw = i == 0 ? oracle::reference_asymmetric() : oracle::random_hardware(rng);
    const SignalSpec spec = i == 0 ? SignalSpec{0.0, 1.3, 0.7} : oracle::random_signal(rng);
    const auto b = minmax_backoff(hw, spec);
    const auto g = grid_minmax_backoff(hw, spec);
    if (std::abs(db(b.p_x_opt) - db(g.p_x)) > g.step_db * (1.0 + 1e-9)) ++misses;
  }
  o.detail << " grid misses " << misses << "/100;";
  o.require(misses == 0, "grid agreement");
  const auto hw = oracle::reference_asymmetric();
  const SignalSpec spec{0.0, 1.3, 0.7};
  const auto b = minmax_backoff(hw, spec);
  const auto r = nmse_branches(hw, spec, b.p_x_opt);
  o.detail << " asymmetric active candidate " << b.active_case << " (3 = crossing), |NMSE1/NMSE2 - 1| = " << rel(r.nmse1, r.nmse2) << ";";
  o.require(b.active_case == 3, "optimum at the crossing point");
  o.require(rel(r.nmse1, r.nmse2) <= 1e-4, "equal branch NMSE");
}

void criterion4(Outcome& o) {
  auto hw = oracle::reference_symmetric();
  const SignalSpec s{0.0, 0.0, 0.0};
  const double want = siso_optimal_power(hw.gamma[0], hw.rho[0], hw.sigma_w2);
  const double g = refine_grid_min([&](double x) { return nmse_branches(hw, s, x).nmse1; }, 1e-6, 1.0);
  o.detail << " grid vs closed form " << rel(g, want) << ";";
  o.require(rel(g, want) <= 1e-6, "grid minimizer");
  std::mt19937_64 rng(14);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto h = oracle::random_hardware(rng);
    h.kappa[1] = 0.0;
    const double r = unique_positive_root(branch_stationarity_poly(h, {0.0, 0.0, 0.0}, 1));
    worst = std::max(worst, rel(r, siso_optimal_power(h.gamma[0], h.rho[0], h.sigma_w2)));
  }
  o.detail << " stationarity root vs closed form " << worst << ";";
  o.require(worst <= 1e-9, "stationarity root");
}

void criterion5(Outcome& o) {
  std::mt19937_64 rng(34);
  const auto hw = oracle::reference_symmetric();
  double worst_excess = -INFINITY, worst_gap_over_res = 0.0;
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ch = random_channel(rng);
    const auto sol = optimal_precoder(ch, hw);
    const auto g = grid_optimal_precoder(ch, hw, 400);
    double res = 0.0;
    for (int d1 = -1; d1 <= 1; ++d1)
      for (int d2 = -1; d2 <= 1; ++d2) {
        const double a1 = std::max(0.0, std::abs(sol.c_eff[0]) + d1 * g.step1);
        const double a2 = std::max(0.0, std::abs(sol.c_eff[1]) + d2 * g.step2);
        const CVec2 c{std::polar(a1, std::arg(sol.c_eff[0])), std::polar(a2, std::arg(sol.c_eff[1]))};
        res = std::max(res, sol.se - achievable_se(sndr(c, ch, hw)));
      }
    worst_excess = std::max(worst_excess, g.se - sol.se);
    if (sol.se < g.se - 1e-3 || sol.se - g.se > res + 1e-12) ++bad;
    if (res > 0.0) worst_gap_over_res = std::max(worst_gap_over_res, (sol.se - g.se) / res);
  }
  o.detail << " max(grid - optimal) = " << worst_excess << " bit, max gap/resolution = "
           << worst_gap_over_res << ", violations " << bad << "/100;";
  o.require(bad == 0, "grid agreement");
}

void criterion6(Outcome& o) {
  std::mt19937_64 rng(60);
  const auto hw = oracle::reference_symmetric();
  double worst = -INFINITY, worst_ratio3 = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto ch = random_channel(rng);
    const auto sol = optimal_precoder(ch, hw);
    for (int k = 0; k < 36; ++k)
      worst = std::max(worst, perturbed_se_phase(sol, ch, hw, 2.0 * M_PI * k / 36.0) - sol.se);
    for (int k = 0; k < 20; ++k)
      worst = std::max(worst, perturbed_se_scale(sol, ch, hw, 0.1 + 2.9 * k / 19.0) - sol.se);
    worst_ratio3 = std::max(worst_ratio3, perturbed_se_scale(sol, ch, hw, 3.0) / sol.se);
  }
  o.detail << " max(perturbed - optimal) = " << worst << " bit, max SE(3x)/SE = " << worst_ratio3 << ";";
  o.require(worst <= 1e-9, "no perturbation beats the optimum");
  o.require(worst_ratio3 < 0.5, "3x scaling halves the SE");
}

struct Means {
  double opt = 0.0, da = 0.0, conv = 0.0;
};

Means average_se(const std::vector<CVec2>& hs, const HardwareConfig& hw, double sigma_n2) {
  std::vector<std::array<double, 3>> per(hs.size());
  kernels::for_each(Exec::parallel, hs.size(), [&](std::size_t i) {
    const ChannelSpec ch{hs[i], sigma_n2};
    per[i] = {optimal_precoder(ch, hw).se, distortion_aware_mrt(ch, hw).se, conventional_mrt(ch, hw).se};
  });
  Means m;
  for (const auto& v : per) {
    m.opt += v[0];
    m.da += v[1];
    m.conv += v[2];
  }
  const double n = static_cast<double>(hs.size());
  return {m.opt / n, m.da / n, m.conv / n};
}

void criterion7(Outcome& o) {
  const auto hs = sample_channels(1000, 2024);
  const auto m = average_se(hs, oracle::reference_symmetric(), 1.0);
  o.detail << " means opt " << m.opt << ", DA " << m.da << ", conv " << m.conv << ";";
  o.require(m.opt - m.da >= -1e-6, "opt >= DA");
  o.require(m.da - m.conv >= -1e-6, "DA >= conv");

  std::vector<Means> sweep;
  std::vector<double> k2;
  for (int i = 0; i <= 8; ++i) {
    k2.push_back(-80.0 + 5.0 * i);
    sweep.push_back(average_se(hs, oracle::reference_symmetric(k2.back()), 1.0));
  }
  double lo_o = INFINITY, hi_o = -INFINITY, lo_d = INFINITY, hi_d = -INFINITY;
  for (const auto& s : sweep) {
    lo_o = std::min(lo_o, s.opt);
    hi_o = std::max(hi_o, s.opt);
    lo_d = std::min(lo_d, s.da);
    hi_d = std::max(hi_d, s.da);
  }
  bool mono = true;
  for (std::size_t i = 0; i + 1 < sweep.size(); ++i)
    if (k2[i] >= -60.0 && !(sweep[i + 1].conv < sweep[i].conv)) mono = false;
  o.detail << " spread opt " << hi_o - lo_o << ", DA " << hi_d - lo_d << "; conv "
           << sweep[4].conv << " -> " << sweep[8].conv << " from -60 to -40 dB;";
  o.require(hi_o - lo_o < 0.1, "optimal flat in crosstalk");
  o.require(hi_d - lo_d < 0.1, "DA-MRT flat in crosstalk");
  o.require(mono, "conventional MRT decreasing beyond -60 dB");
}

void criterion8(Outcome& o) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto u = oracle::random_psd(rng);
    const auto b = ComplexMat2::diag(u.m11.real(), u.m22.real());
    const auto ub = fourth_order_moment(u);
    const auto ubb = sixth_order_moment(u);
    worst = std::max(worst, rel(ub * u.inverse(), 2.0 * b));
    worst = std::max(worst, rel(ubb - ub * u.inverse() * ub.adjoint(), 2.0 * cubic_moment_matrix(u)));
  }
  o.detail << " identity error " << worst << ";";
  o.require(worst <= 1e-12, "moment identities");
  double emp = 0.0;
  for (int i = 0; i < 3; ++i) {
    const ComplexMat2 u = oracle::random_psd(rng);
    const auto m = empirical_moments(sample_gaussian(u, 100000, 41 + i));
    emp = std::max({emp, rel(m.second, u), rel(m.fourth, fourth_order_moment(u)),
                    rel(m.sixth, sixth_order_moment(u))});
  }
  o.detail << " empirical moment error " << emp << ";";
  o.require(emp <= 0.05, "empirical moments");
}

void criterion9(Outcome& o) {
  const auto hw = oracle::reference_symmetric();
  double worst = 0.0, model = 0.0;
  for (double dbm : {-20.0, -10.0, 0.0}) {
    const auto b = simulate(hw, sym_at(dbm), 100000, 33);
    worst = std::max(worst, bussgang_residual(b, empirical_bussgang_gains(b, hw)));
    model = std::max(model, bussgang_residual(b, build_bussgang_model(hw, sym_at(dbm))));
  }
  o.detail << " residual " << worst << " (with model-covariance gains: " << model << ");";
  o.require(worst < 0.02, "decorrelation");
}

void criterion10(Outcome& o) {
  std::mt19937_64 rng(10);
  double min_d2 = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const auto hw = oracle::random_hardware(rng);
    const auto spec = oracle::random_signal(rng);
    const auto c = nmse_curves(hw, spec);
    for (int k = 0; k < 100; ++k) {
      const double p = units::dbm_to_watt(-40.0 + 0.6 * k), h = 0.25 * p;
      for (int l = 0; l < 2; ++l) min_d2 = std::min(min_d2, c[l](p - h) - 2.0 * c[l](p) + c[l](p + h));
    }
  }
  o.detail << " min second difference " << min_d2 << ";";
  o.require(min_d2 >= -1e-9, "convexity");
  std::mt19937_64 rng2(12);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto hw = oracle::random_hardware(rng2);
    const auto spec = oracle::random_signal(rng2);
    const double p = units::dbm_to_watt(-30.0 + 0.3 * i);
    const auto d2 = nmse_second_derivative(hw, spec, p);
    for (int l = 0; l < 2; ++l) {
      auto f = [&](double x) {
        const auto r = nmse_branches(hw, spec, x);
        return l == 0 ? r.nmse1 : r.nmse2;
      };
      const double h = 1e-2 * p;
      const double fd =
          (4.0 * oracle::second_difference(f, p, 0.5 * h) - oracle::second_difference(f, p, h)) / 3.0;
      worst = std::max(worst, rel(d2[l], fd));
    }
  }
  o.detail << " second derivative vs finite difference " << worst << ";";
  o.require(worst <= 1e-6, "second derivative");
}

void criterion11(Outcome& o) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  auto note = [&](double v) { worst = std::max(worst, v); };
  const auto fo = QApproximation::first_order;
  for (int i = 0; i < 100; ++i) {
    const auto hw = oracle::random_hardware(rng);
    const auto spec = oracle::random_signal(rng);
    const auto hm = HardwareConfigM::from_2x2(hw);
    const auto sm = SignalSpecM::from_2x2(spec);

    const CMat q = build_q_m(hm, fo);
    const auto q2 = build_q(hw);
    note(std::abs(q(0, 1) - q2.m12) / std::abs(q2.m11));
    note(std::abs(q(1, 0) - q2.m21) / std::abs(q2.m11));
    note(rel(q(0, 0).real(), q2.m11.real()));
    note(rel(q(1, 1).real(), q2.m22.real()));

    for (double dbm : {-30.0, -10.0, 0.0, 10.0}) {
      const double p = units::dbm_to_watt(dbm);
      const auto a = nmse_branches(hw, spec, p);
      const auto b = nmse_branches_m(hm, sm, p, fo);
      note(rel(a.nmse1, b[0]));
      note(rel(a.nmse2, b[1]));
    }
    const auto m2 = minmax_backoff(hw, spec);
    const auto mm = minmax_backoff_m(hm, sm, fo);
    note(rel(m2.p_x_opt, mm.p_x_opt));
    note(rel(m2.achieved, mm.achieved));

    const auto ch = random_channel(rng);
    CVecX h(2);
    h << ch.h[0], ch.h[1];
    const ChannelSpecM cm{h, ch.sigma_n2};
    std::normal_distribution<double> nd(0.0, 0.05);
    const CVec2 c{cplx{nd(rng), nd(rng)}, cplx{nd(rng), nd(rng)}};
    CVecX cx(2);
    cx << c[0], c[1];
    note(rel(sndr(c, ch, hw), sndr_m(cx, cm, hm)));

    const auto v = mrt_variants_m(cm, hm, fo);
    note(rel(v.conventional.se, conventional_mrt(ch, hw).se));
    note(rel(v.distortion_aware.se, distortion_aware_mrt(ch, hw).se));
    for (double dbm : {-20.0, 0.0})
      note(rel(conventional_mrt_se_m(cm, hm, units::dbm_to_watt(dbm), fo),
               conventional_mrt_se(ch, hw, units::dbm_to_watt(dbm))));
  }
  o.detail << " max relative deviation " << worst << ";";
  o.require(worst <= 1e-9, "M = 2 specialization");
}

}  // namespace

int main() {
  report(1, "Gaussian approximation: covariance NMSE at -20/-10/0 dBm within 3 dB", criterion1);
  report(2, "closed-form NMSE vs Monte Carlo, optimum and back-off sensitivity", criterion2);
  report(3, "min-max back-off vs 10^4-point grid, asymmetric setup at the crossing point", criterion3);
  report(4, "single-branch optimum vs grid and stationarity root", criterion4);
  report(5, "optimal precoder vs 400x400x2 grid on 100 channels", criterion5);
  report(6, "perturbation optimality of the precoder", criterion6);
  report(7, "precoder ordering and crosstalk sweep", criterion7);
  report(8, "moment identities and empirical moments", criterion8);
  report(9, "Bussgang decorrelation at n = 10^5", criterion9);
  report(10, "convexity and second derivative", criterion10);
  report(11, "M = 2 specialization of the M-branch module", criterion11);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
