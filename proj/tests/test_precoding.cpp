#include <set>
#include <sstream>

#include "doctest.h"
#include "dirtytx/precoding.hpp"
#include "dirtytx/units.hpp"
#include "oracles.hpp"

using namespace dirtytx;
using oracle::rel;

namespace {

ChannelSpec random_channel(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  return {{cplx{nd(rng), nd(rng)}, cplx{nd(rng), nd(rng)}}, 1.0};
}

CVec2 random_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  return {cplx{nd(rng), nd(rng)}, cplx{nd(rng), nd(rng)}};
}

// |h^T A Q c|² / (h^T V h* + σ_w² ‖h‖² + σ_n²) from the core-model pieces,
// with c the actual precoder.
double sndr_from_core(const CVec2& c, const ChannelSpec& ch, const HardwareConfig& hw) {
  const auto m = build_bussgang_model(hw, SignalSpec::from_precoder(c));
  const CVec2 aqc = (m.a.matrix() * m.q) * c;
  const cplx sig = ch.h[0] * aqc[0] + ch.h[1] * aqc[1];
  const CVec2 hc{std::conj(ch.h[0]), std::conj(ch.h[1])};
  const CVec2 vh = m.v_cov * hc;
  const double hn = std::norm(ch.h[0]) + std::norm(ch.h[1]);
  return std::norm(sig) / ((ch.h[0] * vh[0] + ch.h[1] * vh[1]).real() + hw.sigma_w2 * hn + ch.sigma_n2);
}

double se_at(const CVec2& c, const ChannelSpec& ch, const HardwareConfig& hw) {
  return achievable_se(sndr(c, ch, hw));
}

double angle_between(const CVec2& a, const CVec2& b) {
  const cplx ip = std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1];
  const double na = std::sqrt(std::norm(a[0]) + std::norm(a[1]));
  const double nb = std::sqrt(std::norm(b[0]) + std::norm(b[1]));
  return std::acos(std::min(1.0, std::abs(ip) / (na * nb)));
}

double wrap(double a) { return std::remainder(a, 2.0 * M_PI); }

const ChannelSpec kFixedChannel{{cplx{0.8, -0.3}, cplx{-0.4, 0.9}}, 1.0};

}  // namespace

TEST_CASE("achievable_se") {
  CHECK(achievable_se(0.0) == 0.0);
  CHECK(achievable_se(1.0) == 1.0);
  CHECK(achievable_se(3.0) == 2.0);
  CHECK_THROWS_AS(achievable_se(-0.1), DomainError);
}

TEST_CASE("sndr: trivial cases") {
  const auto hw = oracle::reference_symmetric();
  CHECK(sndr({0.0, 0.0}, kFixedChannel, hw) == 0.0);

  HardwareConfig lin = hw;
  lin.rho = {0.0, 0.0};
  const CVec2 c{cplx{0.3, 0.1}, cplx{-0.2, 0.4}};
  const cplx s = kFixedChannel.h[0] * c[0] + kFixedChannel.h[1] * c[1];
  const double hn = std::norm(kFixedChannel.h[0]) + std::norm(kFixedChannel.h[1]);
  CHECK(sndr(c, kFixedChannel, lin) ==
        doctest::Approx(std::norm(s) / (lin.sigma_w2 * hn + 1.0)).epsilon(1e-14));

  // Large drive along a fixed direction saturates at 2.
  double prev = 0.0;
  for (double scale : {1e2, 1e3, 1e4, 1e5}) {
    const double v = sndr({scale * c[0], scale * c[1]}, kFixedChannel, hw);
    CHECK(std::abs(v - 2.0) <= std::max(std::abs(prev - 2.0), 1.0));
    prev = v;
  }
  CHECK(prev == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("sndr: scalar and matrix forms agree (random instances)") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 1000; ++i) {
    const auto hw = oracle::random_hardware(rng);
    const auto ch = random_channel(rng);
    const CVec2 c = random_vec(rng, 0.01);
    const CVec2 c_eff = build_q(hw) * c;
    const double a = sndr(c_eff, ch, hw);
    CHECK(rel(a, sndr_matrix_form(c_eff, ch, hw)) < 1e-10);
    CHECK(rel(a, sndr_from_core(c, ch, hw)) < 1e-10);
  }
}

TEST_CASE("sndr: common phase rotation is a gauge freedom") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  for (int i = 0; i < 200; ++i) {
    const auto hw = oracle::random_hardware(rng);
    const auto ch = random_channel(rng);
    const CVec2 c = random_vec(rng, 3.0);
    const cplx r = std::polar(1.0, u(rng));
    CHECK(rel(sndr(c, ch, hw), sndr({r * c[0], r * c[1]}, ch, hw)) < 1e-12);
  }
}

TEST_CASE("effective noise") {
  const auto hw = oracle::reference_symmetric();
  const auto en = effective_noise(kFixedChannel, hw);
  CHECK(std::abs(en.h_tilde[0] - 2.0 * -0.025 * kFixedChannel.h[0]) < 1e-15);
  CHECK(en.sigma2 == doctest::Approx(2.0 * 1e-4 * (0.73 + 0.97) + 2.0).epsilon(1e-14));
}

TEST_CASE("optimal_precoder: candidate structure") {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 200; ++i) {
    auto hw = oracle::random_hardware(rng);
    const auto ch = random_channel(rng);
    const auto cands = optimal_precoder_candidates(ch, hw);
    const auto sol = optimal_precoder(ch, hw);
    const double s = std::sqrt(std::abs(hw.rho[0]) / std::abs(hw.rho[1]));
    const double ang = std::arg(std::conj(ch.h[0]) * ch.h[1]);
    for (const auto& c : cands) {
      if (!c.gains.any_nonpositive()) CHECK(sol.se >= c.se * (1.0 - 1e-12));
      const bool joint = c.tag.find("1-D") != std::string::npos || c.tag.find("2-") != std::string::npos;
      if (joint) {
        CHECK(rel(std::abs(c.c_eff[1]), s * std::abs(c.c_eff[0])) < 1e-14);
        const double d = wrap(std::arg(c.c_eff[0]) - std::arg(c.c_eff[1]) - ang);
        const bool ok = std::abs(d) < 1e-9 || std::abs(std::abs(d) - M_PI) < 1e-9;
        CHECK(ok);
      }
    }
    CHECK(rel(sol.se, achievable_se(sol.sndr)) < 1e-15);
    CHECK(rel(sol.p_x, std::norm(sol.c[0])) < 1e-15);
    const CVec2 back = build_q(hw) * sol.c;
    CHECK(std::abs(back[0] - sol.c_eff[0]) + std::abs(back[1] - sol.c_eff[1]) <=
          1e-12 * (std::abs(sol.c_eff[0]) + std::abs(sol.c_eff[1])));
    // Phase difference of the winner when both branches are active.
    if (std::abs(sol.c_eff[0]) > 0.0 && std::abs(sol.c_eff[1]) > 0.0) {
      const double d = wrap(std::arg(sol.c_eff[0]) - std::arg(sol.c_eff[1]) - ang);
      CHECK((std::abs(d) < 1e-9 || std::abs(std::abs(d) - M_PI) < 1e-9));
    }
  }
}

TEST_CASE("optimal_precoder: duplicates merged") {
  const auto hw = oracle::reference_symmetric();
  // Every tag appears exactly once, merged or not.
  const auto cands = optimal_precoder_candidates(kFixedChannel, hw);
  std::set<std::string> tags;
  for (const auto& c : cands) {
    std::stringstream ss(c.tag);
    std::string t;
    while (std::getline(ss, t, '|')) CHECK(tags.insert(t).second);
  }
  CHECK(tags.size() == 8);
}

TEST_CASE("optimal_precoder: SE-maximizing fixed point checks") {
  const auto hw = oracle::reference_symmetric();
  const auto sol = optimal_precoder(kFixedChannel, hw);
  CHECK(perturbed_se_phase(sol, kFixedChannel, hw, 0.0) == sol.se);
  CHECK(perturbed_se_scale(sol, kFixedChannel, hw, 1.0) == sol.se);
  for (int k = 1; k < 36; ++k)
    CHECK(perturbed_se_phase(sol, kFixedChannel, hw, 2.0 * M_PI * k / 36.0) <= sol.se * (1.0 + 1e-12));
  for (double s : {0.1, 0.5, 0.9, 0.99, 1.01, 1.1, 1.5, 2.0, 3.0})
    CHECK(perturbed_se_scale(sol, kFixedChannel, hw, s) <= sol.se * (1.0 + 1e-12));
  // Past the optimum the SE falls while a1 shrinks towards zero.
  const double s_zero = std::sqrt(1.0 / (-2.0 * hw.rho[0])) / std::abs(sol.c_eff[0]);
  double prev = sol.se;
  for (int k = 1; k <= 50; ++k) {
    const double v = perturbed_se_scale(sol, kFixedChannel, hw, 1.0 + (s_zero - 1.0) * k / 50.0);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 0.25 * sol.se);
  CHECK(perturbed_se_scale(sol, kFixedChannel, hw, 3.0) < 0.5 * sol.se);
}

TEST_CASE("optimal_precoder matches the brute-force grid") {
  std::mt19937_64 rng(34);
  const auto hw = oracle::reference_symmetric();
  for (int i = 0; i < 10; ++i) {
    const auto ch = random_channel(rng);
    const auto sol = optimal_precoder(ch, hw);
    const auto g = grid_optimal_precoder(ch, hw, 400);
    // Grid resolution: largest SE drop from moving the optimum by one grid step.
    double tol = 0.0;
    for (int d1 = -1; d1 <= 1; ++d1) {
      for (int d2 = -1; d2 <= 1; ++d2) {
        const double a1 = std::max(0.0, std::abs(sol.c_eff[0]) + d1 * g.step1);
        const double a2 = std::max(0.0, std::abs(sol.c_eff[1]) + d2 * g.step2);
        const CVec2 c{std::polar(a1, std::arg(sol.c_eff[0])), std::polar(a2, std::arg(sol.c_eff[1]))};
        tol = std::max(tol, sol.se - se_at(c, ch, hw));
      }
    }
    CHECK(g.se <= sol.se * (1.0 + 1e-12));
    CHECK(sol.se - g.se <= tol + 1e-12);
  }
}

TEST_CASE("optimal_precoder: h2 = 0 puts all power on branch 1") {
  const auto hw = oracle::reference_symmetric();
  const ChannelSpec ch{{cplx{0.6, 0.8}, 0.0}, 1.0};
  const auto sol = optimal_precoder(ch, hw);
  CHECK(sol.provenance.find("1-C") != std::string::npos);
  CHECK(sol.c_eff[1] == cplx{});
  const auto g = grid_optimal_precoder(ch, hw, 400);
  CHECK(std::abs(g.c_eff[1]) == 0.0);
  CHECK(g.se <= sol.se * (1.0 + 1e-12));
}

TEST_CASE("optimal_precoder: preconditions") {
  auto hw = oracle::reference_symmetric();
  hw.rho = {-0.025, 0.0};
  CHECK_THROWS_AS(optimal_precoder(kFixedChannel, hw), DomainError);
  CHECK_THROWS_AS(optimal_precoder({{0.0, 0.0}, 1.0}, oracle::reference_symmetric()), DomainError);
}

TEST_CASE("optimal_precoder: vanishing compression approaches MRT direction") {
  HardwareConfig hw;
  hw.gamma = {std::sqrt(1000.0), std::sqrt(1000.0)};
  hw.rho = {-1e-6, -1e-6};
  hw.sigma_w2 = 1e-4;
  std::mt19937_64 rng(35);
  for (int i = 0; i < 5; ++i) {
    const auto ch = random_channel(rng);
    const auto sol = optimal_precoder(ch, hw);
    const CVec2 mrt{std::conj(ch.h[0]), std::conj(ch.h[1])};
    CHECK(angle_between(sol.c_eff, mrt) < 1e-3);
  }
}

TEST_CASE("conventional_mrt") {
  const auto hw = oracle::reference_symmetric();
  const auto sol = conventional_mrt(kFixedChannel, hw);
  // Interior optimum: derivative in log P vanishes.
  const double h = 1e-4;
  const double d = (conventional_mrt_se(kFixedChannel, hw, sol.p_x * std::exp(h)) -
                    conventional_mrt_se(kFixedChannel, hw, sol.p_x * std::exp(-h))) /
                   (2.0 * h);
  CHECK(std::abs(d) <= 1e-6);
  CHECK(rel(sol.se, conventional_mrt_se(kFixedChannel, hw, sol.p_x)) < 1e-12);
  // Direction is h*.
  const CVec2 hc{std::conj(kFixedChannel.h[0]), std::conj(kFixedChannel.h[1])};
  CHECK(angle_between(sol.c, hc) < 1e-12);
  // Maximizes SE along the MRT ray.
  auto grid = oracle::log_grid_min([&](double p) { return -conventional_mrt_se(kFixedChannel, hw, p); },
                                   -40.0, 40.0, 10000);
  CHECK(sol.se >= -grid.value * (1.0 - 1e-12));
  CHECK(std::abs(units::linear_to_db(sol.p_x / grid.x)) <= grid.step_db);

  CHECK_THROWS_AS(conventional_mrt({{0.0, 1.0}, 1.0}, hw), DomainError);
}

TEST_CASE("conventional_mrt: no crosstalk, small compression vs line search") {
  HardwareConfig hw;
  hw.gamma = {std::sqrt(1000.0), std::sqrt(1000.0)};
  hw.rho = {-1e-3, -1e-3};
  hw.sigma_w2 = 1e-4;
  const auto sol = conventional_mrt(kFixedChannel, hw);
  auto grid = oracle::log_grid_min([&](double p) { return -conventional_mrt_se(kFixedChannel, hw, p); },
                                   -40.0, 40.0, 10000);
  CHECK(std::abs(units::linear_to_db(sol.p_x / grid.x)) <= grid.step_db);
}

TEST_CASE("distortion-aware MRT") {
  const auto hw = oracle::reference_symmetric();
  for (double eta : {1e-6, 1e-3, 1.0, 1e3}) {
    const CVec2 c = distortion_aware_effective(kFixedChannel, hw, eta);
    for (int l = 0; l < 2; ++l) {
      const cplx fp = std::sqrt(eta) * std::conj(kFixedChannel.h[l]) * (1.0 + 2.0 * hw.rho[l] * std::norm(c[l]));
      CHECK(std::abs(c[l] - fp) <= 1e-10 * std::max(1.0, std::abs(c[l])));
    }
  }
  CHECK_THROWS_AS(distortion_aware_effective(kFixedChannel, hw, 0.0), DomainError);

  // η grid maps to the configured small-signal power range.
  const auto grid = eta_grid(kFixedChannel, hw);
  REQUIRE(grid.size() == 200);
  const CVec2 small = distortion_aware_effective(kFixedChannel, hw, grid.front());
  CHECK(units::watt_to_dbm(std::norm((build_q(hw).inverse() * small)[0])) ==
        doctest::Approx(-40.0).epsilon(1e-6));

  // Unimodal SE along the grid.
  const auto curve = distortion_aware_mrt_curve(kFixedChannel, hw);
  int changes = 0;
  for (std::size_t i = 2; i < curve.se.size(); ++i) {
    const bool up_prev = curve.se[i - 1] > curve.se[i - 2];
    const bool up = curve.se[i] > curve.se[i - 1];
    if (up_prev != up) ++changes;
  }
  CHECK(changes == 1);

  const auto opt = optimal_precoder(kFixedChannel, hw);
  for (std::size_t i = 0; i < curve.se.size(); ++i) CHECK(opt.se >= curve.se[i]);
  const auto da = distortion_aware_mrt(kFixedChannel, hw);
  for (const auto& w : da.warnings) CHECK(w.code != "grid-edge");
  CHECK(opt.se >= da.se);
  CHECK(da.se >= conventional_mrt(kFixedChannel, hw).se);
}

TEST_CASE("distortion-aware MRT beats conventional MRT at the same power above 5 dBm") {
  const auto hw = oracle::reference_symmetric();
  const auto curve = distortion_aware_mrt_curve(kFixedChannel, hw);
  const auto q = build_q(hw);
  for (std::size_t i = 0; i < curve.se.size(); ++i) {
    if (units::watt_to_dbm(curve.p_x[i]) <= 5.0) continue;
    // Only operating points where both precoders keep positive Bussgang gains.
    const CVec2 da = distortion_aware_effective(kFixedChannel, hw, curve.eta[i]);
    const double r = std::sqrt(curve.p_x[i]) / std::abs(kFixedChannel.h[0]);
    const CVec2 conv = q * CVec2{r * std::conj(kFixedChannel.h[0]), r * std::conj(kFixedChannel.h[1])};
    bool positive = true;
    for (int l = 0; l < 2; ++l)
      positive = positive && 1.0 + 2.0 * hw.rho[l] * std::norm(da[l]) > 0.0 &&
                 1.0 + 2.0 * hw.rho[l] * std::norm(conv[l]) > 0.0;
    if (!positive) continue;
    CHECK(curve.se[i] >= conventional_mrt_se(kFixedChannel, hw, curve.p_x[i]));
  }
}

TEST_CASE("optimal SE dominates both MRT variants (random instances)") {
  std::mt19937_64 rng(36);
  const auto hw = oracle::reference_symmetric();
  for (int i = 0; i < 100; ++i) {
    const auto ch = random_channel(rng);
    const auto opt = optimal_precoder(ch, hw);
    CHECK(opt.se >= conventional_mrt(ch, hw).se * (1.0 - 1e-12));
    CHECK(opt.se >= distortion_aware_mrt(ch, hw).se * (1.0 - 1e-12));
  }
}

TEST_CASE("grid oracle: serial and parallel agree") {
  const auto hw = oracle::reference_symmetric();
  const auto a = grid_optimal_precoder(kFixedChannel, hw, 120, Exec::serial);
  const auto b = grid_optimal_precoder(kFixedChannel, hw, 120, Exec::parallel);
  CHECK(a.se == b.se);
  CHECK(a.c_eff == b.c_eff);
}
