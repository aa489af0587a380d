#pragma once

// Single-stream 2x1 link: SNDR / spectral efficiency of a precoded symbol sent
// through the distorting transmitter, and three precoder designs.

#include <string>
#include <vector>

#include "dirtytx/core_model.hpp"
#include "dirtytx/exec.hpp"

namespace dirtytx {

struct ChannelSpec {
  CVec2 h{};
  double sigma_n2 = 1.0;  // receiver noise, W

  void validate() const;
};

// h̃ℓ = 2 hℓ ρℓ and σ² = 2σ_w²‖h‖² + 2σ_n².
struct EffectiveNoise {
  CVec2 h_tilde{};
  double sigma2 = 0.0;
};

EffectiveNoise effective_noise(const ChannelSpec& ch, const HardwareConfig& hw);

// SNDR of the effective precoder c̃ = Q c (scalar form).
double sndr(const CVec2& c_eff, const ChannelSpec& ch, const HardwareConfig& hw);

// Same quantity through A, V and U = c̃ c̃^H.
double sndr_matrix_form(const CVec2& c_eff, const ChannelSpec& ch, const HardwareConfig& hw);

// log2(1 + sndr).
double achievable_se(double sndr_value);

struct PrecoderSolution {
  CVec2 c_eff{};        // c̃ = Q c
  CVec2 c{};            // actual precoder Q^-1 c̃
  double se = 0.0;      // bits per channel use
  double sndr = 0.0;
  double p_x = 0.0;     // |c1|^2, W
  std::string provenance;
  BussgangGains bussgang_gains;
  Warnings warnings;
};

struct PrecoderCandidate {
  CVec2 c_eff{};
  std::string tag;  // e.g. "1-C-2"; merged duplicates join with '|'
  double se = 0.0;
  BussgangGains gains;
};

// The eight-element candidate set of the SE-optimal design, duplicates merged.
std::vector<PrecoderCandidate> optimal_precoder_candidates(const ChannelSpec& ch,
                                                           const HardwareConfig& hw);

// SE-maximizing precoder. Requires ρℓ < 0.
PrecoderSolution optimal_precoder(const ChannelSpec& ch, const HardwareConfig& hw);

// SE with c̃1 rotated by e^{jθ} / scaled by s, everything else fixed.
double perturbed_se_phase(const PrecoderSolution& sol, const ChannelSpec& ch,
                          const HardwareConfig& hw, double theta);
double perturbed_se_scale(const PrecoderSolution& sol, const ChannelSpec& ch,
                          const HardwareConfig& hw, double scale);

// Conventional MRT c = √P h*/|h1|, power chosen among the positive roots of
// the stationarity quartic. Throws DomainError for h1 = 0, NumericalError
// when the quartic has no positive root.
PrecoderSolution conventional_mrt(const ChannelSpec& ch, const HardwareConfig& hw);

// SE of conventional MRT at input power p_x.
double conventional_mrt_se(const ChannelSpec& ch, const HardwareConfig& hw, double p_x);

struct EtaGridOptions {
  double lo_dbm = -40.0;  // η range set from the small-signal P_x it maps to
  double hi_dbm = 40.0;
  int points = 200;
};

// c̃ℓ = (1 − √(1 − 8ρℓ|hℓ|²η)) / (4ρℓ|hℓ|√η) · e^{−j∠hℓ}.
CVec2 distortion_aware_effective(const ChannelSpec& ch, const HardwareConfig& hw, double eta);

// η values whose small-signal input power spans [lo_dbm, hi_dbm].
std::vector<double> eta_grid(const ChannelSpec& ch, const HardwareConfig& hw,
                             const EtaGridOptions& opt = {});

struct DaMrtCurve {
  std::vector<double> eta;
  std::vector<double> p_x;  // W
  std::vector<double> se;
};

DaMrtCurve distortion_aware_mrt_curve(const ChannelSpec& ch, const HardwareConfig& hw,
                                      const EtaGridOptions& opt = {});

// Grid argmax of the distortion-aware MRT curve.
PrecoderSolution distortion_aware_mrt(const ChannelSpec& ch, const HardwareConfig& hw,
                                      const EtaGridOptions& opt = {});

struct PrecoderGridResult {
  double se = 0.0;
  CVec2 c_eff{};
  double step1 = 0.0;  // amplitude spacing of branch 1
  double step2 = 0.0;
};

// Brute-force oracle over (ϱ1, ϱ2) ∈ [0, 5/√(−2ρℓ)]² on a points×points
// grid and both relative phases of the optimal structure. Points with a
// Bussgang gain <= 0 are skipped, matching the downgrade rule of the design.
PrecoderGridResult grid_optimal_precoder(const ChannelSpec& ch, const HardwareConfig& hw,
                                         int points = 400, Exec exec = Exec::parallel);

// Build a solution record from an effective precoder.
PrecoderSolution make_solution(const CVec2& c_eff, const ChannelSpec& ch,
                               const HardwareConfig& hw, std::string provenance);

}  // namespace dirtytx
