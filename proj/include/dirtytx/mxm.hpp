#pragma once

// M-branch generalization of the transmitter model, the branch NMSE, the
// min-max back-off and the two MRT designs.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dirtytx/core_model.hpp"
#include "dirtytx/nmse.hpp"
#include "dirtytx/precoding.hpp"

namespace dirtytx {

using CMat = Eigen::MatrixXcd;
using CVecX = Eigen::VectorXcd;
using RVecX = Eigen::VectorXd;

struct HardwareConfigM {
  RVecX gamma;    // M gains
  CMat kappa;     // kappa(l, m): leakage from branch l output into branch m input
  RVecX rho;      // M compressions, 1/W
  double sigma_w2 = 1e-4;

  int size() const { return static_cast<int>(gamma.size()); }
  void validate() const;

  static HardwareConfigM from_2x2(const HardwareConfig& hw);
};

struct SignalSpecM {
  CMat shape;  // Hermitian PSD, shape(0, 0) = 1
  double p_x = 0.0;

  void validate(int m) const;
  static SignalSpecM from_2x2(const SignalSpec& spec);
};

enum class QApproximation {
  exact,        // (I − K)^-1 L
  first_order,  // L + K L
};

// Feedback matrix with K(l, m) = γl kappa(m, l).
CMat feedback_matrix_m(const HardwareConfigM& hw);

// Throws NumericalError when I − K is singular.
CMat build_q_m(const HardwareConfigM& hw, QApproximation mode = QApproximation::exact);

// Per-branch NMSE curves; spec.p_x is ignored.
std::vector<NmseCurve> nmse_curves_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                     QApproximation mode = QApproximation::exact);

// Per-branch NMSE at p_x (+inf at p_x = 0).
std::vector<double> nmse_branches_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                    double p_x, QApproximation mode = QApproximation::exact);

struct BackoffSolutionM {
  double p_x_opt = 0.0;
  double achieved = 0.0;
  int active_branch = 0;  // branch with the largest NMSE at the optimum
  int iterations = 0;
};

// Minimizer of max_l NMSE_l(P) by bisection on the subgradient sign, between
// the smallest and largest single-branch minimizers. Requires ρl < 0.
BackoffSolutionM minmax_backoff_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                  QApproximation mode = QApproximation::exact,
                                  double rel_tol = 1e-13);

struct ChannelSpecM {
  CVecX h;
  double sigma_n2 = 1.0;
};

// SNDR of effective precoder c̃ through the Bussgang gains and distortion
// covariance of U = c̃ c̃^H.
double sndr_m(const CVecX& c_eff, const ChannelSpecM& ch, const HardwareConfigM& hw);

struct PrecoderSolutionM {
  CVecX c_eff;
  CVecX c;
  double se = 0.0;
  double sndr = 0.0;
  double p_x = 0.0;
  std::string provenance;
};

struct MrtVariantsM {
  PrecoderSolutionM conventional;
  PrecoderSolutionM distortion_aware;
};

// Conventional MRT (quartic stationarity in P) and distortion-aware MRT
// (per-branch fixed point, η line search).
MrtVariantsM mrt_variants_m(const ChannelSpecM& ch, const HardwareConfigM& hw,
                            QApproximation mode = QApproximation::exact,
                            const EtaGridOptions& eta = {});

// SE of conventional MRT at input power p_x.
double conventional_mrt_se_m(const ChannelSpecM& ch, const HardwareConfigM& hw, double p_x,
                             QApproximation mode = QApproximation::exact);

// Direct Monte Carlo estimate of the branch NMSEs (exact feedback solve).
std::vector<double> monte_carlo_nmse_m(const HardwareConfigM& hw, const SignalSpecM& spec,
                                       double p_x, std::size_t n, std::uint64_t seed);

}  // namespace dirtytx
