#pragma once

// Data-parallel hot loops. Each kernel has a serial reference and an OpenMP
// version that returns bit-identical results (per-index work, fixed-order
// reductions, ties to the lowest index).

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dirtytx/exec.hpp"
#include "dirtytx/montecarlo.hpp"
#include "dirtytx/nmse.hpp"
#include "dirtytx/precoding.hpp"

namespace dirtytx::kernels {

struct ArgMin {
  std::size_t index = 0;
  double value = 0.0;
};

struct GridBest {
  double se = -1.0;
  CVec2 c_eff{};
};

namespace serial {
std::vector<FeedbackResult> feedback_batch(const HardwareConfig& hw, std::span<const CVec2> x,
                                           const FeedbackOptions& opt);
std::vector<CVec2> gaussian_blocks(const ComplexMat2& chol, std::size_t n, std::uint64_t seed,
                                   Stream stream);
ArgMin minmax_grid(const std::array<NmseCurve, 2>& curves, std::span<const double> grid);
GridBest precoder_grid(const ChannelSpec& ch, const HardwareConfig& hw, double phase,
                       double ext1, double ext2, int points);
void for_each(std::size_t n, const std::function<void(std::size_t)>& f);
}  // namespace serial

namespace omp {
std::vector<FeedbackResult> feedback_batch(const HardwareConfig& hw, std::span<const CVec2> x,
                                           const FeedbackOptions& opt);
std::vector<CVec2> gaussian_blocks(const ComplexMat2& chol, std::size_t n, std::uint64_t seed,
                                   Stream stream);
ArgMin minmax_grid(const std::array<NmseCurve, 2>& curves, std::span<const double> grid);
GridBest precoder_grid(const ChannelSpec& ch, const HardwareConfig& hw, double phase,
                       double ext1, double ext2, int points);
void for_each(std::size_t n, const std::function<void(std::size_t)>& f);
}  // namespace omp

// Fills block b of a CN(0, chol chol^H) stream; shared by both variants.
void fill_gaussian_block(const ComplexMat2& chol, std::uint64_t seed, Stream stream,
                         std::size_t block, CVec2* out, std::size_t count);

// SE of c̃ = (ϱ1 e^{j phase}, ϱ2); -1 where a Bussgang gain is <= 0.
double precoder_grid_point(const ChannelSpec& ch, const HardwareConfig& hw, double phase,
                           double amp1, double amp2, CVec2& c_eff);

#define DIRTYTX_DISPATCH(name)                                         \
  template <class... Args>                                             \
  auto name(Exec e, Args&&... args) {                                  \
    return e == Exec::parallel ? omp::name(std::forward<Args>(args)...) \
                               : serial::name(std::forward<Args>(args)...); \
  }

DIRTYTX_DISPATCH(feedback_batch)
DIRTYTX_DISPATCH(gaussian_blocks)
DIRTYTX_DISPATCH(minmax_grid)
DIRTYTX_DISPATCH(precoder_grid)

#undef DIRTYTX_DISPATCH

inline void for_each(Exec e, std::size_t n, const std::function<void(std::size_t)>& f) {
  if (e == Exec::parallel)
    omp::for_each(n, f);
  else
    serial::for_each(n, f);
}

}  // namespace dirtytx::kernels
