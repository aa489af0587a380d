#include <algorithm>
#include <cmath>
#include <limits>

#include "dirtytx/kernels.hpp"

namespace dirtytx::kernels {

void fill_gaussian_block(const ComplexMat2& chol, std::uint64_t seed, Stream stream,
                         std::size_t block, CVec2* out, std::size_t count) {
  auto eng = block_engine(seed, stream, block);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  for (std::size_t i = 0; i < count; ++i) {
    const double a = nd(eng), b = nd(eng), c = nd(eng), d = nd(eng);
    const CVec2 z{cplx{a, b}, cplx{c, d}};
    out[i] = chol * z;
  }
}

double precoder_grid_point(const ChannelSpec& ch, const HardwareConfig& hw, double phase,
                           double amp1, double amp2, CVec2& c_eff) {
  c_eff = {std::polar(amp1, phase), cplx{amp2, 0.0}};
  // Points with a Bussgang gain <= 0 are outside the design domain.
  if (1.0 + 2.0 * hw.rho[0] * amp1 * amp1 <= 0.0 || 1.0 + 2.0 * hw.rho[1] * amp2 * amp2 <= 0.0)
    return -1.0;
  return achievable_se(sndr(c_eff, ch, hw));
}

namespace serial {

std::vector<FeedbackResult> feedback_batch(const HardwareConfig& hw, std::span<const CVec2> x,
                                           const FeedbackOptions& opt) {
  std::vector<FeedbackResult> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = solve_feedback(x[i], hw, opt);
  return out;
}

std::vector<CVec2> gaussian_blocks(const ComplexMat2& chol, std::size_t n, std::uint64_t seed,
                                   Stream stream) {
  std::vector<CVec2> out(n);
  const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t start = b * kBlockSize;
    fill_gaussian_block(chol, seed, stream, b, out.data() + start,
                        std::min(kBlockSize, n - start));
  }
  return out;
}

ArgMin minmax_grid(const std::array<NmseCurve, 2>& curves, std::span<const double> grid) {
  ArgMin best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = std::max(curves[0](grid[i]), curves[1](grid[i]));
    if (v < best.value) best = {i, v};
  }
  return best;
}

GridBest precoder_grid(const ChannelSpec& ch, const HardwareConfig& hw, double phase,
                       double ext1, double ext2, int points) {
  GridBest best;
  CVec2 c;
  for (int i = 0; i < points; ++i) {
    const double a1 = ext1 * i / (points - 1);
    for (int j = 0; j < points; ++j) {
      const double se = precoder_grid_point(ch, hw, phase, a1, ext2 * j / (points - 1), c);
      if (se > best.se) best = {se, c};
    }
  }
  return best;
}

void for_each(std::size_t n, const std::function<void(std::size_t)>& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace serial
}  // namespace dirtytx::kernels
