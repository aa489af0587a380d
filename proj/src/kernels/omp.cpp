#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>

#include "dirtytx/kernels.hpp"

namespace dirtytx {

void set_thread_count(int n) {
  if (n < 1) throw DomainError("set_thread_count: need at least one thread");
  omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

namespace kernels::omp {

namespace {

// Exceptions must not escape an OpenMP region; keep the first and rethrow.
class ErrorSlot {
 public:
  template <class F>
  void guard(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu_);
      if (!err_) err_ = std::current_exception();
    }
  }
  void rethrow() {
    if (err_) std::rethrow_exception(err_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr err_;
};

}  // namespace

std::vector<FeedbackResult> feedback_batch(const HardwareConfig& hw, std::span<const CVec2> x,
                                           const FeedbackOptions& opt) {
  std::vector<FeedbackResult> out(x.size());
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  ErrorSlot err;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) err.guard([&] { out[i] = solve_feedback(x[i], hw, opt); });
  err.rethrow();
  return out;
}

std::vector<CVec2> gaussian_blocks(const ComplexMat2& chol, std::size_t n, std::uint64_t seed,
                                   Stream stream) {
  std::vector<CVec2> out(n);
  const auto blocks = static_cast<std::ptrdiff_t>((n + kBlockSize - 1) / kBlockSize);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * kBlockSize;
    fill_gaussian_block(chol, seed, stream, static_cast<std::size_t>(b), out.data() + start,
                        std::min(kBlockSize, n - start));
  }
  return out;
}

ArgMin minmax_grid(const std::array<NmseCurve, 2>& curves, std::span<const double> grid) {
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  std::vector<double> v(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) v[i] = std::max(curves[0](grid[i]), curves[1](grid[i]));
  // Ordered scan keeps the serial tie rule.
  ArgMin best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] < best.value) best = {i, v[i]};
  return best;
}

GridBest precoder_grid(const ChannelSpec& ch, const HardwareConfig& hw, double phase,
                       double ext1, double ext2, int points) {
  // One best per row, then an ordered merge: same winner as the row-major serial scan.
  std::vector<GridBest> rows(static_cast<std::size_t>(points));
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < points; ++i) {
    GridBest best;
    CVec2 c;
    const double a1 = ext1 * i / (points - 1);
    for (int j = 0; j < points; ++j) {
      const double se = precoder_grid_point(ch, hw, phase, a1, ext2 * j / (points - 1), c);
      if (se > best.se) best = {se, c};
    }
    rows[i] = best;
  }
  GridBest best;
  for (const auto& r : rows)
    if (r.se > best.se) best = r;
  return best;
}

void for_each(std::size_t n, const std::function<void(std::size_t)>& f) {
  ErrorSlot err;
  const auto m = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < m; ++i) err.guard([&] { f(static_cast<std::size_t>(i)); });
  err.rethrow();
}

}  // namespace kernels::omp
}  // namespace dirtytx
