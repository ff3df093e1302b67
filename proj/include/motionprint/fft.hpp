#pragma once

// Real-input DFT magnitudes via FFTW3. Link with -lfftw3.

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace motionprint {

namespace detail {
// FFTW's planner is not reentrant; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// |X_k| for k = 0..n/2 of the real input.
inline std::vector<double> real_dft_magnitudes(std::span<const double> input) {
  const std::size_t n = input.size();
  if (n == 0) return {};
  const std::size_t bins = n / 2 + 1;
  std::vector<double> in(input.begin(), input.end());
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
  if (out == nullptr) throw std::bad_alloc();
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out, FFTW_ESTIMATE);
  }
  if (plan == nullptr) {
    fftw_free(out);
    throw std::runtime_error("fftw: cannot create plan");
  }
  fftw_execute(plan);
  std::vector<double> mags(bins);
  for (std::size_t k = 0; k < bins; ++k) mags[k] = std::hypot(out[k][0], out[k][1]);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  return mags;
}

}  // namespace motionprint
