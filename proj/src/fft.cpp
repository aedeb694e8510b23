#include "multiscout/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace multiscout {
namespace {

// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct FftPlan::Impl {
  fftw_plan plan = nullptr;
};

FftPlan::FftPlan(std::size_t size, Direction direction)
    : impl_(std::make_unique<Impl>()), size_(size) {
  if (size == 0) throw std::invalid_argument("FftPlan: size must be positive");
  std::vector<Complex> in(size), out(size);
  const int sign = direction == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  std::lock_guard lock(planner_mutex());
  impl_->plan = fftw_plan_dft_1d(static_cast<int>(size),
                                 reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!impl_->plan) throw std::runtime_error("FftPlan: planner failed for size " + std::to_string(size));
}

FftPlan::~FftPlan() {
  if (impl_ && impl_->plan) {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(impl_->plan);
  }
}

FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::execute(std::span<const Complex> in, std::span<Complex> out) const {
  if (in.size() != size_ || out.size() != size_)
    throw std::invalid_argument("FftPlan::execute: buffer size mismatch");
  // fftw_execute_dft never writes through `in` for out-of-place plans.
  fftw_execute_dft(impl_->plan,
                   reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

std::size_t next_fast_fft_size(std::size_t min_size) {
  for (std::size_t n = std::max<std::size_t>(min_size, 1);; ++n) {
    std::size_t m = n;
    for (std::size_t p : {2u, 3u, 5u})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

}  // namespace multiscout
