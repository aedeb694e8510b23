#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "multiscout/common.hpp"

namespace multiscout {

// Thin RAII wrapper over an FFTW complex-to-complex plan. Unnormalized in both
// directions. execute() is safe to call concurrently on distinct buffers.
class FftPlan {
 public:
  enum class Direction { Forward, Backward };

  FftPlan(std::size_t size, Direction direction);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return size_; }
  void execute(std::span<const Complex> in, std::span<Complex> out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t size_ = 0;
};

// Smallest n >= min_size whose only prime factors are 2, 3 and 5.
std::size_t next_fast_fft_size(std::size_t min_size);

}  // namespace multiscout
