#pragma once

#include <cstdint>

// Scalar multiply-add accounting for the ellipsoid and screening kernels.
// Counting is off unless a ScopedOpCounter is alive on the calling thread.

namespace safescreen::ops {

inline thread_local std::uint64_t* active_counter = nullptr;

inline void count(std::uint64_t n) noexcept {
  if (active_counter != nullptr) *active_counter += n;
}

class ScopedOpCounter {
 public:
  ScopedOpCounter() noexcept : previous_(active_counter) { active_counter = &value_; }
  ~ScopedOpCounter() { active_counter = previous_; }
  ScopedOpCounter(const ScopedOpCounter&) = delete;
  ScopedOpCounter& operator=(const ScopedOpCounter&) = delete;

  std::uint64_t value() const noexcept { return value_; }
  void reset() noexcept { value_ = 0; }

 private:
  std::uint64_t value_ = 0;
  std::uint64_t* previous_;
};

}  // namespace safescreen::ops
