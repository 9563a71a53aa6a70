#pragma once

#include <atomic>
#include <cstdint>

namespace rieszfield {

/// Process-wide instrumentation counters. Tests read them to assert the cost
/// structure of each sampling path; nothing in the library branches on them.
struct Counters {
  std::atomic<std::uint64_t> full_eigendecompositions{0};
  std::atomic<std::uint64_t> partial_eigendecompositions{0};
  std::atomic<std::uint64_t> extremal_estimates{0};
  std::atomic<std::uint64_t> real_factorizations{0};
  std::atomic<std::uint64_t> complex_factorizations{0};
  std::atomic<std::uint64_t> complex_solves{0};

  void reset() {
    full_eigendecompositions = 0;
    partial_eigendecompositions = 0;
    extremal_estimates = 0;
    real_factorizations = 0;
    complex_factorizations = 0;
    complex_solves = 0;
  }
};

inline Counters& counters() {
  static Counters instance;
  return instance;
}

}  // namespace rieszfield
