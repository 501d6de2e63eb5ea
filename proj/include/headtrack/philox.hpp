#pragma once

#include <array>
#include <cstdint>

namespace headtrack {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
//   multipliers  M0 = 0xD2511F53, M1 = 0xCD9E8D57
//   key bumps    W0 = 0x9E3779B9, W1 = 0xBB67AE85
// Known-answer vectors are checked in tests/test_philox.cpp.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// Sequential stream over Philox blocks.
///
/// key = (seed low 32, seed high 32); counter = (block low, block high,
/// stream low, stream high). Distinct stream ids give independent sequences
/// for the same seed, so each tensor of the toy model draws from its own
/// stream and reordering initialisation never changes values.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  /// Uniform double in [0, 1) with 53 random bits (two words per draw).
  double uniform();
  /// Standard normal via Box-Muller; consumes two uniforms per pair of outputs.
  double normal();

 private:
  void refill();

  PhiloxKey key_;
  std::uint64_t block_ = 0;
  std::uint64_t stream_;
  PhiloxCounter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace headtrack
