#pragma once

#include <array>
#include <cstdint>

namespace sife {

// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
//
// Every random quantity in this project is a pure function of
// (seed, stream tag, stream index, position), which buys three things:
//   * bit-for-bit reproducibility from a single 64-bit seed,
//   * parallel loops (Monte Carlo reps, bootstrap draws) that produce the
//     same numbers no matter how work is scheduled, because each rep/draw
//     owns its own stream instead of sharing a mutable generator,
//   * no seed-spacing folklore: streams are disjoint by construction since
//     (tag, index) occupy their own counter words.
//
// The key is the user seed; counter words are (pos_lo, pos_hi, index, tag).
// Checked against the published KAT vectors in the tests.
std::array<std::uint32_t, 4> philox4x32_10(const std::array<std::uint32_t, 4>& counter,
                                           const std::array<std::uint32_t, 2>& key);

// Stream tags. Keep these stable: changing them silently reshuffles every
// simulated dataset and bootstrap draw for a given seed.
namespace rng_tag {
inline constexpr std::uint32_t kPanel = 1;      // DGP draws, one stream per rep
inline constexpr std::uint32_t kBootstrap = 2;  // multipliers, one stream per draw
inline constexpr std::uint32_t kGeneric = 3;    // tests, property generators
}  // namespace rng_tag

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t tag, std::uint64_t index)
      : seed_(seed), tag_(tag), index_(static_cast<std::uint32_t>(index)) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on the open interval (0,1): ((x >> 11) + 0.5) * 2^-53. Never 0 or
  // 1, so it can feed the inverse-normal transform directly.
  double next_uniform();

  // Standard normal via the Wichura AS 241 inverse CDF applied to
  // next_uniform(). Deterministic (no rejection loop), ~1 ulp accurate.
  double next_normal();

  // +1 or -1 with equal probability.
  double next_rademacher();

  // Uniform integer in {0, ..., n-1} without modulo bias (rejection).
  std::uint32_t next_below(std::uint32_t n);

 private:
  std::uint64_t seed_;
  std::uint32_t tag_;
  std::uint32_t index_;
  std::uint64_t pos_ = 0;                // block counter within the stream
  std::array<std::uint32_t, 4> buf_{};   // current block
  int have_ = 0;                         // unread words left in buf_
  void refill();
};

// Inverse of the standard normal CDF (AS 241, PPND16). Exposed for quantile
// work (critical values, QQ checks) beyond the RNG itself.
double inverse_normal_cdf(double p);

// Standard normal CDF via erfc.
double normal_cdf(double x);

}  // namespace sife
