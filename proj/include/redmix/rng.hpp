#ifndef REDMIX_RNG_HPP_
#define REDMIX_RNG_HPP_

#include <cstdint>
#include <random>

namespace redmix {

/// Purpose of a random stream. Distinct tags never share draws.
enum class StreamTag : std::uint64_t {
  drive = 0,       // noise driving a trajectory segment
  independent = 1, // case-b independent copy in the coupling
  initial = 2,     // random initial conditions
  direction = 3,   // random perturbation directions
  check = 4,       // statistical self-checks
};

using Rng = std::mt19937_64;

/*
 * Deterministic stream keyed by (master seed, trajectory, segment, tag).
 * Streams for different keys are statistically independent, so parallel and
 * serial schedules consume identical draws.
 */
inline Rng make_stream(std::uint64_t seed, std::uint64_t trajectory,
                       std::uint64_t segment, StreamTag tag) {
  const auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x); };
  const auto hi = [](std::uint64_t x) {
    return static_cast<std::uint32_t>(x >> 32);
  };
  const auto t = static_cast<std::uint64_t>(tag);
  std::seed_seq seq{lo(seed),    hi(seed),    lo(trajectory), hi(trajectory),
                    lo(segment), hi(segment), lo(t),          hi(t)};
  return Rng(seq);
}

} // namespace redmix

#endif // REDMIX_RNG_HPP_
