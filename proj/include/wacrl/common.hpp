#ifndef WACRL_COMMON_HPP
#define WACRL_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wacrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  InvalidParameter,
  DimensionMismatch,
  Parse,
  Validation,
  Unstabilizable,
  Convergence,
  NotHurwitz,
  IllConditioned,
  Divergence,
  Io,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable category next to the message.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

/// SplitMix64 step. Used for seed derivation and as the uniform source of
/// all random draws so that results do not depend on the standard library's
/// distribution implementations.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic generator: SplitMix64, version 1. Uniform doubles are built
/// from the top 53 bits; normals use Box-Muller without caching.
class Rng {
public:
  static constexpr const char* kAlgorithm = "splitmix64-v1";

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Uniform direction scaled to `radius`.
  Vector on_sphere(Eigen::Index dim, double radius);

private:
  std::uint64_t state_;
};

/// Mixes a base seed with a stream index into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace wacrl

#endif  // WACRL_COMMON_HPP
