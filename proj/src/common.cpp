#include "wacrl/common.hpp"

#include <cmath>
#include <numbers>

namespace wacrl {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Unstabilizable: return "unstabilizable";
    case ErrorCode::Convergence: return "convergence";
    case ErrorCode::NotHurwitz: return "not-hurwitz";
    case ErrorCode::IllConditioned: return "ill-conditioned";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector Rng::on_sphere(Eigen::Index dim, double radius) {
  Vector v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal();
    norm = v.norm();
  }
  return v * (radius / norm);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t s = base ^ (stream * 0xD1B54A32D192ED03ULL);
  splitmix64(s);
  return splitmix64(s);
}

}  // namespace wacrl
