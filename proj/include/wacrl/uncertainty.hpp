#ifndef WACRL_UNCERTAINTY_HPP
#define WACRL_UNCERTAINTY_HPP

#include "wacrl/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace wacrl {

using Index2 = std::pair<int, int>;

/// Multiplicative uniform perturbation: each listed entry is scaled by
/// (1 + d), d ~ U(-eta/100, +eta/100), independently. Draws happen in list
/// order (support_a first) from Rng(seed).
struct UncertaintySpec {
  double eta = 0.0;
  std::vector<Index2> support_a;
  std::vector<Index2> support_b;
  std::uint64_t seed = 0;

  /// Throws Error(InvalidParameter) for eta < 0, out-of-range indices, or a
  /// B entry that is zero in the nominal model.
  void validate(const SmallSignalModel& nominal) const;
};

SmallSignalModel perturb_model(const SmallSignalModel& nominal, const UncertaintySpec& spec);

/// Entries through which machine parameters and network coupling enter:
/// every nonzero of A in a row that couples to another generator, plus all
/// off-block nonzeros; every nonzero of B. eta and seed are left at zero.
UncertaintySpec default_support(const SmallSignalModel& model);

std::string uncertainty_to_text(const UncertaintySpec& spec);
UncertaintySpec uncertainty_from_text(const std::string& text);

}  // namespace wacrl

#endif  // WACRL_UNCERTAINTY_HPP
