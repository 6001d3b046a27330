#include "wacrl/uncertainty.hpp"

#include "json.hpp"

#include <set>

namespace wacrl {

using json = nlohmann::json;

void UncertaintySpec::validate(const SmallSignalModel& nominal) const {
  if (!(eta >= 0.0)) throw Error(ErrorCode::InvalidParameter, "eta must be non-negative");
  const int n = nominal.n();
  const int m = nominal.m();
  for (const auto& [i, j] : support_a) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw Error(ErrorCode::InvalidParameter, "support_a index (" + std::to_string(i) + "," +
                                                   std::to_string(j) + ") out of range");
  }
  for (const auto& [i, j] : support_b) {
    if (i < 0 || i >= n || j < 0 || j >= m)
      throw Error(ErrorCode::InvalidParameter, "support_b index (" + std::to_string(i) + "," +
                                                   std::to_string(j) + ") out of range");
    if (nominal.b(i, j) == 0.0)
      throw Error(ErrorCode::InvalidParameter,
                  "support_b entry (" + std::to_string(i) + "," + std::to_string(j) +
                      ") is zero in the nominal B; perturbing it would change the input pattern");
  }
}

SmallSignalModel perturb_model(const SmallSignalModel& nominal, const UncertaintySpec& spec) {
  spec.validate(nominal);
  SmallSignalModel out = nominal;
  Rng rng(spec.seed);
  const double half_width = spec.eta / 100.0;
  for (const auto& [i, j] : spec.support_a) {
    const double d = rng.uniform(-half_width, half_width);
    out.a(i, j) = nominal.a(i, j) * (1.0 + d);
  }
  for (const auto& [i, j] : spec.support_b) {
    const double d = rng.uniform(-half_width, half_width);
    out.b(i, j) = nominal.b(i, j) * (1.0 + d);
  }
  return out;
}

UncertaintySpec default_support(const SmallSignalModel& model) {
  model.validate();
  const auto& bl = model.blocks;
  const int n = model.n();
  std::set<Index2> entries;
  for (int i = 0; i < n; ++i) {
    const int gi = bl.gen_of_state(i);
    bool coupled = false;
    for (int j = 0; j < n; ++j) {
      if (model.a(i, j) != 0.0 && bl.gen_of_state(j) != gi) {
        coupled = true;
        entries.emplace(i, j);
      }
    }
    if (!coupled) continue;
    for (int j = 0; j < n; ++j) {
      if (model.a(i, j) != 0.0) entries.emplace(i, j);
    }
  }
  UncertaintySpec spec;
  spec.support_a.assign(entries.begin(), entries.end());
  for (int j = 0; j < model.m(); ++j) {
    for (int i = 0; i < n; ++i) {
      if (model.b(i, j) != 0.0) spec.support_b.emplace_back(i, j);
    }
  }
  return spec;
}

std::string uncertainty_to_text(const UncertaintySpec& spec) {
  json doc;
  doc["format"] = "wacrl-uncertainty";
  doc["rng"] = Rng::kAlgorithm;
  doc["eta"] = spec.eta;
  doc["seed"] = spec.seed;
  doc["support_a"] = spec.support_a;
  doc["support_b"] = spec.support_b;
  return doc.dump(2) + "\n";
}

UncertaintySpec uncertainty_from_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("malformed uncertainty file: ") + e.what());
  }
  if (doc.contains("rng") && doc["rng"] != Rng::kAlgorithm)
    throw Error(ErrorCode::Parse, "uncertainty file pins an unsupported generator");
  UncertaintySpec spec;
  try {
    spec.eta = doc.value("eta", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("support_a")) spec.support_a = doc["support_a"].get<std::vector<Index2>>();
    if (doc.contains("support_b")) spec.support_b = doc["support_b"].get<std::vector<Index2>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("uncertainty file: ") + e.what());
  }
  return spec;
}

}  // namespace wacrl
