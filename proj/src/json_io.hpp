#ifndef WACRL_SRC_JSON_IO_HPP
#define WACRL_SRC_JSON_IO_HPP

#include "wacrl/common.hpp"
#include "wacrl/lqr.hpp"
#include "wacrl/qlearn.hpp"

#include "json.hpp"

#include <string>

namespace wacrl::detail {

using json = nlohmann::json;

Matrix matrix_from_json(const json& j, int rows, int cols, const char* name);
json matrix_to_json(const Matrix& m);

template <typename T>
T required(const json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::Parse, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("field '") + key + "': " + e.what());
  }
}

/// Every key of `doc` must be listed in `allowed`; `where` prefixes the error.
void check_keys(const json& doc, std::initializer_list<const char*> allowed, const std::string& where);

json learner_to_json(const LearnerConfig& c);
/// Overrides the fields present in `doc`; unknown keys are rejected.
void learner_from_json(const json& doc, LearnerConfig& c);

json weights_to_json(const CostWeights& w);

}  // namespace wacrl::detail

#endif  // WACRL_SRC_JSON_IO_HPP
