#include "json_io.hpp"

#include <algorithm>
#include <cstring>

namespace wacrl::detail {

Matrix matrix_from_json(const json& j, int rows, int cols, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw Error(ErrorCode::DimensionMismatch, std::string(name) + ": expected " +
                                                  std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw Error(ErrorCode::DimensionMismatch, std::string(name) + ": row " + std::to_string(i) +
                                                    " must have " + std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number())
        throw Error(ErrorCode::Parse, std::string(name) + ": non-numeric entry");
      m(i, c) = row[c].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

void check_keys(const json& doc, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!doc.is_object()) throw Error(ErrorCode::Parse, where + ": expected an object");
  for (const auto& item : doc.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw Error(ErrorCode::Parse, where + ": unknown field '" + item.key() + "'");
  }
}

json learner_to_json(const LearnerConfig& c) {
  return json{{"sample_period", c.sample_period},
              {"substeps", c.substeps},
              {"alpha_c", c.alpha_c},
              {"alpha_a", c.alpha_a},
              {"eps_w", c.eps_w},
              {"eps_k", c.eps_k},
              {"budget_s", c.budget_s},
              {"newton_step", c.newton_step},
              {"max_iters", c.max_iters},
              {"cg_iters", c.cg_iters},
              {"cg_damping", c.cg_damping},
              {"actor_period", c.actor_period},
              {"critic_patience", c.critic_patience},
              {"count_self_links", c.count_self_links},
              {"include_value_term", c.include_value_term},
              {"pe_duration", c.pe_duration},
              {"pe_frequencies", c.pe_frequencies},
              {"pe_freq_lo", c.pe_freq_lo},
              {"pe_freq_hi", c.pe_freq_hi},
              {"pe_amplitude_fraction", c.pe_amplitude_fraction},
              {"seed", c.seed},
              {"divergence_factor", c.divergence_factor},
              {"max_g22_condition", c.max_g22_condition},
              {"init", c.init == InitMode::Nominal ? "nominal" : "random"}};
}

void learner_from_json(const json& doc, LearnerConfig& c) {
  check_keys(doc,
             {"sample_period", "substeps", "alpha_c", "alpha_a", "eps_w", "eps_k", "budget_s",
              "newton_step", "max_iters", "cg_iters", "cg_damping", "actor_period",
              "critic_patience", "count_self_links", "include_value_term", "pe_duration",
              "pe_frequencies", "pe_freq_lo", "pe_freq_hi", "pe_amplitude_fraction", "seed",
              "divergence_factor", "max_g22_condition", "init"},
             "learner");
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = required<std::decay_t<decltype(field)>>(doc, key);
  };
  get("sample_period", c.sample_period);
  get("substeps", c.substeps);
  get("alpha_c", c.alpha_c);
  get("alpha_a", c.alpha_a);
  get("eps_w", c.eps_w);
  get("eps_k", c.eps_k);
  get("budget_s", c.budget_s);
  get("newton_step", c.newton_step);
  get("max_iters", c.max_iters);
  get("cg_iters", c.cg_iters);
  get("cg_damping", c.cg_damping);
  get("actor_period", c.actor_period);
  get("critic_patience", c.critic_patience);
  get("count_self_links", c.count_self_links);
  get("include_value_term", c.include_value_term);
  get("pe_duration", c.pe_duration);
  get("pe_frequencies", c.pe_frequencies);
  get("pe_freq_lo", c.pe_freq_lo);
  get("pe_freq_hi", c.pe_freq_hi);
  get("pe_amplitude_fraction", c.pe_amplitude_fraction);
  get("seed", c.seed);
  get("divergence_factor", c.divergence_factor);
  get("max_g22_condition", c.max_g22_condition);
  if (doc.contains("init")) {
    const auto mode = required<std::string>(doc, "init");
    if (mode == "nominal") c.init = InitMode::Nominal;
    else if (mode == "random") c.init = InitMode::Random;
    else throw Error(ErrorCode::Parse, "learner: init must be 'nominal' or 'random'");
  }
}

json weights_to_json(const CostWeights& w) {
  return json{{"q", matrix_to_json(w.q)}, {"r", matrix_to_json(w.r)}};
}

}  // namespace wacrl::detail
