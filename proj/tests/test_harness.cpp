#include "doctest.h"
#include "test_support.hpp"

#include "wacrl/harness.hpp"

#include <cmath>
#include <map>

using namespace wacrl;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.nominal = benchmark_model();
  spec.weights = benchmark_weights(spec.nominal);
  spec.support = default_support(spec.nominal);
  spec.eta_grid = {70.0};
  spec.seeds = {3, 4};
  spec.s_grid = {60};
  spec.t_end = 5.0;
  spec.learner.max_iters = 300;
  spec.keep_trajectories = false;
  return spec;
}

}  // namespace

TEST_CASE("spearman agrees with reference values") {
  auto r = spearman({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {2, 1, 4, 3, 7, 5, 6, 9, 10, 8});
  CHECK(r.rho == doctest::Approx(0.9030303030303028).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.00034361219776328223).epsilon(1e-8));
  CHECK(r.samples == 10);
  // Ties in both samples.
  r = spearman({1, 2, 2, 3, 4, 5, 5, 5, 6, 7}, {3, 1, 4, 1, 5, 9, 2, 6, 5, 3});
  CHECK(r.rho == doctest::Approx(0.38199494615621404).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.2760143754988821).epsilon(1e-8));
  r = spearman({1, 2, 3, 4}, {10, 20, 30, 40});
  CHECK(r.rho == doctest::Approx(1.0));
  CHECK(r.p_value < 1e-12);
  r = spearman({1, 2, 3, 4}, {4, 3, 2, 1});
  CHECK(r.rho == doctest::Approx(-1.0));
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}

TEST_CASE("with eta = 0 the mismatched LQR is the ideal LQR") {
  ExperimentSpec spec = small_spec();
  spec.eta_grid = {0.0};
  spec.controllers = {ControllerId::IdealLqr, ControllerId::MismatchedLqr};
  const MatrixResult res = run_matrix(spec);
  std::map<std::uint64_t, double> ideal, mism;
  for (const auto& row : res.rows) {
    if (row.stage != "1") continue;
    (row.controller == "ideal_lqr" ? ideal : mism)[row.seed] = row.j;
  }
  REQUIRE(ideal.size() == 2);
  for (const auto& [seed, j] : ideal) {
    CHECK(mism.at(seed) == j);
  }
}

TEST_CASE("matrix rows are paired, deterministic and independent of the worker count") {
  ExperimentSpec spec = small_spec();
  spec.s_grid = {60, 60};
  const MatrixResult a = run_matrix(spec);
  spec.workers = 3;
  const MatrixResult b = run_matrix(spec);
  CHECK(comparison_to_csv(a.rows) == comparison_to_csv(b.rows));

  int stage1 = 0;
  std::map<std::uint64_t, std::string> hash_of_seed;
  std::vector<double> sparse_j;
  for (const auto& row : a.rows) {
    if (row.stage == "1") ++stage1;
    auto [it, fresh] = hash_of_seed.emplace(row.seed, row.model_hash);
    if (!fresh) CHECK(it->second == row.model_hash);
    if (row.controller == "sparse_rl" && row.seed == 3 && row.stage == "1") sparse_j.push_back(row.j);
    if (row.controller == "sparse_rl") CHECK(row.card_off <= 60);
    if (row.controller == "ideal_lqr" && row.stage == "1") CHECK(row.j_increase == doctest::Approx(0.0));
    if (!row.stable) CHECK(std::isinf(row.j_increase));
  }
  // Per seed: open loop, ideal, mismatched, dense and two sparse rows.
  CHECK(stage1 == 2 * 6);
  REQUIRE(sparse_j.size() == 2);
  CHECK(sparse_j[0] == sparse_j[1]);
  CHECK(hash_of_seed.at(3) != hash_of_seed.at(4));
}

TEST_CASE("cells derive models and disturbances from the seed") {
  const ExperimentSpec spec = small_spec();
  const Cell a = make_cell(spec, 70.0, 11);
  const Cell b = make_cell(spec, 70.0, 11);
  CHECK(a.actual.a == b.actual.a);
  CHECK(a.x0 == b.x0);
  CHECK(a.x0.norm() == doctest::Approx(spec.disturbance_magnitude));
  CHECK(make_cell(spec, 70.0, 12).actual.a != a.actual.a);
  CHECK(fresh_disturbance(spec, 11, 0) != a.x0);
  CHECK(fresh_disturbance(spec, 11, 0) != fresh_disturbance(spec, 11, 1));
}

TEST_CASE("reusing a gain on a fresh disturbance matches the Lyapunov cost") {
  const ExperimentSpec spec = small_spec();
  const Cell cell = make_cell(spec, 70.0, 5);
  const Matrix k = lqr_gain(cell.actual, spec.weights);
  const Vector x = fresh_disturbance(spec, 5, 0);
  const ComparisonRow row = reuse_controller(k, cell.actual, spec.weights, x, 10.0, 0.02);
  CHECK(row.stable);
  CHECK(row.j == doctest::Approx(evaluate_cost(cell.actual, spec.weights, k, x)).epsilon(1e-12));
}

TEST_CASE("spec validation") {
  ExperimentSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());
  spec.eta_grid.clear();
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = small_spec();
  spec.t_end = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = small_spec();
  spec.s_grid = {-2};
  CHECK_THROWS_AS(spec.validate(), Error);
  CHECK(spec_hash(small_spec()) == spec_hash(small_spec()));
  CHECK(spec_hash(small_spec()).size() == 16);
}
