#include "doctest.h"
#include "test_support.hpp"

#include "wacrl/model.hpp"

#include <Eigen/Eigenvalues>
#include <complex>
#include <filesystem>

using namespace wacrl;
using test::machine;

TEST_CASE("benchmark has 10 machines, 30 states, 9 inputs and 9 B entries") {
  const SmallSignalModel model = benchmark_model();
  CHECK(model.n() == 30);
  CHECK(model.m() == 9);
  CHECK(model.blocks.gen_count == 10);
  CHECK((model.b.array() != 0.0).count() == 9);
  CHECK(off_diagonal_capacity(model.blocks) == 9 * 27);
  Eigen::EigenSolver<Matrix> es(model.a, false);
  CHECK((es.eigenvalues().imag().array().abs() > 1e-6).count() >= 2);
}

TEST_CASE("two undamped machines oscillate at sqrt(2k/M)") {
  const double k = 3.0, m = 2.0;
  const SmallSignalModel model =
      build_swing_model({machine(m, 0.0, 0.5, {0.0, k}), machine(m, 0.0, 0.5, {k, 0.0})});
  Eigen::EigenSolver<Matrix> es(model.a, false);
  const double expected = std::sqrt(2.0 * k / m);
  int hits = 0;
  for (const auto& ev : es.eigenvalues())
    if (std::abs(ev.real()) < 1e-9 && std::abs(std::abs(ev.imag()) - expected) < 1e-9) ++hits;
  CHECK(hits == 2);
}

TEST_CASE("decoupled undamped machines have eigenvalues {0, 0, -1/lag}") {
  const SmallSignalModel model =
      build_swing_model({machine(1.5, 0.0, 0.25, {0.0, 0.0}), machine(2.0, 0.0, 0.5, {0.0, 0.0})});
  CHECK(model.a.block(0, 3, 3, 3).isZero());
  CHECK(model.a.block(3, 0, 3, 3).isZero());
  Eigen::EigenSolver<Matrix> es(model.a, false);
  std::vector<double> re;
  for (const auto& ev : es.eigenvalues()) re.push_back(ev.real());
  std::sort(re.begin(), re.end());
  CHECK(re[0] == doctest::Approx(-4.0));
  CHECK(re[1] == doctest::Approx(-2.0));
  for (int i = 2; i < 6; ++i) CHECK(std::abs(re[i]) < 1e-12);
}

TEST_CASE("build_swing_model rejects invalid parameters") {
  CHECK_THROWS_AS(build_swing_model({machine(1, 0, 0.5, {0, 1})}), Error);
  CHECK_THROWS_AS(build_swing_model({machine(0, 0, 0.5, {0, 1}), machine(1, 0, 0.5, {1, 0})}), Error);
  CHECK_THROWS_AS(build_swing_model({machine(1, 0, 0, {0, 1}), machine(1, 0, 0.5, {1, 0})}), Error);
  CHECK_THROWS_AS(build_swing_model({machine(1, 0, 0.5, {0, 1}), machine(1, 0, 0.5, {2, 0})}), Error);
}

TEST_CASE("random specs always produce valid models") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const int ng = 2 + static_cast<int>(rng.uniform() * 6);
    std::vector<GeneratorSpec> specs(ng);
    Matrix k = Matrix::Zero(ng, ng);
    for (int i = 0; i < ng; ++i)
      for (int j = i; j < ng; ++j) k(i, j) = k(j, i) = rng.uniform() < 0.5 ? rng.uniform(0, 5) : 0.0;
    for (int i = 0; i < ng; ++i) {
      specs[i] = machine(rng.uniform(0.5, 10), rng.uniform(0, 2), rng.uniform(0.05, 1), {});
      for (int j = 0; j < ng; ++j) specs[i].synchronizing_coeffs.push_back(k(i, j));
    }
    const int ref = static_cast<int>(rng.uniform() * ng);
    const SmallSignalModel model = build_swing_model(specs, ref);
    CHECK_NOTHROW(model.validate());
    CHECK(model.m() == ng - 1);
    CHECK(model.n() == 3 * ng);
  }
}

TEST_CASE("validate rejects B outside the owning block") {
  SmallSignalModel model = benchmark_model();
  model.b(0, 0) = 1.0;  // input 0 belongs to machine 1, state 0 to machine 0
  CHECK_THROWS_AS(model.validate(), Error);
}

TEST_CASE("card_off and comm_graph") {
  const SmallSignalModel model = benchmark_model();
  const BlockStructure& bl = model.blocks;
  Matrix dense = Matrix::Ones(model.m(), model.n());
  CHECK(comm_graph(dense, bl).size() == 81);
  CHECK(card_off(dense, bl) == 243);

  Matrix diag = Matrix::Zero(model.m(), model.n());
  for (int r = 0; r < model.m(); ++r) {
    const int g = bl.input_of_gen[r];
    diag.block(r, bl.state_offsets[g], 1, 3).setOnes();
  }
  CHECK(comm_graph(diag, bl).empty());
  CHECK(card_off(diag, bl) == 0);

  // Input row 1 belongs to generator 2; columns 15..17 to generator 5.
  Matrix one = Matrix::Zero(model.m(), model.n());
  one(1, 16) = 0.3;
  const auto links = comm_graph(one, bl);
  REQUIRE(links.size() == 1);
  CHECK(*links.begin() == std::make_pair(2, 5));

  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    Matrix k = Matrix::Zero(model.m(), model.n());
    for (int i = 0; i < k.rows(); ++i)
      for (int j = 0; j < k.cols(); ++j)
        if (rng.uniform() < 0.05) k(i, j) = rng.normal();
    CHECK(static_cast<int>(comm_graph(k, bl).size()) <= card_off(k, bl));
    if (card_off(k, bl) == 0) CHECK(comm_graph(k, bl).empty());
  }
}

TEST_CASE("model file round trip is bit exact") {
  const SmallSignalModel model = benchmark_model();
  const auto path = std::filesystem::temp_directory_path() / "wacrl_model_roundtrip.json";
  save_model(model, path);
  const SmallSignalModel back = load_model(path);
  CHECK(back.a == model.a);
  CHECK(back.b == model.b);
  CHECK(back.blocks == model.blocks);
  CHECK(back.labels == model.labels);
  CHECK(model_hash(back) == model_hash(model));
  std::filesystem::remove(path);
}

TEST_CASE("a 75-state, 9-input, 10-machine file is accepted") {
  SmallSignalModel model;
  model.blocks.gen_count = 10;
  model.blocks.state_offsets = {0, 7, 14, 21, 28, 35, 43, 51, 59, 67, 75};
  for (int g = 1; g < 10; ++g) model.blocks.input_of_gen.push_back(g);
  model.a = -Matrix::Identity(75, 75);
  model.b = Matrix::Zero(75, 9);
  for (int j = 0; j < 9; ++j) model.b(model.blocks.state_offsets[j + 1], j) = 1.0;
  const SmallSignalModel back = model_from_text(model_to_text(model));
  CHECK(back.n() == 75);
  CHECK(back.m() == 9);
  CHECK(back.blocks.gen_count == 10);
}

TEST_CASE("malformed model files give distinct errors") {
  auto code_of = [](const std::string& text) {
    try {
      model_from_text(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of("{ not json") == ErrorCode::Parse);
  CHECK(code_of(R"({"n": 2, "m": 1, "n_g": 1, "state_offsets": [0, 2], "input_of_gen": [0],
                    "A": [[0, 1]], "B": [[1], [0]]})") == ErrorCode::DimensionMismatch);
  CHECK(code_of(R"({"n": 2, "m": 1, "n_g": 2, "state_offsets": [0, 1, 2], "input_of_gen": [0],
                    "A": [[0, 1], [0, 0]], "B": [[0], [1]]})") == ErrorCode::Validation);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), Error);
}
