#include "doctest.h"
#include "test_support.hpp"

#include "wacrl/lqr.hpp"
#include "wacrl/sim.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

using namespace wacrl;
using test::random_hurwitz;
using test::random_matrix;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// Lyapunov oracle through the Kronecker form (I (x) A' + A' (x) I) vec X = -vec M.
Matrix kron_lyapunov(const Matrix& a, const Matrix& m) {
  const int n = static_cast<int>(a.rows());
  Matrix big = Matrix::Zero(n * n, n * n);
  const Matrix at = a.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      big.block(i * n, j * n, n, n) += (i == j ? 1.0 : 0.0) * at;
      big.block(i * n, j * n, n, n) += at(i, j) * Matrix::Identity(n, n);
    }
  const Vector vec_m = Eigen::Map<const Vector>(m.data(), n * n);
  const Vector x = big.partialPivLu().solve(-vec_m);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

}  // namespace

TEST_CASE("scalar CARE has the closed-form solution") {
  // a = 1, b = 1, q = 1, r = 1: p^2 - 2p - 1 = 0, p = 1 + sqrt(2).
  CostWeights w = CostWeights::identity(1, 1);
  const Matrix p = solve_care(scalar(1.0), scalar(1.0), w);
  CHECK(p(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
  const Matrix k = lqr_gain(scalar(1.0), scalar(1.0), w);
  CHECK(k(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
  CHECK(1.0 - k(0, 0) < 0.0);
}

TEST_CASE("Hurwitz A with Q = 0 gives P = 0") {
  Rng rng(1);
  const Matrix a = random_hurwitz(rng, 5, 0.5);
  const Matrix b = random_matrix(rng, 5, 2);
  CostWeights w = CostWeights::identity(5, 2, 0.0, 1.0);
  CHECK(solve_care(a, b, w).norm() < 1e-10);
}

TEST_CASE("CARE residual is small on random stabilizable systems") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 8, m = 1 + t % 3;
    const Matrix a = random_matrix(rng, n, n);
    const Matrix b = random_matrix(rng, n, m);
    const CostWeights w = CostWeights::identity(n, m, 1.0 + t, 0.1 + 0.1 * t);
    const CareReport rep = solve_care_report(a, b, w);
    CHECK(rep.residual <= 1e-8 * (1.0 + rep.p.norm()));
    CHECK((rep.p - rep.p.transpose()).norm() < 1e-9 * (1.0 + rep.p.norm()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(rep.p);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
    CHECK(is_hurwitz(a - b * lqr_gain(a, b, w)));
  }
}

TEST_CASE("uncontrollable unstable mode is reported as unstabilizable") {
  Matrix a(2, 2);
  a << 1, 0, 0, -1;
  Matrix b(2, 1);
  b << 0, 1;
  try {
    solve_care(a, b, CostWeights::identity(2, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unstabilizable);
  }
}

TEST_CASE("Lyapunov solver matches closed forms and the Kronecker oracle") {
  Matrix x = solve_lyapunov(-Matrix::Identity(3, 3), 2.0 * Matrix::Identity(3, 3));
  CHECK((x - Matrix::Identity(3, 3)).norm() < 1e-14);
  x = solve_lyapunov(scalar(-2.0), scalar(4.0));
  CHECK(x(0, 0) == doctest::Approx(1.0));

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 7;
    const Matrix a = random_hurwitz(rng, n, 0.2);
    Matrix m = random_matrix(rng, n, n);
    m = m * m.transpose();
    const Matrix got = solve_lyapunov(a, m);
    const Matrix want = kron_lyapunov(a, m);
    CHECK((got - want).norm() <= 1e-9 * (1.0 + want.norm()));
  }
}

TEST_CASE("the LQR gain is a local minimum of the closed-loop cost") {
  Rng rng(4);
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const Matrix k = lqr_gain(model, w);
  const Matrix p = solve_care(model, w);
  for (int t = 0; t < 20; ++t) {
    const Vector x0 = rng.on_sphere(model.n(), 1.0);
    const double j_opt = evaluate_cost(model, w, k, x0);
    CHECK(j_opt == doctest::Approx(x0.dot(p * x0)).epsilon(1e-8));
    const Matrix dk = random_matrix(rng, model.m(), model.n());
    const Matrix step = 1e-3 * dk / dk.norm() * k.norm();
    CHECK(evaluate_cost(model, w, k + step, x0) >= j_opt * (1.0 - 1e-12));
  }
}

TEST_CASE("nominal kernel is symmetric and reproduces the nominal gain") {
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const Kernel kernel = nominal_kernel(model, w);
  CHECK(kernel.g.rows() == 39);
  CHECK((kernel.g - kernel.g.transpose()).norm() < 1e-9 * kernel.g.norm());
  const Matrix k0 = lqr_gain(model, w);
  CHECK((kernel.greedy_gain() - k0).norm() < 1e-9 * k0.norm());

  // Scalar case: a = 1, b = 1, q = r = 1, p = 1 + sqrt 2.
  const SmallSignalModel s = test::plain_model(scalar(1.0), scalar(1.0));
  const CostWeights ws = CostWeights::identity(1, 1);
  const double p = 1.0 + std::sqrt(2.0);
  const Kernel with = nominal_kernel(s, ws, true);
  const Kernel without = nominal_kernel(s, ws, false);
  CHECK(without.g(0, 0) == doctest::Approx(2.0 * p + 1.0));
  CHECK(with.g(0, 0) == doctest::Approx(3.0 * p + 1.0));
  CHECK(with.g(0, 1) == doctest::Approx(p));
  CHECK(with.g(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("greedy gain refuses an ill-conditioned G22") {
  Kernel kernel;
  kernel.n = 1;
  kernel.m = 2;
  kernel.g = Matrix::Identity(3, 3);
  kernel.g(2, 2) = 1e-12;
  CHECK_THROWS_AS(kernel.greedy_gain(), Error);
}

TEST_CASE("spectral abscissa of a companion matrix matches the polynomial roots") {
  // Roots -1, -2, -3 + 4i, -3 - 4i: (s+1)(s+2)(s^2+6s+25).
  // = s^4 + 9 s^3 + 45 s^2 + 87 s + 50
  Matrix c = Matrix::Zero(4, 4);
  c.block(0, 1, 3, 3).setIdentity();
  c.row(3) << -50, -87, -45, -9;
  CHECK(spectral_abscissa(c) == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(is_hurwitz(c));
  c.row(3) << 50, -87, -45, -9;
  CHECK_FALSE(is_hurwitz(c));
}

TEST_CASE("evaluate_cost agrees with long-horizon simulation") {
  Rng rng(5);
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const Matrix k = lqr_gain(model, w);
  const Vector x0 = rng.on_sphere(model.n(), 1.0);
  const double j = evaluate_cost(model, w, k, x0);
  const Trajectory traj = run_closed_loop(model, k, x0, w, 60.0, 0.01, 10);
  CHECK(traj.total_cost() == doctest::Approx(j).epsilon(1e-6));
  CHECK(evaluate_cost_finite(model, w, k, x0, 60.0) == doctest::Approx(j).epsilon(1e-8));
  CHECK(evaluate_cost_finite(model, w, k, x0, 1.0) ==
        doctest::Approx(traj.cost_until(1.0 + 1e-9)).epsilon(1e-8));
}

TEST_CASE("evaluate_cost edge cases") {
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const Matrix k = lqr_gain(model, w);
  CHECK(evaluate_cost(model, w, k, Vector::Zero(model.n())) == 0.0);
  const Matrix bad = -10.0 * k;
  Rng rng(6);
  const Vector x0 = rng.on_sphere(model.n(), 1.0);
  CHECK(std::isinf(evaluate_cost(model, w, bad, x0)));
  CHECK(std::isfinite(evaluate_cost_finite(model, w, bad, x0, 1.0)));
}

TEST_CASE("weights validation") {
  CostWeights w = CostWeights::identity(2, 1);
  CHECK_NOTHROW(w.validate(2, 1));
  w.r(0, 0) = 0.0;
  CHECK_THROWS_AS(w.validate(2, 1), Error);
  w = CostWeights::identity(2, 1);
  w.q(0, 1) = 1.0;
  CHECK_THROWS_AS(w.validate(2, 1), Error);
  CHECK_THROWS_AS(CostWeights::identity(2, 1).validate(3, 1), Error);
}
