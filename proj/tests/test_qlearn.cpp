#include "doctest.h"
#include "test_support.hpp"

#include "wacrl/qlearn.hpp"

#include <cmath>
#include <numbers>

using namespace wacrl;
using test::random_matrix;

namespace {

Matrix random_symmetric(Rng& rng, int d) {
  const Matrix r = random_matrix(rng, d, d);
  return 0.5 * (r + r.transpose());
}

/// Forwards to an LtiPlant and counts what the learner asks for.
class RecordingPlant : public Plant {
public:
  explicit RecordingPlant(std::unique_ptr<Plant> inner) : inner_(std::move(inner)) {}
  WindowResult apply(const ControlLaw& control) override {
    ++applies;
    return inner_->apply(control);
  }
  Vector current_state() const override { return inner_->current_state(); }
  double time() const override { return inner_->time(); }
  double sample_period() const override { return inner_->sample_period(); }
  int applies = 0;

private:
  std::unique_ptr<Plant> inner_;
};

LearnerConfig quick_config() {
  LearnerConfig c;
  c.max_iters = 400;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("vech and basis reproduce the quadratic form") {
  Rng rng(1);
  for (int d : {1, 2, 5, 39}) {
    const Matrix g = random_symmetric(rng, d);
    const Vector u = random_matrix(rng, d, 1);
    const double direct = u.dot(g * u);
    CHECK(vech(g).size() == vech_dim(d));
    CHECK(std::abs(vech(g).dot(basis(u)) - direct) <= 1e-12 * (1.0 + std::abs(direct)) * d);
    CHECK((unvech(vech(g)) - g).norm() < 1e-14 * (1.0 + g.norm()));
  }
  CHECK(vech_dim(39) == 780);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(vech(asym), Error);
}

TEST_CASE("multisine probe") {
  const ExplorationNoise noise = ExplorationNoise::multisine(9, 0.3, 4);
  CHECK(noise.duration == 2.0);
  CHECK(noise.distinct_frequency_count() == 9 * 120);
  for (const auto& f : noise.frequencies)
    for (double w : f) {
      CHECK(w >= 0.1 - 1e-12);
      CHECK(w <= 60.0 + 1e-12);
    }
  CHECK(exploration_input(noise, 2.0 + 1e-9).isZero());
  CHECK(exploration_input(noise, 100.0).isZero());
  CHECK_FALSE(exploration_input(noise, 0.7).isZero());
  for (int c = 0; c < 9; ++c) CHECK(noise.amplitudes(c) * std::sqrt(60.0) == doctest::Approx(0.3));

  // A single sine of RMS r peaks at r sqrt(2).
  const ExplorationNoise one = ExplorationNoise::multisine(1, 0.5, 8, 100.0, 1, 3.0, 3.0);
  double peak = 0.0, sq = 0.0;
  const int samples = 200000;
  for (int i = 0; i < samples; ++i) {
    const double v = exploration_input(one, 100.0 * i / samples)(0);
    peak = std::max(peak, std::abs(v));
    sq += v * v;
  }
  CHECK(peak == doctest::Approx(0.5 * std::numbers::sqrt2).epsilon(1e-4));
  CHECK(std::sqrt(sq / samples) == doctest::Approx(0.5).epsilon(1e-2));
}

TEST_CASE("critic update is a normalized gradient step") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Vector w = random_matrix(rng, 10, 1);
    const Vector sigma = random_matrix(rng, 10, 1) * rng.uniform(0.01, 10.0);
    const double e = rng.normal() * 5.0;
    const Vector next = critic_update(w, e, sigma, 50.0, 0.02);
    CHECK((next - w).norm() <= 0.02 * 50.0 * std::abs(e) + 1e-15);
    const double ns = 1.0 + sigma.squaredNorm();
    CHECK((next - (w - 0.02 * 50.0 * e / (ns * ns) * sigma)).norm() < 1e-14 * (1.0 + w.norm()));
  }
}

TEST_CASE("the optimal kernel zeroes the critic error along the optimal policy") {
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const Kernel kernel = nominal_kernel(model, w);
  const Matrix k = lqr_gain(model, w);
  const Vector wc = vech(kernel.g);
  Rng rng(3);
  const Vector x0 = rng.on_sphere(model.n(), 1.0);
  const ControlLaw law = [&k](double, const Vector& x) -> Vector { return -k * x; };
  const WindowResult r = step_window(model, x0, 0.0, law, w, 0.02, 40);
  CriticWindow win;
  win.u_start.resize(model.n() + model.m());
  win.u_start << x0, -k * x0;
  win.u_end.resize(model.n() + model.m());
  win.u_end << r.x_next, -k * r.x_next;
  win.cost = r.window_cost;
  win.duration = 0.02;
  CHECK(std::abs(critic_error(wc, win, 0.02)) < 1e-6 * r.window_cost);
  win.duration = 0.03;
  CHECK_THROWS_AS(critic_error(wc, win, 0.02), Error);
}

TEST_CASE("actor gradient matches finite differences") {
  Rng rng(4);
  const int n = 4, m = 2;
  Matrix g = random_matrix(rng, n + m, n + m);
  g = g * g.transpose() + Matrix::Identity(n + m, n + m);
  Kernel kernel{g, n, m};
  const Matrix k = random_matrix(rng, m, n);
  const Vector x = random_matrix(rng, n, 1);
  const Matrix grad = actor_gradient(k, kernel, x);
  const double h = 1e-6;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      Matrix kp = k, km = k;
      kp(i, j) += h;
      km(i, j) -= h;
      const double fd = (actor_error(kp, kernel, x).squaredNorm() - actor_error(km, kernel, x).squaredNorm()) / (2 * h);
      CHECK(fd == doctest::Approx(grad(i, j)).epsilon(1e-6));
    }
}

TEST_CASE("pruning keeps the largest off-diagonal entries and every self entry") {
  const SmallSignalModel model = benchmark_model();
  const BlockStructure& bl = model.blocks;
  Rng rng(5);
  const Matrix k = random_matrix(rng, model.m(), model.n());
  for (int s : {0, 1, 10, 100, 243, 500}) {
    Mask kept;
    const Matrix p = prune_to_budget(k, bl, s, false, &kept);
    CHECK(card_off(p, bl) == std::min(s, 243));
    double smallest_kept = 1e300, largest_dropped = 0.0;
    for (int r = 0; r < k.rows(); ++r)
      for (int c = 0; c < k.cols(); ++c) {
        if (!bl.is_off_diagonal(r, c)) {
          CHECK(p(r, c) == k(r, c));
        } else if (p(r, c) != 0.0) {
          CHECK(p(r, c) == k(r, c));
          smallest_kept = std::min(smallest_kept, std::abs(k(r, c)));
        } else {
          largest_dropped = std::max(largest_dropped, std::abs(k(r, c)));
        }
      }
    if (s > 0 && s < 243) CHECK(smallest_kept >= largest_dropped);
  }

  // Ties break toward the lower row-major index: row 0 owns generator 1
  // (states 3..5), so (0, 0) precedes (0, 6).
  Matrix tie = Matrix::Zero(model.m(), model.n());
  tie(0, 0) = 1.0;
  tie(0, 6) = -1.0;
  const Matrix kept_one = prune_to_budget(tie, bl, 1, false);
  CHECK(kept_one(0, 0) == 1.0);
  CHECK(kept_one(0, 6) == 0.0);

  const Matrix with_self = prune_to_budget(k, bl, 50, true);
  CHECK((with_self.array() != 0.0).count() == 50);
}

TEST_CASE("GraSP respects the budget and a frozen support") {
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const Kernel kernel = nominal_kernel(model, w);
  Rng rng(6);
  std::vector<Vector> batch;
  for (int i = 0; i < 40; ++i) batch.push_back(rng.on_sphere(model.n(), 1.0));
  LearnerConfig config;
  Actor actor;
  actor.k = prune_to_budget(lqr_gain(model, w), model.blocks, 30, false, &actor.support);
  actor.budget_s = 30;
  actor.alpha_a = 1.0;
  for (int it = 0; it < 5; ++it) {
    actor = grasp_step(actor, kernel, batch, model.blocks, config);
    CHECK(card_off(actor.k, model.blocks) <= 30);
    CHECK(((actor.k.array() != 0.0) <= actor.support).all());
  }
  actor.support_frozen = true;
  const Mask frozen = actor.support;
  const double before = restricted_stationarity(actor, kernel, batch);
  for (int it = 0; it < 3; ++it) {
    actor = grasp_step(actor, kernel, batch, model.blocks, config);
    CHECK((actor.support == frozen).all());
    CHECK(((actor.k.array() != 0.0) <= frozen).all());
  }
  // A full Newton step on a fixed support reaches the restricted optimum.
  CHECK(restricted_stationarity(actor, kernel, batch) <= 1e-6 * std::max(before, 1.0));
}

TEST_CASE("config validation") {
  LearnerConfig c;
  CHECK(c.validate().empty());
  c.alpha_c = 5.0;
  c.alpha_a = 1.0;
  CHECK_FALSE(c.validate().empty());
  c = LearnerConfig{};
  c.sample_period = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = LearnerConfig{};
  c.newton_step = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("learning touches the plant only through windows and recovers the nominal gain at eta = 0") {
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  const LearnerConfig config = quick_config();
  Rng rng(7);
  const Vector x0 = rng.on_sphere(model.n(), 1.0);

  RecordingPlant plant(plant_interface(model, w, x0, config.sample_period, config.substeps));
  const LearnResult res = learn(plant, model, w, config);
  CHECK(plant.applies > 0);
  CHECK(plant.time() == doctest::Approx(plant.applies * config.sample_period));
  CHECK(res.stop_time == doctest::Approx(plant.time()));
  CHECK_FALSE(res.diverged);
  const Matrix k0 = lqr_gain(model, w);
  CHECK((res.actor.k - k0).norm() <= 1e-3 * k0.norm());

  auto direct = plant_interface(model, w, x0, config.sample_period, config.substeps);
  const LearnResult again = learn(*direct, model, w, config);
  CHECK(again.actor.k == res.actor.k);
  CHECK(again.iterations == res.iterations);
}

TEST_CASE("a sparse learner never exceeds its budget") {
  const SmallSignalModel model = benchmark_model();
  const CostWeights w = benchmark_weights(model);
  LearnerConfig config = quick_config();
  config.budget_s = 40;
  Rng rng(8);
  auto plant = plant_interface(model, w, rng.on_sphere(model.n(), 1.0), config.sample_period);
  const LearnResult res = learn(*plant, model, w, config);
  CHECK(res.max_card_off <= 40);
  CHECK(card_off(res.actor.k, model.blocks) <= 40);
  for (const auto& e : res.log) CHECK(e.card_off <= 40);
  bool frozen_seen = false;
  for (const auto& e : res.log) {
    if (e.phase == 2) frozen_seen = true;
    if (frozen_seen) CHECK(e.phase == 2);
    if (e.phase == 2) CHECK(e.support_changes == 0);
  }
}

TEST_CASE("actor file round trip") {
  const SmallSignalModel model = benchmark_model();
  Actor actor;
  Rng rng(9);
  actor.k = random_matrix(rng, model.m(), model.n());
  actor.support = Mask::Constant(model.m(), model.n(), true);
  CHECK(actor_gain_from_text(actor_to_text(actor, model.blocks)) == actor.k);
}
