#include "wacrl/sim.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace wacrl {

namespace {

struct Derivative {
  Vector dx;
  double dc;
};

Derivative rhs(const SmallSignalModel& model, const CostWeights& w, const ControlLaw& control,
               double t, const Vector& x) {
  const Vector u = control(t, x);
  return {model.a * x + model.b * u, x.dot(w.q * x) + u.dot(w.r * u)};
}

}  // namespace

WindowResult step_window(const SmallSignalModel& model, const Vector& x_t, double t0,
                         const ControlLaw& control, const CostWeights& w, double period,
                         int substeps) {
  if (substeps < 1) throw Error(ErrorCode::InvalidParameter, "substeps must be >= 1");
  if (!(period > 0.0)) throw Error(ErrorCode::InvalidParameter, "window length must be positive");
  const double h = period / substeps;
  Vector x = x_t;
  double cost = 0.0;
  for (int s = 0; s < substeps; ++s) {
    const double t = t0 + s * h;
    const auto k1 = rhs(model, w, control, t, x);
    const auto k2 = rhs(model, w, control, t + 0.5 * h, x + 0.5 * h * k1.dx);
    const auto k3 = rhs(model, w, control, t + 0.5 * h, x + 0.5 * h * k2.dx);
    const auto k4 = rhs(model, w, control, t + h, x + h * k3.dx);
    Vector next = x + (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    const double dc = (h / 6.0) * (k1.dc + 2.0 * k2.dc + 2.0 * k3.dc + k4.dc);
    if (!next.allFinite() || !std::isfinite(dc)) {
      throw DivergenceError("state became non-finite", x, t);
    }
    x = std::move(next);
    cost += dc;
  }
  return {x, std::max(0.0, cost)};
}

double Trajectory::total_cost() const {
  double sum = 0.0;
  for (double c : window_costs) sum += c;
  return sum;
}

double Trajectory::cost_until(double t) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < window_costs.size(); ++k) {
    if (times[k + 1] > t + 1e-12) break;
    sum += window_costs[k];
  }
  return sum;
}

Trajectory run_closed_loop(const SmallSignalModel& model, const Matrix& k, const Vector& x0,
                           const CostWeights& w, double t_end, double period, int substeps,
                           double divergence_factor) {
  if (!(period > 0.0)) throw Error(ErrorCode::InvalidParameter, "sample period must be positive");
  Trajectory traj;
  const ControlLaw law = [&k](double, const Vector& x) -> Vector { return -k * x; };
  Vector x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.inputs.push_back(-k * x);
  const double limit = divergence_factor * std::max(x0.norm(), 1e-300);
  const auto windows = static_cast<long>(std::llround(t_end / period));
  for (long i = 0; i < windows; ++i) {
    const double t = static_cast<double>(i) * period;
    WindowResult r;
    try {
      r = step_window(model, x, t, law, w, period, substeps);
    } catch (const DivergenceError&) {
      traj.diverged = true;
      break;
    }
    x = r.x_next;
    traj.times.push_back(static_cast<double>(i + 1) * period);
    traj.states.push_back(x);
    traj.inputs.push_back(-k * x);
    traj.window_costs.push_back(r.window_cost);
    if (x.norm() > limit) {
      traj.diverged = true;
      break;
    }
  }
  return traj;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::ostringstream os;
  const std::size_t n = traj.states.empty() ? 0 : static_cast<std::size_t>(traj.states[0].size());
  const std::size_t m = traj.inputs.empty() ? 0 : static_cast<std::size_t>(traj.inputs[0].size());
  os << "time";
  for (std::size_t i = 0; i < n; ++i) os << ",x_" << i + 1;
  for (std::size_t j = 0; j < m; ++j) os << ",u_" << j + 1;
  os << ",window_cost\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    put(traj.times[k]);
    for (std::size_t i = 0; i < n; ++i) {
      os << ',';
      put(traj.states[k](static_cast<Eigen::Index>(i)));
    }
    for (std::size_t j = 0; j < m; ++j) {
      os << ',';
      put(traj.inputs[k](static_cast<Eigen::Index>(j)));
    }
    os << ',';
    put(k == 0 ? 0.0 : traj.window_costs[k - 1]);
    os << '\n';
  }
  return os.str();
}

LtiPlant::LtiPlant(SmallSignalModel model, CostWeights w, Vector x0, double period, int substeps)
  : model_(std::move(model)), w_(std::move(w)), x_(std::move(x0)), period_(period),
    substeps_(substeps) {
  model_.validate();
  w_.validate(model_.n(), model_.m());
  if (x_.size() != model_.n()) throw Error(ErrorCode::DimensionMismatch, "x0 has wrong dimension");
  if (!(period_ > 0.0)) throw Error(ErrorCode::InvalidParameter, "sample period must be positive");
  if (substeps_ < 1) throw Error(ErrorCode::InvalidParameter, "substeps must be >= 1");
}

WindowResult LtiPlant::apply(const ControlLaw& control) {
  WindowResult r = step_window(model_, x_, t_, control, w_, period_, substeps_);
  x_ = r.x_next;
  t_ += period_;
  return r;
}

std::unique_ptr<Plant> plant_interface(const SmallSignalModel& model, const CostWeights& w,
                                       const Vector& x0, double period, int substeps) {
  return std::make_unique<LtiPlant>(model, w, x0, period, substeps);
}

Vector Disturbance::draw(int n) const {
  if (!std::isfinite(magnitude)) throw Error(ErrorCode::InvalidParameter, "magnitude must be finite");
  if (!mask.empty() && static_cast<int>(mask.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "disturbance mask must have n entries");
  Rng rng(seed);
  Vector v = rng.on_sphere(n, 1.0);
  if (!mask.empty()) {
    for (int i = 0; i < n; ++i) {
      if (!mask[i]) v(i) = 0.0;
    }
    const double norm = v.norm();
    if (norm == 0.0) throw Error(ErrorCode::InvalidParameter, "disturbance mask selects no state");
    v /= norm;
  }
  return magnitude * v;
}

}  // namespace wacrl
