#ifndef WACRL_SIM_HPP
#define WACRL_SIM_HPP

#include "wacrl/common.hpp"
#include "wacrl/lqr.hpp"
#include "wacrl/model.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wacrl {

/// Control law evaluated at every integrator stage: u = law(t, x).
using ControlLaw = std::function<Vector(double t, const Vector& x)>;

struct WindowResult {
  Vector x_next;
  double window_cost = 0.0;
};

/// Raised when the state stops being finite. Carries the last finite state.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, Vector last_finite, double time)
    : Error(ErrorCode::Divergence, what), last_finite_(std::move(last_finite)), time_(time) {}

  const Vector& last_finite_state() const { return last_finite_; }
  double time() const { return time_; }

private:
  Vector last_finite_;
  double time_;
};

/// Integrates x' = Ax + Bu(t,x) jointly with c' = x'Qx + u'Ru over
/// [t0, t0 + period] using classical RK4 with `substeps` steps.
WindowResult step_window(const SmallSignalModel& model, const Vector& x_t, double t0,
                         const ControlLaw& control, const CostWeights& w, double period,
                         int substeps = 20);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  /// window_costs[k] is accumulated over [times[k], times[k+1]].
  std::vector<double> window_costs;
  bool diverged = false;

  double total_cost() const;
  /// Sum of window costs for windows ending at or before `t`.
  double cost_until(double t) const;
  std::size_t size() const { return times.size(); }
};

/// Fixed-gain closed loop u = -Kx over [0, t_end], sampled every `period`.
/// Stops early with `diverged` set if the state stops being finite or exceeds
/// `divergence_factor` times ||x0||.
Trajectory run_closed_loop(const SmallSignalModel& model, const Matrix& k, const Vector& x0,
                           const CostWeights& w, double t_end, double period, int substeps = 20,
                           double divergence_factor = 1e6);

/// CSV: time, x_1..x_n, u_1..u_m, window_cost. The cost column of a row holds
/// the cost of the window that ends at that sample (0 for the first row).
std::string trajectory_to_csv(const Trajectory& traj);

/// Measurement channel seen by the learner. It exposes the sampled state and
/// the running cost only; the matrices stay hidden behind the implementation.
class Plant {
public:
  virtual ~Plant() = default;

  /// Applies `control` over the next window and returns the new sampled state
  /// and the cost accumulated over the window.
  virtual WindowResult apply(const ControlLaw& control) = 0;

  virtual Vector current_state() const = 0;
  virtual double time() const = 0;
  virtual double sample_period() const = 0;
};

/// Plant backed by a linear model and the RK4 window integrator.
class LtiPlant final : public Plant {
public:
  LtiPlant(SmallSignalModel model, CostWeights w, Vector x0, double period, int substeps = 20);

  WindowResult apply(const ControlLaw& control) override;
  Vector current_state() const override { return x_; }
  double time() const override { return t_; }
  double sample_period() const override { return period_; }

private:
  SmallSignalModel model_;
  CostWeights w_;
  Vector x_;
  double t_ = 0.0;
  double period_;
  int substeps_;
};

std::unique_ptr<Plant> plant_interface(const SmallSignalModel& model, const CostWeights& w,
                                       const Vector& x0, double period, int substeps = 20);

/// Initial-state impulse: random direction on a sphere of `magnitude`,
/// optionally restricted to the states where `mask` is true.
struct Disturbance {
  double magnitude = 1.0;
  std::vector<bool> mask;
  std::uint64_t seed = 0;

  Vector draw(int n) const;
};

}  // namespace wacrl

#endif  // WACRL_SIM_HPP
