#ifndef WACRL_HARNESS_HPP
#define WACRL_HARNESS_HPP

#include "wacrl/common.hpp"
#include "wacrl/lqr.hpp"
#include "wacrl/model.hpp"
#include "wacrl/qlearn.hpp"
#include "wacrl/sim.hpp"
#include "wacrl/uncertainty.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wacrl {

enum class ControllerId { OpenLoop, IdealLqr, MismatchedLqr, DenseRl, SparseRl };

const char* to_string(ControllerId id);
ControllerId controller_from_string(const std::string& name);

/// Experiment matrix over eta x seed cells. Every controller of a cell runs on
/// the same perturbed model.
struct ExperimentSpec {
  SmallSignalModel nominal;
  CostWeights weights;
  std::vector<double> eta_grid{70.0, 100.0};
  /// Off-diagonal budgets for the sparse learner.
  std::vector<int> s_grid;
  std::vector<std::uint64_t> seeds{0};
  std::vector<ControllerId> controllers{ControllerId::OpenLoop, ControllerId::IdealLqr,
                                        ControllerId::MismatchedLqr, ControllerId::DenseRl,
                                        ControllerId::SparseRl};
  /// Horizon of the finite-time J column and of exported trajectories.
  double t_end = 10.0;
  double disturbance_magnitude = 1.0;
  /// Uncertain entries; eta and seed are filled per cell.
  UncertaintySpec support;
  LearnerConfig learner;
  /// Fresh disturbances applied to each learned gain (stage 2).
  int reuse_disturbances = 1;
  int workers = 1;
  bool keep_trajectories = true;

  /// Throws Error(InvalidParameter) on empty grids, t_end <= 0 or invalid
  /// budgets.
  void validate() const;
};

/// Perturbed model, initial state and stage-2 states of one (eta, seed) cell.
struct Cell {
  double eta = 0.0;
  std::uint64_t seed = 0;
  SmallSignalModel actual;
  Vector x0;
};

Cell make_cell(const ExperimentSpec& spec, double eta, std::uint64_t seed);

/// Fresh stage-2 disturbance `index` of a cell.
Vector fresh_disturbance(const ExperimentSpec& spec, std::uint64_t seed, int index);

struct ComparisonRow {
  std::string controller;
  std::string stage = "1";
  double eta = 0.0;
  /// Budget of the learner, -1 for model-based controllers.
  int s = -1;
  std::uint64_t seed = 0;
  std::string model_hash;
  bool stable = false;
  /// Infinite-horizon cost of the final gain from x0.
  double j = 0.0;
  /// 100 (J / J_ideal - 1), +inf when unstable.
  double j_increase = 0.0;
  /// Cost of the final gain over [0, t_end].
  double j_finite = 0.0;
  /// Cost accumulated during learning, cost-to-go after it, and their sum.
  double j_learn = 0.0;
  double j_post = 0.0;
  double j_stage1 = 0.0;
  int iterations = 0;
  /// Simulated time at which learning stopped (t2).
  double learn_time = 0.0;
  bool converged = false;
  bool diverged = false;
  double stationarity = 0.0;
  int card_off = 0;
  int max_card_off = 0;
  int link_count = 0;
  std::string diagnostic;
};

/// Gain, log and trajectories behind one row, kept for export.
struct RunArtifacts {
  std::string key;
  Matrix k;
  std::vector<LearnLogEntry> log;
  Trajectory trajectory;
};

struct MatrixResult {
  std::vector<ComparisonRow> rows;
  std::vector<RunArtifacts> artifacts;
};

/// Runs every controller in every cell, in parallel over `spec.workers`
/// threads. Rows are sorted by (eta, seed, controller, s, stage).
MatrixResult run_matrix(const ExperimentSpec& spec);

/// Evaluates a previously learned gain on a fresh disturbance.
ComparisonRow reuse_controller(const Matrix& k, const SmallSignalModel& actual,
                               const CostWeights& w, const Vector& fresh_x0, double t_end,
                               double sample_period, Trajectory* trajectory = nullptr);

struct SweepRow {
  int s = 0;
  std::uint64_t seed = 0;
  double j = 0.0;
  int link_count = 0;
  int card_off = 0;
  /// Iterations to convergence; max_iters for runs that did not converge.
  int iterations = 0;
  bool converged = false;
  int max_card_off = 0;
  double stationarity = 0.0;
};

struct RankCorrelation {
  double rho = 0.0;
  double p_value = 1.0;
  int samples = 0;
};

/// Spearman rank correlation with average ranks for ties and a two-sided
/// p-value from the t approximation with n - 2 degrees of freedom.
RankCorrelation spearman(const std::vector<double>& a, const std::vector<double>& b);

struct SweepResult {
  /// Sorted by s descending, then seed.
  std::vector<SweepRow> rows;
  std::vector<int> s_values;
  std::vector<double> median_j;
  std::vector<double> median_iterations;
  RankCorrelation j_vs_s;
  RankCorrelation iterations_vs_s;
};

/// Sparse learner at every s in spec.s_grid for every seed, at the first eta
/// of spec.eta_grid.
SweepResult sparsity_sweep(const ExperimentSpec& spec);

double median(std::vector<double> values);

// Exports.
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);
std::string sweep_to_csv(const SweepResult& sweep);
std::string summary_report(const ExperimentSpec& spec, const MatrixResult& result);
std::string spec_to_text(const ExperimentSpec& spec);
/// FNV-1a digest of spec_to_text, 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

/// Writes comparison.csv, summary.txt, spec.json, trajectories/ and logs/
/// under `root`/<spec hash>-<UTC timestamp>, plus metadata.json holding the
/// timestamps. Returns the run directory.
std::filesystem::path write_run(const std::filesystem::path& root, const ExperimentSpec& spec,
                                const MatrixResult& result);

}  // namespace wacrl

#endif  // WACRL_HARNESS_HPP
