#ifndef WACRL_QLEARN_HPP
#define WACRL_QLEARN_HPP

#include "wacrl/common.hpp"
#include "wacrl/lqr.hpp"
#include "wacrl/model.hpp"
#include "wacrl/sim.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wacrl {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Quadratic-form parameterization.
//
// basis(U) lists U_i U_j for i <= j, row-major over the upper triangle.
// vech(G) lists G_ii on the diagonal and 2 G_ij off the diagonal in the same
// order, so that vech(G)' basis(U) = U'GU for every symmetric G.

inline int vech_dim(int d) { return d * (d + 1) / 2; }

/// Throws Error(InvalidParameter) if `g` is not symmetric within 1e-10.
Vector vech(const Matrix& g);
Matrix unvech(const Vector& w);
Vector basis(const Vector& u);

struct CriticState {
  Vector w;
  double alpha_c = 0.0;
  double eps_w = 1e-5;
  bool converged = false;
};

struct Actor {
  Matrix k;
  /// Positions allowed to be nonzero.
  Mask support;
  /// Off-diagonal-block budget s.
  int budget_s = 0;
  double alpha_a = 0.0;
  double eps_k = 1e-5;
  bool support_frozen = false;
};

/// Sum-of-sines probe. Channel c uses frequencies[c] with phases[c].
struct ExplorationNoise {
  double duration = 2.0;
  std::vector<std::vector<double>> frequencies;
  std::vector<std::vector<double>> phases;
  Vector amplitudes;

  int distinct_frequency_count() const;

  /// `per_channel` frequencies per input, log-spaced over [lo, hi] rad/s and
  /// interleaved so that no two channels share a frequency. Phases uniform in
  /// [0, 2pi) from `seed`. The amplitude is scaled so that each channel's RMS
  /// equals `rms`.
  static ExplorationNoise multisine(int channels, double rms, std::uint64_t seed,
                                    double duration = 2.0, int per_channel = 120,
                                    double lo = 0.1, double hi = 60.0);
};

/// amplitude_c * sum_f sin(w_f t + phi_f) for t <= duration, zero afterwards.
Vector exploration_input(const ExplorationNoise& noise, double t);

enum class InitMode { Nominal, Random };

struct LearnerConfig {
  double sample_period = 0.02;
  int substeps = 20;
  double alpha_c = 100.0;
  double alpha_a = 1.0;
  double eps_w = 1e-5;
  double eps_k = 1e-5;
  /// Off-diagonal budget s; negative means unconstrained (m * n).
  int budget_s = -1;
  double newton_step = 1.0;
  int max_iters = 2000;
  int cg_iters = 50;
  double cg_damping = 1e-6;
  /// Sample windows per actor update; the actor batch holds their end states.
  int actor_period = 5;
  /// Consecutive sub-threshold critic steps before the critic is declared
  /// converged and the support is frozen.
  int critic_patience = 10;
  /// Count self-block entries against the budget as well.
  bool count_self_links = false;
  /// Keep the +P0 term in the nominal kernel's upper-left block.
  bool include_value_term = true;
  double pe_duration = 2.0;
  int pe_frequencies = 120;
  double pe_freq_lo = 0.1;
  double pe_freq_hi = 60.0;
  /// Probe RMS as a fraction of the largest initial control magnitude.
  double pe_amplitude_fraction = 0.05;
  std::uint64_t seed = 0;
  double divergence_factor = 1e6;
  double max_g22_condition = 1e8;
  InitMode init = InitMode::Nominal;

  /// Throws Error(InvalidParameter) on invalid settings. Returns a warning
  /// message (empty if none), e.g. when alpha_c < 10 alpha_a.
  std::string validate() const;
};

/// One sampling window as seen by the critic.
struct CriticWindow {
  Vector u_start;  // [x; u] at the start of the window
  Vector u_end;    // [x; u] at the end of the window
  double cost = 0.0;
  double duration = 0.0;
};

/// e_c = w' (basis(U_end) - basis(U_start)) + window cost. Throws
/// Error(InvalidParameter) when the window length differs from `period`.
double critic_error(const Vector& w, const CriticWindow& window, double period);

/// w - dt alpha_c sigma e_c / (1 + sigma'sigma)^2.
Vector critic_update(const Vector& w, double e_c, const Vector& sigma, double alpha_c, double dt);

/// e_a = K x - G22^{-1} G21 x.
Vector actor_error(const Matrix& k, const Kernel& kernel, const Vector& x,
                   double max_condition = 1e8);

/// Gradient of ||e_a||^2 with respect to K: 2 e_a x'.
Matrix actor_gradient(const Matrix& k, const Kernel& kernel, const Vector& x,
                      double max_condition = 1e8);

/// Mask of the `count` largest-magnitude entries among the ranked positions.
/// Ranked positions are the off-diagonal-block ones, or all positions when
/// `include_self` is set. Ties go to the lower row-major index.
Mask largest_entries(const Matrix& values, const BlockStructure& blocks, int count,
                     bool include_self);

/// Mask of the self-block positions K_ii.
Mask self_block_mask(const BlockStructure& blocks);

/// [K]_s: keeps the s largest off-diagonal entries (and every self-block
/// entry unless `count_self_links`). Returns the kept mask through `kept`.
Matrix prune_to_budget(const Matrix& k, const BlockStructure& blocks, int s,
                       bool count_self_links, Mask* kept = nullptr);

struct GraspDiagnostics {
  Matrix gradient;
  int cg_iterations = 0;
  bool cg_fallback = false;
  int tau_off_diagonal = 0;
};

/// One GraSP actor update on a batch of states.
Actor grasp_step(const Actor& actor, const Kernel& kernel, std::span<const Vector> batch,
                 const BlockStructure& blocks, const LearnerConfig& config,
                 GraspDiagnostics* diagnostics = nullptr);

/// Largest |gradient| over supp(K) for the batch objective sum ||e_a||^2.
double restricted_stationarity(const Actor& actor, const Kernel& kernel,
                               std::span<const Vector> batch, double max_condition = 1e8);

struct LearnLogEntry {
  int iteration = 0;
  double time = 0.0;
  double critic_error = 0.0;  // RMS of e_c over the batch windows
  double actor_error = 0.0;   // RMS of ||e_a|| over the batch states
  int card_off = 0;
  double dk = 0.0;            // ||K^{i+1} - K^i||_F
  double dw = 0.0;            // last ||W^{i+1} - W^i||_2
  int phase = 1;
  int support_changes = 0;
  bool cg_fallback = false;
  double wall_clock = 0.0;
};

struct LearnResult {
  Actor actor;
  CriticState critic;
  std::vector<LearnLogEntry> log;
  Trajectory trajectory;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  /// Simulated time at which learning stopped.
  double stop_time = 0.0;
  /// Simulated time at which the critic converged (phase 2 start), or -1.
  double phase2_time = -1.0;
  double stationarity = 0.0;
  int max_card_off = 0;
  std::string diagnostic;
};

/// Actor-critic Q-learning with GraSP sparsification.
///
/// The learner only talks to `plant`; `nominal` provides the warm start and
/// the block structure. Returns when the actor converges in phase 2, the
/// iteration budget runs out, or the state diverges.
LearnResult learn(Plant& plant, const SmallSignalModel& nominal, const CostWeights& w,
                  const LearnerConfig& config);

std::string learn_log_to_csv(const std::vector<LearnLogEntry>& log);

/// Actor file: the gain in the model file's matrix format plus the support
/// as a list of [row, col] pairs.
std::string actor_to_text(const Actor& actor, const BlockStructure& blocks);
Matrix actor_gain_from_text(const std::string& text);

}  // namespace wacrl

#endif  // WACRL_QLEARN_HPP
