#ifndef WACRL_LQR_HPP
#define WACRL_LQR_HPP

#include "wacrl/common.hpp"
#include "wacrl/model.hpp"

namespace wacrl {

/// Quadratic cost weights for J = integral of x'Qx + u'Ru.
struct CostWeights {
  Matrix q;
  Matrix r;

  /// q = q_scale * I_n, r = r_scale * I_m.
  static CostWeights identity(int n, int m, double q_scale = 1.0, double r_scale = 1.0);

  /// Q symmetric PSD, R symmetric PD, sizes n and m.
  void validate(int n, int m) const;
};

/// Diagonal weights for a swing model with (angle, speed, actuator) states per
/// machine; r weights every input.
CostWeights swing_weights(const SmallSignalModel& model, double angle, double speed,
                          double actuator, double r);

/// Weights of the ten-machine benchmark: 1000 on angle and speed, 0 on the
/// actuator state, 0.01 on each input.
CostWeights benchmark_weights(const SmallSignalModel& model);

/// Q-function kernel, partitioned as [[G11, G12], [G21, G22]] with
/// G11 n x n and G22 m x m.
struct Kernel {
  Matrix g;
  int n = 0;
  int m = 0;

  auto g11() const { return g.topLeftCorner(n, n); }
  auto g12() const { return g.topRightCorner(n, m); }
  auto g21() const { return g.bottomLeftCorner(m, n); }
  auto g22() const { return g.bottomRightCorner(m, m); }

  /// Gain of the minimizing policy u = -G22^{-1} G21 x. Throws
  /// Error(IllConditioned) when cond(G22) exceeds `max_condition` or G22 is
  /// not invertible.
  Matrix greedy_gain(double max_condition = 1e8) const;
};

struct CareReport {
  Matrix p;
  double residual = 0.0;
  int newton_steps = 0;
};

/// Stabilizing solution of A'P + PA - PBR^{-1}B'P + Q = 0.
///
/// The Hamiltonian's stable invariant subspace is obtained with the scaled
/// matrix sign function and then polished by Newton-Kleinman iterations until
/// ||residual||_F <= 1e-8 (1 + ||P||_F). Throws Error(Unstabilizable) when no
/// stabilizing solution exists and Error(Convergence) when the tolerance is
/// not reached.
CareReport solve_care_report(const Matrix& a, const Matrix& b, const CostWeights& w);
Matrix solve_care(const Matrix& a, const Matrix& b, const CostWeights& w);
Matrix solve_care(const SmallSignalModel& model, const CostWeights& w);

/// K = R^{-1} B' P, for u = -Kx.
Matrix lqr_gain(const Matrix& a, const Matrix& b, const CostWeights& w);
Matrix lqr_gain(const SmallSignalModel& model, const CostWeights& w);

double care_residual(const Matrix& a, const Matrix& b, const CostWeights& w, const Matrix& p);

/// Solves A'X + XA + M = 0 for Hurwitz A (complex Schur, Bartels-Stewart).
Matrix solve_lyapunov(const Matrix& a_cl, const Matrix& m_rhs);

/// Infinite-horizon cost of u = -Kx from x0, or +inf when A - BK is not Hurwitz.
double evaluate_cost(const Matrix& a, const Matrix& b, const CostWeights& w, const Matrix& k,
                     const Vector& x0);
double evaluate_cost(const SmallSignalModel& model, const CostWeights& w, const Matrix& k,
                     const Vector& x0);

/// Cost of u = -Kx accumulated over [0, t_end], evaluated exactly through the
/// Van Loan block exponential. Finite for any K.
double evaluate_cost_finite(const SmallSignalModel& model, const CostWeights& w, const Matrix& k,
                            const Vector& x0, double t_end);

/// Kernel built from the nominal Riccati solution P0:
/// [[P0 A0 + A0'P0 + Q (+ P0), P0 B0], [B0'P0, R]].
Kernel nominal_kernel(const SmallSignalModel& nominal, const CostWeights& w,
                      bool include_value_term = true);

/// Largest real part of the eigenvalues of `a`.
double spectral_abscissa(const Matrix& a);

bool is_hurwitz(const Matrix& a);

}  // namespace wacrl

#endif  // WACRL_LQR_HPP
