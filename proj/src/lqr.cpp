#include "wacrl/lqr.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <limits>

namespace wacrl {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kCareTol = 1e-8;
constexpr double kLyapTol = 1e-9;

bool nearly_symmetric(const Matrix& m, double tol) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_dims(const Matrix& a, const Matrix& b, const CostWeights& w) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "A must be square");
  if (b.rows() != a.rows()) throw Error(ErrorCode::DimensionMismatch, "B rows must match A");
  w.validate(static_cast<int>(a.rows()), static_cast<int>(b.cols()));
}

// Scaled Newton iteration for sign(H); returns false if H appears to have
// eigenvalues on (or numerically at) the imaginary axis.
bool matrix_sign(Matrix z, Matrix& out) {
  const Eigen::Index dim = z.rows();
  constexpr int kMaxIter = 100;
  for (int it = 0; it < kMaxIter; ++it) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const Vector diag = lu.matrixLU().diagonal();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double d = std::abs(diag(i));
      if (d == 0.0 || !std::isfinite(d)) return false;
      logdet += std::log(d);
    }
    const Matrix zinv = lu.inverse();
    if (!zinv.allFinite()) return false;
    // Determinant scaling only pays off early; it can stall near convergence.
    const double c = it < 10 ? std::exp(-logdet / static_cast<double>(dim)) : 1.0;
    const Matrix next = 0.5 * (c * z + zinv / c);
    const double change = (next - z).lpNorm<1>();
    z = next;
    if (change <= 1e-13 * z.lpNorm<1>()) {
      out = z;
      return true;
    }
  }
  // Accept a slowly converging iterate if it is a good involution.
  const Matrix sq = z * z - Matrix::Identity(dim, dim);
  if (sq.lpNorm<1>() <= 1e-8 * std::max(1.0, z.lpNorm<1>())) {
    out = z;
    return true;
  }
  return false;
}

}  // namespace

CostWeights CostWeights::identity(int n, int m, double q_scale, double r_scale) {
  return {q_scale * Matrix::Identity(n, n), r_scale * Matrix::Identity(m, m)};
}

CostWeights swing_weights(const SmallSignalModel& model, double angle, double speed,
                          double actuator, double r) {
  const BlockStructure& blocks = model.blocks;
  Vector q = Vector::Zero(model.n());
  for (int g = 0; g < blocks.gen_count; ++g) {
    const int lo = blocks.state_offsets[g];
    if (blocks.state_offsets[g + 1] - lo != 3)
      throw Error(ErrorCode::DimensionMismatch, "swing weights need three states per machine");
    q(lo) = angle;
    q(lo + 1) = speed;
    q(lo + 2) = actuator;
  }
  CostWeights w{q.asDiagonal(), r * Matrix::Identity(model.m(), model.m())};
  w.validate(model.n(), model.m());
  return w;
}

CostWeights benchmark_weights(const SmallSignalModel& model) {
  return swing_weights(model, 1000.0, 1000.0, 0.0, 0.01);
}

void CostWeights::validate(int n, int m) const {
  if (q.rows() != n || q.cols() != n) throw Error(ErrorCode::DimensionMismatch, "Q must be n x n");
  if (r.rows() != m || r.cols() != m) throw Error(ErrorCode::DimensionMismatch, "R must be m x m");
  if (!nearly_symmetric(q, kSymmetryTol)) throw Error(ErrorCode::InvalidParameter, "Q must be symmetric");
  if (!nearly_symmetric(r, kSymmetryTol)) throw Error(ErrorCode::InvalidParameter, "R must be symmetric");
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(q), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -kSymmetryTol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
      throw Error(ErrorCode::InvalidParameter, "Q must be positive semidefinite");
  }
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(r), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw Error(ErrorCode::InvalidParameter, "R must be positive definite");
  }
}

Matrix Kernel::greedy_gain(double max_condition) const {
  const Matrix b22 = g22();
  Eigen::JacobiSVD<Matrix> svd(b22);
  const Vector sv = svd.singularValues();
  if (sv.size() == 0) return Matrix::Zero(m, n);
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || !(smax / smin <= max_condition)) {
    throw Error(ErrorCode::IllConditioned,
                "kernel block G22 is ill-conditioned (cond = " +
                    std::to_string(smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity()) + ")");
  }
  return b22.partialPivLu().solve(Matrix(g21()));
}

double care_residual(const Matrix& a, const Matrix& b, const CostWeights& w, const Matrix& p) {
  const Matrix pb = p * b;
  const Matrix res = a.transpose() * p + p * a - pb * w.r.llt().solve(pb.transpose()) + w.q;
  return res.norm();
}

CareReport solve_care_report(const Matrix& a, const Matrix& b, const CostWeights& w) {
  check_dims(a, b, w);
  const Eigen::Index n = a.rows();
  const Eigen::LLT<Matrix> r_llt(w.r);
  const Matrix s = b * r_llt.solve(b.transpose());

  Matrix h(2 * n, 2 * n);
  h << a, -s, -w.q, -a.transpose();

  Matrix sign_h;
  if (!matrix_sign(h, sign_h))
    throw Error(ErrorCode::Unstabilizable, "Hamiltonian has eigenvalues on the imaginary axis");

  // Stable subspace: columns [I; P] satisfy (sign(H) + I) [I; P] = 0.
  const Matrix id = Matrix::Identity(n, n);
  Matrix lhs(2 * n, n);
  Matrix rhs(2 * n, n);
  lhs << sign_h.topRightCorner(n, n), sign_h.bottomRightCorner(n, n) + id;
  rhs << -(sign_h.topLeftCorner(n, n) + id), -sign_h.bottomLeftCorner(n, n);
  Matrix p = symmetrized(lhs.colPivHouseholderQr().solve(rhs));
  if (!p.allFinite()) throw Error(ErrorCode::Unstabilizable, "stable invariant subspace is not a graph");

  CareReport report;
  double residual = care_residual(a, b, w, p);
  const Matrix kl_q = w.q;
  constexpr int kMaxNewton = 60;
  int steps = 0;
  while (residual > kCareTol * (1.0 + p.norm()) && steps < kMaxNewton) {
    const Matrix k = r_llt.solve(b.transpose() * p);
    const Matrix acl = a - b * k;
    if (!is_hurwitz(acl)) {
      throw Error(ErrorCode::Unstabilizable, "Riccati iterate is not stabilizing");
    }
    const Matrix next = solve_lyapunov(acl, kl_q + k.transpose() * w.r * k);
    const double next_res = care_residual(a, b, w, next);
    ++steps;
    // Newton-Kleinman is monotone in exact arithmetic; stop once rounding dominates.
    if (next_res >= residual && residual <= 1e-6 * (1.0 + p.norm())) break;
    p = next;
    residual = next_res;
  }
  if (residual > kCareTol * (1.0 + p.norm()))
    throw Error(ErrorCode::Convergence, "Riccati residual " + std::to_string(residual) +
                                            " above tolerance");
  const Matrix k = r_llt.solve(b.transpose() * p);
  if (!is_hurwitz(a - b * k))
    throw Error(ErrorCode::Unstabilizable, "Riccati solution is not stabilizing");
  report.p = p;
  report.residual = residual;
  report.newton_steps = steps;
  return report;
}

Matrix solve_care(const Matrix& a, const Matrix& b, const CostWeights& w) {
  return solve_care_report(a, b, w).p;
}

Matrix solve_care(const SmallSignalModel& model, const CostWeights& w) {
  return solve_care(model.a, model.b, w);
}

Matrix lqr_gain(const Matrix& a, const Matrix& b, const CostWeights& w) {
  const Matrix p = solve_care(a, b, w);
  return w.r.llt().solve(b.transpose() * p);
}

Matrix lqr_gain(const SmallSignalModel& model, const CostWeights& w) {
  return lqr_gain(model.a, model.b, w);
}

Matrix solve_lyapunov(const Matrix& a_cl, const Matrix& m_rhs) {
  using CMatrix = Eigen::MatrixXcd;
  using CVector = Eigen::VectorXcd;
  const Eigen::Index n = a_cl.rows();
  if (a_cl.cols() != n || m_rhs.rows() != n || m_rhs.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "Lyapunov operands must be square and conformant");
  if (n == 0) return Matrix(0, 0);

  Eigen::ComplexSchur<CMatrix> schur(a_cl.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success)
    throw Error(ErrorCode::Convergence, "Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(t(i, i).real() < 0.0))
      throw Error(ErrorCode::NotHurwitz, "Lyapunov operand is not Hurwitz");
  }

  auto solve_once = [&](const Matrix& rhs) {
    // T* Y + Y T = -C, with Y = U* X U and C = U* rhs U; T* is lower triangular.
    const CMatrix c = u.adjoint() * rhs.cast<std::complex<double>>() * u;
    const CMatrix t_adj = t.adjoint();
    CMatrix y = CMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      CVector col = -c.col(j);
      for (Eigen::Index k = 0; k < j; ++k) col -= t(k, j) * y.col(k);
      CMatrix lower = t_adj;
      lower.diagonal().array() += t(j, j);
      y.col(j) = lower.triangularView<Eigen::Lower>().solve(col);
    }
    return Matrix((u * y * u.adjoint()).real());
  };

  Matrix x = symmetrized(solve_once(m_rhs));
  // One step of iterative refinement on the residual.
  const Matrix res = a_cl.transpose() * x + x * a_cl + m_rhs;
  if (res.norm() > kLyapTol * (1.0 + x.norm()) * 1e-3) x += symmetrized(solve_once(res));
  return x;
}

double evaluate_cost(const Matrix& a, const Matrix& b, const CostWeights& w, const Matrix& k,
                     const Vector& x0) {
  if (x0.isZero(0.0)) return 0.0;
  const Matrix acl = a - b * k;
  if (!is_hurwitz(acl)) return std::numeric_limits<double>::infinity();
  const Matrix x = solve_lyapunov(acl, w.q + k.transpose() * w.r * k);
  return std::max(0.0, x0.dot(x * x0));
}

double evaluate_cost(const SmallSignalModel& model, const CostWeights& w, const Matrix& k,
                     const Vector& x0) {
  return evaluate_cost(model.a, model.b, w, k, x0);
}

double evaluate_cost_finite(const SmallSignalModel& model, const CostWeights& w, const Matrix& k,
                            const Vector& x0, double t_end) {
  if (!(t_end >= 0.0)) throw Error(ErrorCode::InvalidParameter, "horizon must be non-negative");
  const Eigen::Index n = model.a.rows();
  const Matrix acl = model.a - model.b * k;
  const Matrix weight = w.q + k.transpose() * w.r * k;
  // Van Loan on a short step h = t_end / 2^k, then doubling:
  // G(2h) = G(h) + Phi(h)' G(h) Phi(h), Phi(2h) = Phi(h)^2.
  const double scale = std::max(acl.lpNorm<1>(), weight.lpNorm<1>() > 0.0 ? 1.0 : 0.0);
  int doublings = 0;
  double h = t_end;
  while (h * scale > 0.25 && doublings < 60) {
    h *= 0.5;
    ++doublings;
  }
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = -acl.transpose();
  block.topRightCorner(n, n) = weight;
  block.bottomRightCorner(n, n) = acl;
  const Matrix e = Matrix(block * h).exp();
  Matrix phi = e.bottomRightCorner(n, n);
  Matrix gram = symmetrized(phi.transpose() * e.topRightCorner(n, n));
  for (int i = 0; i < doublings; ++i) {
    gram = symmetrized(gram + phi.transpose() * gram * phi);
    phi = phi * phi;
  }
  return std::max(0.0, x0.dot(symmetrized(gram) * x0));
}

Kernel nominal_kernel(const SmallSignalModel& nominal, const CostWeights& w,
                      bool include_value_term) {
  const Matrix p = solve_care(nominal, w);
  const int n = nominal.n();
  const int m = nominal.m();
  Kernel k;
  k.n = n;
  k.m = m;
  k.g = Matrix::Zero(n + m, n + m);
  Matrix g11 = p * nominal.a + nominal.a.transpose() * p + w.q;
  if (include_value_term) g11 += p;
  k.g.topLeftCorner(n, n) = symmetrized(g11);
  k.g.topRightCorner(n, m) = p * nominal.b;
  k.g.bottomLeftCorner(m, n) = k.g.topRightCorner(n, m).transpose();
  k.g.bottomRightCorner(m, m) = w.r;
  return k;
}

double spectral_abscissa(const Matrix& a) {
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  if (!a.allFinite()) throw Error(ErrorCode::Convergence, "matrix has non-finite entries");
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::Convergence, "eigensolver failed");
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Matrix& a) { return spectral_abscissa(a) < 0.0; }

}  // namespace wacrl
