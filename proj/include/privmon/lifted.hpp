#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "privmon/common.hpp"
#include "privmon/model.hpp"

namespace privmon {

/// Horizon-K stacked representation of the plant:
///   F_K block-row i is A^{i-1}; J_K is strictly block lower triangular with
///   J[i][j] = A^{i-j-1}; N_K = J_K (I ⊗ B); C_tilde = I ⊗ C; D_tilde = I ⊗ D;
///   Q = F_K Sigma_x1 F_K' + J_K (I ⊗ Sigma_t) J_K'.
struct LiftedSystem {
  int K = 0;
  Matrix F, J, N, C_tilde, D_tilde, Q;
};

inline LiftedSystem build_lifted(const SystemModel& m, int K) {
  if (K < 1) throw DomainError("build_lifted: K must be at least 1");
  const Index nx = m.nx(), ny = m.ny(), ns = m.ns(), nu = m.nu();

  std::vector<Matrix> Apow(K);
  Apow[0] = Matrix::Identity(nx, nx);
  for (int i = 1; i < K; ++i) Apow[i] = Apow[i - 1] * m.A;

  LiftedSystem l;
  l.K = K;
  l.F.resize(K * nx, nx);
  for (int i = 0; i < K; ++i) l.F.middleRows(i * nx, nx) = Apow[i];

  l.J = Matrix::Zero(K * nx, (K - 1) * nx);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < i; ++j)
      l.J.block(i * nx, j * nx, nx, nx) = Apow[i - j - 1];

  l.N.resize(K * nx, (K - 1) * nu);
  for (int j = 0; j < K - 1; ++j)
    l.N.middleCols(j * nu, nu) = l.J.middleCols(j * nx, nx) * m.B;

  l.C_tilde = Matrix::Zero(K * ny, K * nx);
  l.D_tilde = Matrix::Zero(K * ns, K * nx);
  for (int i = 0; i < K; ++i) {
    l.C_tilde.block(i * ny, i * nx, ny, nx) = m.C;
    l.D_tilde.block(i * ns, i * nx, ns, nx) = m.D;
  }

  Matrix Q = l.F * m.Sigma_x1 * l.F.transpose();
  if (K > 1) {
    Matrix JT = l.J;
    for (int j = 0; j < K - 1; ++j)
      JT.middleCols(j * nx, nx) = l.J.middleCols(j * nx, nx) * m.Sigma_t;
    Q += JT * l.J.transpose();
  }
  l.Q = symmetrized(Q);
  return l;
}

/// Joint Gaussian law of the disclosed measurements ytilde^K and the private
/// outputs s^K. Sigma_s and Sigma_sy do not depend on Sigma_v_K; only the
/// ytilde marginal does.
struct JointLaw {
  Vector mean_y, mean_s;
  Matrix Sigma_y, Sigma_s, Sigma_sy;
  Matrix Sigma_joint;  // [[Sigma_y, Sigma_sy'], [Sigma_sy, Sigma_s]]
};

inline JointLaw joint_law(const LiftedSystem& l, const SystemModel& m,
                          const std::vector<Vector>& inputs, const Matrix& Sigma_v_K) {
  const int K = l.K;
  const Index ny = m.ny(), nu = m.nu();
  if (static_cast<int>(inputs.size()) != K - 1)
    throw HorizonMismatch("joint_law: need K-1 inputs");
  if (Sigma_v_K.rows() != K * ny || Sigma_v_K.cols() != K * ny)
    throw DimensionMismatch("joint_law: Sigma_v_K must be K*ny square");
  require_psd(Sigma_v_K, "joint_law: Sigma_v_K");

  Vector u_stack((K - 1) * nu);
  for (int k = 0; k < K - 1; ++k) u_stack.segment(k * nu, nu) = inputs[k];

  const Vector mean_x = l.F * m.mu_x1 + (K > 1 ? Vector(l.N * u_stack) : Vector::Zero(K * m.nx()));

  JointLaw law;
  law.mean_y = l.C_tilde * mean_x;
  law.mean_s = l.D_tilde * mean_x;

  Matrix Sigma_w_stack = Matrix::Zero(K * ny, K * ny);
  for (int k = 0; k < K; ++k) Sigma_w_stack.block(k * ny, k * ny, ny, ny) = m.Sigma_w;

  const Matrix QC = l.Q * l.C_tilde.transpose();
  law.Sigma_y = symmetrized(l.C_tilde * QC + Sigma_w_stack + Sigma_v_K);
  law.Sigma_s = symmetrized(l.D_tilde * l.Q * l.D_tilde.transpose());
  law.Sigma_sy = l.D_tilde * QC;

  const Index total = law.Sigma_y.rows() + law.Sigma_s.rows();
  law.Sigma_joint.resize(total, total);
  law.Sigma_joint.topLeftCorner(law.Sigma_y.rows(), law.Sigma_y.cols()) = law.Sigma_y;
  law.Sigma_joint.topRightCorner(law.Sigma_y.rows(), law.Sigma_s.rows()) = law.Sigma_sy.transpose();
  law.Sigma_joint.bottomLeftCorner(law.Sigma_s.rows(), law.Sigma_y.cols()) = law.Sigma_sy;
  law.Sigma_joint.bottomRightCorner(law.Sigma_s.rows(), law.Sigma_s.rows()) = law.Sigma_s;

  Eigen::LLT<Matrix> llt(law.Sigma_joint);
  if (llt.info() != Eigen::Success)
    throw NotPd("joint_law: joint covariance is not positive definite");
  return law;
}

/// Differential entropy of N(mu, Sigma) in nats.
inline double gaussian_entropy(const Matrix& Sigma) {
  if (Sigma.size() == 0) return 0.0;
  const double ld = logdet_pd(Sigma, "gaussian_entropy");
  const double m = static_cast<double>(Sigma.rows());
  return 0.5 * ld + 0.5 * m * (1.0 + std::log(2.0 * std::numbers::pi));
}

/// I[s; ytilde] in nats via the Schur-complement form
///   I = 1/2 logdet Sigma_s - 1/2 logdet(Sigma_s - Sigma_sy Sigma_y^{-1} Sigma_sy'),
/// cross-checked against h[s] + h[y] - h[s, y] to 1e-8.
inline double mutual_information(const JointLaw& law) {
  Matrix Sigma_y_inv;
  try {
    Sigma_y_inv = inverse_pd_guarded(law.Sigma_y, kCondLimit, "mutual_information");
  } catch (const SingularCovariance&) {
    throw;
  }
  const Matrix schur =
      symmetrized(law.Sigma_s - law.Sigma_sy * Sigma_y_inv * law.Sigma_sy.transpose());
  double primary;
  try {
    primary = 0.5 * logdet_pd(law.Sigma_s, "mutual_information") -
              0.5 * logdet_pd(schur, "mutual_information");
  } catch (const NotPd&) {
    throw SingularCovariance("mutual_information: conditional covariance is singular");
  }
  const double via_entropies = gaussian_entropy(law.Sigma_s) + gaussian_entropy(law.Sigma_y) -
                               gaussian_entropy(law.Sigma_joint);
  if (std::abs(primary - via_entropies) > 1e-8 * std::max(1.0, std::abs(primary)))
    throw SingularCovariance("mutual_information: entropy cross-check failed");
  return primary;
}

/// Upper bounds on the mutual information of log-concave vectors in terms of
/// the Gaussian value: bound_prop1 = I + C_n with C_n = (n/2) ln(2*pi*e*c(n)),
/// c(n) = e^2 n^2 / (4 sqrt(2) (n+2)); bound_prop2 = I + n.
struct LogConcaveBounds {
  double c_n = 0.0;
  double C_n = 0.0;
  double bound_prop1 = 0.0;
  double bound_prop2 = 0.0;
};

inline LogConcaveBounds logconcave_bounds(int n, double I_gauss) {
  if (n < 1) throw DomainError("logconcave_bounds: n must be at least 1");
  LogConcaveBounds b;
  const double nd = static_cast<double>(n);
  b.c_n = std::exp(2.0) * nd * nd / (4.0 * std::sqrt(2.0) * (nd + 2.0));
  b.C_n = 0.5 * nd * std::log(2.0 * std::numbers::pi * std::numbers::e * b.c_n);
  b.bound_prop1 = I_gauss + b.C_n;
  b.bound_prop2 = I_gauss + nd;
  return b;
}

}  // namespace privmon
