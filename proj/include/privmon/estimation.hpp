#pragma once

#include <vector>

#include "privmon/common.hpp"
#include "privmon/model.hpp"

namespace privmon {

/// Steady-state Kalman filter design: P solves the filter Riccati equation
///   A P A' - P + Sigma_t = A P C' (Sigma_w + C P C')^{-1} C P A',
/// L = (A P C')(Sigma_w + C P C')^{-1}, Sigma_r = C P C' + Sigma_w.
struct KalmanDesign {
  Matrix P, L, Sigma_r;
};

inline KalmanDesign solve_dare(const SystemModel& m, double rel_tol = 1e-12,
                               int max_iter = 100000) {
  Matrix P = m.Sigma_t;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix S = m.Sigma_w + m.C * P * m.C.transpose();
    const Matrix APC = m.A * P * m.C.transpose();
    Matrix Pn = m.A * P * m.A.transpose() + m.Sigma_t -
                APC * solve_pd(S, APC.transpose(), "solve_dare");
    Pn = symmetrized(Pn);
    if ((Pn - P).norm() <= rel_tol * Pn.norm()) {
      const Matrix Sn = m.Sigma_w + m.C * Pn * m.C.transpose();
      KalmanDesign design;
      design.P = Pn;
      design.L = m.A * Pn * m.C.transpose() * inverse_pd_guarded(Sn);
      design.Sigma_r = symmetrized(Sn);
      return design;
    }
    P = Pn;
  }
  throw NoConvergence("solve_dare: fixed-point iteration did not converge");
}

/// Residual norm of the Riccati equation at P (used by tests and validation).
inline double dare_residual(const SystemModel& m, const Matrix& P) {
  const Matrix S = m.Sigma_w + m.C * P * m.C.transpose();
  const Matrix APC = m.A * P * m.C.transpose();
  const Matrix res = m.A * P * m.A.transpose() - P + m.Sigma_t -
                     APC * solve_pd(S, APC.transpose(), "dare_residual");
  return res.norm();
}

/// Residuals r_k = y_k - C xhat_k with precomputed distance measures
/// z_k = r_k' Sigma_r^{-1} r_k (always normalized by the nominal Sigma_r).
struct ResidualSequence {
  int K = 0;
  std::vector<Vector> r;
  std::vector<double> z;
};

/// Runs the remote one-step-ahead filter over the given measurement/input
/// record. Works identically for nominal (y, u) and distorted (ytilde,
/// utilde) data; xhat_1 = mu_x1.
inline ResidualSequence run_remote_filter(const SystemModel& m, const KalmanDesign& design,
                                          const std::vector<Vector>& measurements,
                                          const std::vector<Vector>& inputs) {
  const int K = static_cast<int>(measurements.size());
  if (static_cast<int>(inputs.size()) + 1 != K)
    throw HorizonMismatch("run_remote_filter: need K measurements and K-1 inputs");
  const Matrix Sigma_r_inv = inverse_pd_guarded(design.Sigma_r);

  ResidualSequence seq;
  seq.K = K;
  seq.r.reserve(K);
  seq.z.reserve(K);
  Vector xhat = m.mu_x1;
  for (int k = 0; k < K; ++k) {
    const Vector r = measurements[k] - m.C * xhat;
    seq.r.push_back(r);
    seq.z.push_back(r.dot(Sigma_r_inv * r));
    if (k + 1 < K) xhat = m.A * xhat + m.B * inputs[k] + design.L * r;
  }
  return seq;
}

/// Per-step distorted residual covariance
///   Sigma_tilde_k = Sigma_r + Sigma_v_k + C L Sigma_v_k L' C' + C B Sigma_j_k B' C'.
inline Matrix distorted_residual_cov(const KalmanDesign& design, const SystemModel& m,
                                     const Matrix& Sigma_v_k, const Matrix& Sigma_j_k) {
  if (Sigma_v_k.rows() != m.ny()) throw DimensionMismatch("Sigma_v_k must be ny by ny");
  if (Sigma_j_k.rows() != m.nu()) throw DimensionMismatch("Sigma_j_k must be nu by nu");
  require_psd(Sigma_v_k, "distorted_residual_cov: Sigma_v_k");
  require_psd(Sigma_j_k, "distorted_residual_cov: Sigma_j_k");
  const Matrix CL = m.C * design.L;
  const Matrix CB = m.C * m.B;
  return symmetrized(design.Sigma_r + Sigma_v_k + CL * Sigma_v_k * CL.transpose() +
                     CB * Sigma_j_k * CB.transpose());
}

/// Linear MMSE estimate of s given observed y under a joint Gaussian law.
struct MmseEstimate {
  Vector s_hat;
  Matrix error_cov;
  double mse = 0.0;
};

inline MmseEstimate mmse_estimate(const Vector& mean_s, const Vector& mean_y,
                                  const Matrix& Sigma_s, const Matrix& Sigma_sy,
                                  const Matrix& Sigma_y, const Vector& observed_y) {
  if (Sigma_sy.rows() != mean_s.size() || Sigma_sy.cols() != mean_y.size())
    throw DimensionMismatch("mmse_estimate: Sigma_sy shape mismatch");
  if (observed_y.size() != mean_y.size())
    throw DimensionMismatch("mmse_estimate: observation length mismatch");
  const Matrix Sigma_y_inv = inverse_pd_guarded(Sigma_y, kCondLimit, "mmse_estimate");

  MmseEstimate est;
  est.s_hat = mean_s + Sigma_sy * Sigma_y_inv * (observed_y - mean_y);
  est.error_cov = symmetrized(Sigma_s - Sigma_sy * Sigma_y_inv * Sigma_sy.transpose());
  est.mse = est.error_cov.trace();
  return est;
}

}  // namespace privmon
