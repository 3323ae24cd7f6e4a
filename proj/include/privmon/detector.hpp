#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "privmon/common.hpp"
#include "privmon/estimation.hpp"
#include "privmon/special_functions.hpp"

namespace privmon {

/// Chi-squared procedure configuration. alpha is tied to target_far by
/// alpha = 2 P^{-1}(ny/2, 1 - target_far).
struct DetectorConfig {
  double target_far = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  int n_y = 0;
};

inline double threshold_alpha(double target_far, int n_y) {
  if (!(target_far > 0.0 && target_far < 1.0))
    throw DomainError("threshold_alpha: target false alarm rate must lie in (0, 1)");
  if (n_y < 1) throw DomainError("threshold_alpha: n_y must be positive");
  return 2.0 * inv_reg_lower_gamma(0.5 * n_y, 1.0 - target_far);
}

inline DetectorConfig make_detector_config(double target_far, double epsilon, int n_y) {
  if (epsilon < 0.0) throw DomainError("make_detector_config: epsilon must be nonnegative");
  if (target_far + epsilon > 1.0 + 1e-15)
    throw DomainError("make_detector_config: target_far + epsilon must not exceed 1");
  return DetectorConfig{target_far, epsilon, threshold_alpha(target_far, n_y), n_y};
}

/// Alarm times (1-based) where z_k exceeds the threshold.
inline std::vector<int> run_detector(const ResidualSequence& residuals,
                                     const DetectorConfig& config) {
  std::vector<int> alarms;
  for (int k = 0; k < residuals.K; ++k)
    if (residuals.z[k] > config.alpha) alarms.push_back(k + 1);
  return alarms;
}

namespace detail {

/// Eigenvalues of Sigma' = Sigma_tilde^{1/2} Sigma_r^{-1} Sigma_tilde^{1/2},
/// computed from the symmetric similarity Sigma_r^{-1/2} Sigma_tilde Sigma_r^{-1/2}.
inline std::vector<double> quadratic_form_eigenvalues(const Matrix& Sigma_tilde,
                                                      const Matrix& Sigma_r) {
  require_pd(Sigma_r, "quadratic_form_eigenvalues: Sigma_r");
  require_pd(Sigma_tilde, "quadratic_form_eigenvalues: Sigma_tilde");
  const Matrix root_inv = inverse_pd_guarded(symmetric_sqrt(Sigma_r));
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      symmetrized(root_inv * Sigma_tilde * root_inv), Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(),
                          es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

}  // namespace detail

/// False alarm rate of the distorted detector via the Welch-Satterthwaite
/// gamma approximation of z_tilde = r' Sigma_r^{-1} r, r ~ N(0, Sigma_tilde).
inline double false_alarm_rate_analytic(const Matrix& Sigma_tilde, const Matrix& Sigma_r,
                                        double alpha) {
  const GammaFit fit = ws_gamma_fit(detail::quadratic_form_eigenvalues(Sigma_tilde, Sigma_r));
  return 1.0 - gamma_cdf(fit, alpha);
}

/// Detection rate without privacy distortion: z is noncentral chi-squared
/// with noncentrality |Sigma_r^{-1/2} r_delta|^2.
inline double detection_rate_no_privacy(const Vector& fault_residual_mean, const Matrix& Sigma_r,
                                        double alpha) {
  const Matrix root_inv = inverse_pd_guarded(symmetric_sqrt(Sigma_r));
  const double lambda = (root_inv * fault_residual_mean).squaredNorm();
  return 1.0 - noncentral_chi2_cdf(static_cast<int>(Sigma_r.rows()), lambda, alpha);
}

/// Detection rate with privacy distortion: z_tilde is a generalized
/// chi-squared quadratic form, evaluated by Monte Carlo.
inline McProbability detection_rate_with_privacy(const Vector& fault_residual_mean,
                                                 const Matrix& Sigma_tilde, const Matrix& Sigma_r,
                                                 double alpha, std::int64_t samples,
                                                 std::uint64_t seed) {
  const Matrix root = symmetric_sqrt(Sigma_tilde);
  const Matrix sigma_prime = root * inverse_pd_guarded(Sigma_r) * root;
  const Vector shift = inverse_pd_guarded(root) * fault_residual_mean;
  const McProbability cdf = generalized_chi2_cdf_mc(sigma_prime, shift, alpha, samples, seed);
  return McProbability{1.0 - cdf.value, cdf.std_error};
}

/// Steady-state mean of the residual under a constant fault delta: the
/// noise-free fixed point of the residual recursion,
/// r_delta = C (I - A + L C)^{-1} (G - L H) delta + H delta.
inline Vector fault_residual_mean_steady(const SystemModel& m, const KalmanDesign& design,
                                         const Vector& delta) {
  const Matrix ALC = m.A - design.L * m.C;
  const Matrix I = Matrix::Identity(m.nx(), m.nx());
  const Vector ebar = (I - ALC).partialPivLu().solve((m.G - design.L * m.H) * delta);
  return m.C * ebar + m.H * delta;
}

/// Transient residual means r_delta_k for k = 1..K under a constant fault.
inline std::vector<Vector> fault_residual_mean_transient(const SystemModel& m,
                                                         const KalmanDesign& design,
                                                         const Vector& delta, int K) {
  std::vector<Vector> out;
  out.reserve(K);
  Vector e = Vector::Zero(m.nx());
  const Matrix ALC = m.A - design.L * m.C;
  for (int k = 0; k < K; ++k) {
    out.push_back(m.C * e + m.H * delta);
    e = ALC * e + (m.G - design.L * m.H) * delta;
  }
  return out;
}

struct RocPoint {
  double target_far = 0.0;
  double alpha = 0.0;
  double far = 0.0;
  double det_rate = 0.0;
  double std_error = 0.0;
  bool flagged = false;
};

struct RocCurve {
  std::vector<RocPoint> points;  // ordered by increasing false alarm rate
};

/// Sweeps the detector threshold over far_grid (target false alarm rates)
/// at a fixed mechanism. The x-coordinate is the actual false alarm rate
/// under Sigma_tilde. When Sigma_tilde equals Sigma_r the detection rate is
/// evaluated in closed form (noncentral chi-squared, zero standard error),
/// otherwise by Monte Carlo.
inline RocCurve roc_curve(const Vector& fault_residual_mean, const Matrix& Sigma_tilde,
                          const Matrix& Sigma_r, const std::vector<double>& far_grid,
                          std::int64_t samples, std::uint64_t seed,
                          double flagged_target = -1.0) {
  for (std::size_t i = 1; i < far_grid.size(); ++i)
    if (!(far_grid[i] > far_grid[i - 1]))
      throw DomainError("roc_curve: far_grid must be strictly increasing");
  if (!far_grid.empty() && !(far_grid.front() > 0.0 && far_grid.back() < 1.0))
    throw DomainError("roc_curve: far_grid must lie in (0, 1)");
  const bool undistorted = (Sigma_tilde - Sigma_r).norm() <= 1e-12 * Sigma_r.norm();
  const int n_y = static_cast<int>(Sigma_r.rows());

  RocCurve curve;
  std::uint64_t sub = 0;
  for (double target : far_grid) {
    RocPoint p;
    p.target_far = target;
    p.alpha = threshold_alpha(target, n_y);
    p.flagged = flagged_target > 0.0 && std::abs(target - flagged_target) < 1e-12;
    if (undistorted) {
      p.far = target;
      p.det_rate = detection_rate_no_privacy(fault_residual_mean, Sigma_r, p.alpha);
      p.std_error = 0.0;
    } else {
      p.far = false_alarm_rate_analytic(Sigma_tilde, Sigma_r, p.alpha);
      const McProbability rate = detection_rate_with_privacy(
          fault_residual_mean, Sigma_tilde, Sigma_r, p.alpha, samples, seed + sub);
      p.det_rate = rate.value;
      p.std_error = rate.std_error;
    }
    curve.points.push_back(p);
    ++sub;
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const RocPoint& a, const RocPoint& b) { return a.far < b.far; });
  return curve;
}

/// Area under the ROC curve by trapezoid rule with (0,0) and (1,1) appended,
/// together with the propagated Monte Carlo standard error.
struct AucEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline AucEstimate roc_auc(const RocCurve& curve) {
  std::vector<double> x{0.0}, y{0.0}, se{0.0};
  for (const auto& p : curve.points) {
    x.push_back(p.far);
    y.push_back(p.det_rate);
    se.push_back(p.std_error);
  }
  x.push_back(1.0);
  y.push_back(1.0);
  se.push_back(0.0);

  AucEstimate auc;
  double var = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    auc.value += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double w = 0.5 * (x[i + 1] - x[i - 1]);
    var += (w * se[i]) * (w * se[i]);
  }
  auc.std_error = std::sqrt(var);
  return auc;
}

}  // namespace privmon
