#pragma once

#include <optional>
#include <string>
#include <vector>

#include "privmon/common.hpp"
#include "privmon/rng.hpp"

namespace privmon {

/// Discrete-time linear plant
///   x_{k+1} = A x_k + B u_k + t_k + G delta_k
///   y_k     = C x_k + w_k + H delta_k
///   s_k     = D x_k                     (private performance output)
/// with t ~ N(0, Sigma_t), w ~ N(0, Sigma_w), x_1 ~ N(mu_x1, Sigma_x1).
struct SystemModel {
  Matrix A, B, C, D, G, H;
  Matrix Sigma_t, Sigma_w;
  Vector mu_x1;
  Matrix Sigma_x1;

  Index nx() const { return A.rows(); }
  Index nu() const { return B.cols(); }
  Index ny() const { return C.rows(); }
  Index ns() const { return D.rows(); }
  Index ndelta() const { return G.cols(); }
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::string note;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

namespace detail {

inline void require_model_dims(const SystemModel& m) {
  const Index nx = m.A.rows();
  if (m.A.cols() != nx) throw DimensionMismatch("A must be square");
  if (m.B.rows() != nx) throw DimensionMismatch("B row count must match A");
  if (m.C.cols() != nx) throw DimensionMismatch("C column count must match A");
  if (m.D.cols() != nx) throw DimensionMismatch("D column count must match A");
  if (m.G.rows() != nx) throw DimensionMismatch("G row count must match A");
  if (m.H.rows() != m.C.rows()) throw DimensionMismatch("H row count must match C");
  if (m.H.cols() != m.G.cols()) throw DimensionMismatch("G and H must agree on fault dimension");
  if (m.Sigma_t.rows() != nx || m.Sigma_t.cols() != nx)
    throw DimensionMismatch("Sigma_t must be nx by nx");
  if (m.Sigma_w.rows() != m.C.rows() || m.Sigma_w.cols() != m.C.rows())
    throw DimensionMismatch("Sigma_w must be ny by ny");
  if (m.mu_x1.size() != nx) throw DimensionMismatch("mu_x1 must have nx entries");
  if (m.Sigma_x1.rows() != nx || m.Sigma_x1.cols() != nx)
    throw DimensionMismatch("Sigma_x1 must be nx by nx");
}

}  // namespace detail

/// Checks the standing assumptions: PD noise covariances, full-row-rank D,
/// and detectability of (A, C). Dimension consistency is enforced first.
inline ValidationReport validate_model(const SystemModel& m) {
  detail::require_model_dims(m);
  ValidationReport report;

  auto pd_check = [&](const Matrix& s, const std::string& name) {
    const double ev = min_eigenvalue(s);
    report.checks.push_back({name + " positive definite", ev > kTolPd, ev, ""});
  };
  pd_check(m.Sigma_t, "Sigma_t");
  pd_check(m.Sigma_w, "Sigma_w");
  pd_check(m.Sigma_x1, "Sigma_x1");

  {
    Eigen::JacobiSVD<Matrix> svd(m.D);
    const double smax = svd.singularValues().size() ? svd.singularValues().maxCoeff() : 0.0;
    const double smin = svd.singularValues().size()
                            ? svd.singularValues()[m.D.rows() - 1]
                            : 0.0;
    const bool full_rank = m.D.rows() <= m.D.cols() && smin > kTolRank * std::max(smax, 1.0);
    report.checks.push_back({"D full row rank", full_rank, smin, ""});
  }

  {
    // (A, C) detectable: every eigenvalue with |lambda| >= 1 must satisfy
    // rank [A - lambda I; C] = nx.
    const Index nx = m.nx();
    Eigen::EigenSolver<Matrix> es(m.A);
    double worst = std::numeric_limits<double>::infinity();
    bool detectable = true;
    bool any_unstable = false;
    for (Index i = 0; i < nx; ++i) {
      const std::complex<double> lam = es.eigenvalues()[i];
      if (std::abs(lam) < 1.0) continue;
      any_unstable = true;
      Eigen::MatrixXcd stacked(nx + m.ny(), nx);
      stacked.topRows(nx) = m.A.cast<std::complex<double>>() -
                            lam * Eigen::MatrixXcd::Identity(nx, nx);
      stacked.bottomRows(m.ny()) = m.C.cast<std::complex<double>>();
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
      const double smax = svd.singularValues().maxCoeff();
      const double s_nx = svd.singularValues()[nx - 1];
      worst = std::min(worst, s_nx);
      if (s_nx <= kTolRank * std::max(smax, 1.0)) detectable = false;
    }
    report.checks.push_back({"(A, C) detectable", detectable,
                             any_unstable ? worst : 1.0,
                             any_unstable ? "" : "all eigenvalues inside the unit circle"});
  }
  return report;
}

/// One realization of the plant over horizon K. Inputs cover steps 1..K-1,
/// faults (when present) cover 1..K, and s_k = D x_k throughout.
struct Trajectory {
  int K = 0;
  std::vector<Vector> x, y, s;
  std::vector<Vector> u;      // length K-1
  std::vector<Vector> delta;  // length K, or empty when fault-free
};

inline Trajectory simulate(const SystemModel& m, const std::vector<Vector>& inputs,
                           const std::vector<Vector>& faults, std::uint64_t seed) {
  detail::require_model_dims(m);
  const int K = static_cast<int>(inputs.size()) + 1;
  if (!faults.empty() && static_cast<int>(faults.size()) != K)
    throw HorizonMismatch("simulate: faults must have length K");
  for (const auto& u : inputs)
    if (u.size() != m.nu()) throw HorizonMismatch("simulate: input dimension mismatch");
  for (const auto& d : faults)
    if (d.size() != m.ndelta()) throw HorizonMismatch("simulate: fault dimension mismatch");

  RngStream sx(seed, "x1"), st(seed, "t"), sw(seed, "w");
  GaussianSampler x1_draw(m.mu_x1, m.Sigma_x1);
  GaussianSampler t_draw(m.Sigma_t), w_draw(m.Sigma_w);

  Trajectory traj;
  traj.K = K;
  traj.u = inputs;
  traj.delta = faults;
  traj.x.reserve(K);
  traj.y.reserve(K);
  traj.s.reserve(K);

  Vector x = x1_draw.draw(sx);
  for (int k = 0; k < K; ++k) {
    Vector y = m.C * x + w_draw.draw(sw);
    if (!faults.empty()) y += m.H * faults[k];
    traj.x.push_back(x);
    traj.y.push_back(y);
    traj.s.push_back(m.D * x);
    if (k + 1 < K) {
      Vector xn = m.A * x + m.B * inputs[k] + t_draw.draw(st);
      if (!faults.empty()) xn += m.G * faults[k];
      x = xn;
    }
  }
  return traj;
}

inline Trajectory simulate(const SystemModel& m, const std::vector<Vector>& inputs,
                           std::uint64_t seed) {
  return simulate(m, inputs, {}, seed);
}

/// Trajectory with the privacy mechanism applied: ytilde = y + v and
/// utilde = u + j, where (v^K, j^{K-1}) are joint Gaussian draws. The plant
/// is physically driven by utilde, so `base` holds the distorted-plant
/// states; they are obtained from the original run by superposing the
/// j-response (process and measurement noise cancel in the difference).
struct DistortedTrajectory {
  Trajectory base;
  std::vector<Vector> v;        // length K
  std::vector<Vector> j;        // length K-1
  std::vector<Vector> y_tilde;  // length K
  std::vector<Vector> u_tilde;  // length K-1
};

inline DistortedTrajectory apply_mechanism(const Trajectory& traj, const Matrix& Sigma_v_K,
                                           const Matrix& Sigma_j_K, const SystemModel& m,
                                           std::uint64_t seed) {
  const int K = traj.K;
  const Index ny = m.ny(), nu = m.nu();
  if (Sigma_v_K.rows() != K * ny)
    throw DimensionMismatch("apply_mechanism: Sigma_v_K must be K*ny square");
  if (Sigma_j_K.rows() != (K - 1) * nu)
    throw DimensionMismatch("apply_mechanism: Sigma_j_K must be (K-1)*nu square");
  require_psd(Sigma_v_K, "apply_mechanism: Sigma_v_K");
  require_psd(Sigma_j_K, "apply_mechanism: Sigma_j_K");

  RngStream sv(seed, "v"), sj(seed, "j");
  Vector v_all = GaussianSampler(Sigma_v_K).draw(sv);
  Vector j_all = (K > 1) ? GaussianSampler(Sigma_j_K).draw(sj) : Vector(0);

  DistortedTrajectory out;
  out.base = traj;
  out.v.reserve(K);
  out.y_tilde.reserve(K);
  for (int k = 0; k < K - 1; ++k) {
    out.j.push_back(j_all.segment(k * nu, nu));
    out.u_tilde.push_back(traj.u[k] + out.j.back());
  }
  // j-response of the plant state, x_tilde = x + d with d_{k+1} = A d_k + B j_k.
  Vector d = Vector::Zero(m.nx());
  for (int k = 0; k < K; ++k) {
    out.base.x[k] = traj.x[k] + d;
    out.base.y[k] = traj.y[k] + m.C * d;
    out.base.s[k] = traj.s[k] + m.D * d;
    out.v.push_back(v_all.segment(k * ny, ny));
    out.y_tilde.push_back(out.base.y[k] + out.v.back());
    if (k + 1 < K) d = m.A * d + m.B * out.j[k];
  }
  return out;
}

}  // namespace privmon
