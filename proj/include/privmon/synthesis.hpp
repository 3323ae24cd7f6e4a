#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "privmon/common.hpp"
#include "privmon/detector.hpp"
#include "privmon/estimation.hpp"
#include "privmon/lifted.hpp"
#include "privmon/model.hpp"

namespace privmon {

enum class MechanismStructure { full, block_diagonal };
enum class SolveStatus { converged, not_converged };

/// Detection-constraint scaling: beta* = alpha / (2 P^{-1}(ny/2, 1-A*-eps)).
/// Returns +infinity when target_far + epsilon >= 1 (constraint dropped).
inline double beta_star(double alpha, double target_far, double epsilon, int n_y) {
  if (alpha <= 0.0) throw DomainError("beta_star: alpha must be positive");
  if (!(target_far > 0.0 && target_far < 1.0))
    throw DomainError("beta_star: target_far must lie in (0, 1)");
  if (epsilon < 0.0) throw DomainError("beta_star: epsilon must be nonnegative");
  if (target_far + epsilon >= 1.0) return std::numeric_limits<double>::infinity();
  return alpha / (2.0 * inv_reg_lower_gamma(0.5 * n_y, 1.0 - target_far - epsilon));
}

/// Assembled instance of the mechanism-synthesis convex program:
///   minimize  -logdet Pi_K - logdet Sigma_j_K
///   s.t.      [[Sigma_s - Pi, Sigma_sy], [Sigma_sy', Sigma_y0 + Sigma_v]] >= 0,
///             Pi > 0,  sigma_min I <= Sigma_v, Sigma_j <= cap I,
///             Sigma_r + Sigma_v_k + CL Sigma_v_k CL' + CB Sigma_j_k CB'
///                 <= beta* Sigma_r - margin I     for each step k.
struct SynthesisProblem {
  SystemModel model;
  KalmanDesign design;
  LiftedSystem lifted;
  int K = 0;
  double target_far = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double beta = 0.0;  // beta*, +inf when unconstrained
  MechanismStructure structure = MechanismStructure::full;
  double margin = 0.0;

  // Precomputed pieces, constant in the design variables.
  Matrix Sigma_s, Sigma_sy, Sigma_y0;  // Sigma_y = Sigma_y0 + Sigma_v_K
  Matrix Sigma_r, CL, CB, step_rhs;    // step_rhs = (beta*-1) Sigma_r - margin I
  int j_blocks = 0;                    // K-1 blocks; a single stationary block when K = 1

  bool constrained() const { return std::isfinite(beta); }
};

inline SynthesisProblem assemble(const SystemModel& model, const KalmanDesign& design, int K,
                                 double target_far, double epsilon,
                                 MechanismStructure structure = MechanismStructure::full,
                                 double margin = -1.0) {
  SynthesisProblem p;
  p.model = model;
  p.design = design;
  p.lifted = build_lifted(model, K);
  p.K = K;
  p.target_far = target_far;
  p.epsilon = epsilon;
  p.alpha = threshold_alpha(target_far, static_cast<int>(model.ny()));
  p.beta = beta_star(p.alpha, target_far, epsilon, static_cast<int>(model.ny()));
  p.structure = structure;
  p.Sigma_r = design.Sigma_r;
  p.margin = margin >= 0.0 ? margin : 1e-8 * max_eigenvalue(p.Sigma_r);
  p.CL = model.C * design.L;
  p.CB = model.C * model.B;
  p.j_blocks = K > 1 ? K - 1 : 1;

  const Index ny = model.ny(), ns = model.ns();
  Matrix Sigma_w_stack = Matrix::Zero(K * ny, K * ny);
  for (int k = 0; k < K; ++k) Sigma_w_stack.block(k * ny, k * ny, ny, ny) = model.Sigma_w;
  const Matrix QC = p.lifted.Q * p.lifted.C_tilde.transpose();
  p.Sigma_y0 = symmetrized(p.lifted.C_tilde * QC + Sigma_w_stack);
  p.Sigma_s = symmetrized(p.lifted.D_tilde * p.lifted.Q * p.lifted.D_tilde.transpose());
  p.Sigma_sy = p.lifted.D_tilde * QC;
  (void)ns;

  if (p.constrained()) {
    p.step_rhs = (p.beta - 1.0) * p.Sigma_r - p.margin * Matrix::Identity(ny, ny);
    if (min_eigenvalue(p.step_rhs) <= 0.0)
      throw InfeasibleConfig(
          "assemble: beta* leaves no room for distortion (epsilon too small for the margin)");
  }
  return p;
}

struct SolverOptions {
  double gap_tol = 1e-6;      // duality-gap surrogate target m_total / t
  double newton_tol = 1e-10;  // on half the squared Newton decrement
  int max_outer = 50;
  int max_inner = 200;
  double t0 = 1.0;
  double t_factor = 10.0;
  double armijo_c = 0.3;
  double backtrack = 0.5;
  double sigma_min = 1e-8;  // lower PSD bound on the matrix variables
  double cap = 1e4;         // upper bound cap*I (binds when beta* is infinite)
  std::int64_t verify_runs = 20000;
  bool verbose = false;
};

/// Synthesized mechanism and solve diagnostics.
struct MechanismDesign {
  Matrix Sigma_v_K, Sigma_j_K, Pi_K;
  double cost = 0.0;       // information leakage I[s;ytilde] - h[j], nats
  double objective = 0.0;  // -logdet Pi - logdet Sigma_j at the solution
  std::vector<double> constraint_margins;  // min eig of beta* Sigma_r - Sigma_tilde_k
  double lmi_margin = 0.0;                 // min eig of the Lemma-2 block LMI
  int iterations = 0;                      // accepted Newton steps
  double gap = 0.0;                        // m_total / t at exit
  SolveStatus solve_status = SolveStatus::not_converged;
  bool cap_active = false;
  std::vector<double> stage_objectives;  // objective after each outer stage
};

namespace sdetail {

struct SymIndex {
  Index n = 0;
  std::vector<std::pair<Index, Index>> entries;  // (p, q) with p >= q
};

inline SymIndex make_sym_index(Index n, Index block) {
  SymIndex s;
  s.n = n;
  for (Index p = 0; p < n; ++p)
    for (Index q = 0; q <= p; ++q)
      if (block <= 0 || p / block == q / block) s.entries.emplace_back(p, q);
  return s;
}

inline Matrix unpack(const Eigen::Ref<const Vector>& x, const SymIndex& s) {
  Matrix M = Matrix::Zero(s.n, s.n);
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const auto [p, q] = s.entries[i];
    M(p, q) = x[static_cast<Index>(i)];
    M(q, p) = x[static_cast<Index>(i)];
  }
  return M;
}

inline Vector pack(const Matrix& M, const SymIndex& s) {
  Vector x(static_cast<Index>(s.entries.size()));
  for (std::size_t i = 0; i < s.entries.size(); ++i)
    x[static_cast<Index>(i)] = M(s.entries[i].first, s.entries[i].second);
  return x;
}

// One symmetrized-unit parameter of a -logdet term: the variable entry at
// global index `gidx` enters the constraint matrix at (p, q) with `sign`.
struct UnitParam {
  Index p, q;
  double sign;
  int gidx;
};

// grad_i = -w * sign_i * tr(W U_i), H_ij = w si sj tr(W U_i W U_j) with the
// closed forms for symmetrized units.
inline void accumulate_unit_logdet(const Matrix& W, const std::vector<UnitParam>& params,
                                   double w, Vector& g, Matrix& H) {
  const std::size_t m = params.size();
  for (std::size_t i = 0; i < m; ++i) {
    const auto& a = params[i];
    g[a.gidx] += -w * a.sign * (a.p == a.q ? W(a.p, a.p) : 2.0 * W(a.p, a.q));
    for (std::size_t j = 0; j <= i; ++j) {
      const auto& b = params[j];
      double val;
      if (a.p == a.q && b.p == b.q)
        val = W(a.p, b.p) * W(a.p, b.p);
      else if (a.p == a.q)
        val = 2.0 * W(a.p, b.p) * W(a.p, b.q);
      else if (b.p == b.q)
        val = 2.0 * W(b.p, a.p) * W(b.p, a.q);
      else
        val = 2.0 * (W(a.p, b.p) * W(a.q, b.q) + W(a.p, b.q) * W(a.q, b.p));
      val *= w * a.sign * b.sign;
      H(a.gidx, b.gidx) += val;
      if (a.gidx != b.gidx) H(b.gidx, a.gidx) += val;
    }
  }
}

}  // namespace sdetail

/// Internal state of the barrier solver; exposed so tests can assert the
/// feasible-start invariant and descent properties.
class BarrierSolver {
 public:
  BarrierSolver(const SynthesisProblem& p, const SolverOptions& opts)
      : p_(p), opts_(opts) {
    const Index ny = p.model.ny(), nu = p.model.nu(), ns = p.model.ns();
    nv_ = p.K * ny;
    nj_ = p.j_blocks * nu;
    npi_ = p.K * ns;
    const bool block = p.structure == MechanismStructure::block_diagonal;
    iv_ = sdetail::make_sym_index(nv_, block ? ny : 0);
    ij_ = sdetail::make_sym_index(nj_, block ? nu : 0);
    ipi_ = sdetail::make_sym_index(npi_, 0);
    mv_ = static_cast<int>(iv_.entries.size());
    mj_ = static_cast<int>(ij_.entries.size());
    mpi_ = static_cast<int>(ipi_.entries.size());
    m_ = mv_ + mj_ + mpi_;
    n_lmi_ = npi_ + nv_;
    m_total_ = n_lmi_ + npi_ + 2 * nv_ + 2 * nj_ + (p.constrained() ? p.K * ny : 0);
    build_step_params();
  }

  int total_barrier_dimension() const { return static_cast<int>(m_total_); }

  struct Point {
    Matrix Sigma_v, Sigma_j, Pi;
  };

  Point unpack(const Vector& x) const {
    Point pt;
    pt.Sigma_v = sdetail::unpack(x.segment(0, mv_), iv_);
    pt.Sigma_j = sdetail::unpack(x.segment(mv_, mj_), ij_);
    pt.Pi = sdetail::unpack(x.segment(mv_ + mj_, mpi_), ipi_);
    return pt;
  }

  Vector pack(const Point& pt) const {
    Vector x(m_);
    x.segment(0, mv_) = sdetail::pack(pt.Sigma_v, iv_);
    x.segment(mv_, mj_) = sdetail::pack(pt.Sigma_j, ij_);
    x.segment(mv_ + mj_, mpi_) = sdetail::pack(pt.Pi, ipi_);
    return x;
  }

  /// All barrier matrices at x, in a fixed order: big LMI, Pi, lower/upper
  /// bounds, then the per-step constraint slacks.
  std::vector<Matrix> barrier_matrices(const Vector& x) const {
    const Point pt = unpack(x);
    std::vector<Matrix> mats;
    Matrix big(n_lmi_, n_lmi_);
    big.topLeftCorner(npi_, npi_) = p_.Sigma_s - pt.Pi;
    big.topRightCorner(npi_, nv_) = p_.Sigma_sy;
    big.bottomLeftCorner(nv_, npi_) = p_.Sigma_sy.transpose();
    big.bottomRightCorner(nv_, nv_) = p_.Sigma_y0 + pt.Sigma_v;
    mats.push_back(std::move(big));
    mats.push_back(pt.Pi);
    mats.push_back(pt.Sigma_v - opts_.sigma_min * Matrix::Identity(nv_, nv_));
    mats.push_back(pt.Sigma_j - opts_.sigma_min * Matrix::Identity(nj_, nj_));
    mats.push_back(opts_.cap * Matrix::Identity(nv_, nv_) - pt.Sigma_v);
    mats.push_back(opts_.cap * Matrix::Identity(nj_, nj_) - pt.Sigma_j);
    if (p_.constrained()) {
      const Index ny = p_.model.ny(), nu = p_.model.nu();
      for (int k = 0; k < p_.K; ++k) {
        const Matrix Svk = pt.Sigma_v.block(k * ny, k * ny, ny, ny);
        Matrix S = p_.step_rhs - Svk - p_.CL * Svk * p_.CL.transpose();
        if (k < p_.j_blocks) {
          const Matrix Sjk = pt.Sigma_j.block(k * nu, k * nu, nu, nu);
          S -= p_.CB * Sjk * p_.CB.transpose();
        }
        mats.push_back(symmetrized(S));
      }
    }
    return mats;
  }

  bool in_domain(const Vector& x) const {
    for (const Matrix& S : barrier_matrices(x)) {
      Eigen::LLT<Matrix> llt(S);
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  double objective(const Vector& x) const {
    const Point pt = unpack(x);
    return -logdet_pd(pt.Pi, "objective") - logdet_pd(pt.Sigma_j, "objective");
  }

  double merit(const Vector& x, double t) const {
    const std::vector<Matrix> mats = barrier_matrices(x);
    double phi = 0.0;
    for (const Matrix& S : mats) phi -= logdet_pd(S, "merit");
    return t * objective(x) + phi;
  }

  void grad_hess(const Vector& x, double t, Vector& g, Matrix& H) const {
    const Point pt = unpack(x);
    const std::vector<Matrix> mats = barrier_matrices(x);
    g = Vector::Zero(m_);
    H = Matrix::Zero(m_, m_);

    // Objective on Pi carries weight t plus the Pi > 0 barrier.
    sdetail::accumulate_unit_logdet(inverse_pd_guarded(pt.Pi, 1e300), pi_params_, t + 1.0, g, H);
    // Objective on Sigma_j (weight t).
    const Matrix Wj = inverse_pd_guarded(pt.Sigma_j, 1e300);
    sdetail::accumulate_unit_logdet(Wj, j_params_, t, g, H);
    // Big LMI: v enters the lower-right block (+), Pi the upper-left (-).
    sdetail::accumulate_unit_logdet(inverse_pd_guarded(mats[0], 1e300), lmi_params_, 1.0, g, H);
    // Bound barriers.
    sdetail::accumulate_unit_logdet(inverse_pd_guarded(mats[2], 1e300), v_params_, 1.0, g, H);
    sdetail::accumulate_unit_logdet(inverse_pd_guarded(mats[3], 1e300), j_params_, 1.0, g, H);
    sdetail::accumulate_unit_logdet(inverse_pd_guarded(mats[4], 1e300), v_params_neg_, 1.0, g, H);
    sdetail::accumulate_unit_logdet(inverse_pd_guarded(mats[5], 1e300), j_params_neg_, 1.0, g, H);
    // Per-step constraints: dense small images.
    if (p_.constrained()) {
      for (int k = 0; k < p_.K; ++k) {
        const Matrix W = inverse_pd_guarded(mats[6 + k], 1e300);
        const auto& sp = step_params_[k];
        std::vector<Matrix> WA(sp.size());
        for (std::size_t i = 0; i < sp.size(); ++i) WA[i] = W * sp[i].second;
        for (std::size_t i = 0; i < sp.size(); ++i) {
          g[sp[i].first] += -WA[i].trace();
          for (std::size_t j = 0; j <= i; ++j) {
            const double val = (WA[i].array() * WA[j].transpose().array()).sum();
            H(sp[i].first, sp[j].first) += val;
            if (sp[i].first != sp[j].first) H(sp[j].first, sp[i].first) += val;
          }
        }
      }
    }
  }

  /// Strictly feasible start: per-step slack split between Sigma_v blocks
  /// shaped like Sigma_r and a scalar multiple of I on Sigma_j, with
  /// Pi = 1/2 of the Schur complement. Shrinks until strictly inside.
  Vector initial_point() const {
    const Index ny = p_.model.ny();
    double tau, eta;
    if (p_.constrained()) {
      const Matrix root_inv = inverse_pd_guarded(symmetric_sqrt(p_.Sigma_r));
      const double g1 =
          1.0 + max_eigenvalue(root_inv * p_.CL * p_.Sigma_r * p_.CL.transpose() * root_inv);
      const double g2 = max_eigenvalue(root_inv * p_.CB * p_.CB.transpose() * root_inv);
      const double slack = (p_.beta - 1.0) - p_.margin / min_eigenvalue(p_.Sigma_r);
      if (slack <= 0.0) throw InfeasibleConfig("initial_point: no feasible slack");
      tau = 0.5 * slack / g1;
      eta = g2 > 1e-14 ? 0.25 * slack / g2 : 1.0;
    } else {
      tau = std::min(1.0, opts_.cap / 100.0);
      eta = std::min(1.0, opts_.cap / 100.0);
    }
    for (int attempt = 0; attempt < 80; ++attempt) {
      Point pt;
      if (p_.constrained()) {
        pt.Sigma_v = Matrix::Zero(nv_, nv_);
        for (int k = 0; k < p_.K; ++k)
          pt.Sigma_v.block(k * ny, k * ny, ny, ny) = tau * p_.Sigma_r;
      } else {
        pt.Sigma_v = tau * Matrix::Identity(nv_, nv_);
      }
      pt.Sigma_j = eta * Matrix::Identity(nj_, nj_);
      const Matrix Sigma_y = p_.Sigma_y0 + pt.Sigma_v;
      pt.Pi = symmetrized(
          0.5 * (p_.Sigma_s -
                 p_.Sigma_sy * solve_pd(Sigma_y, p_.Sigma_sy.transpose(), "initial_point")));
      const Vector x = pack(pt);
      if (in_domain(x)) return x;
      tau *= 0.5;
      eta *= 0.5;
    }
    throw InfeasibleConfig("initial_point: could not find a strictly feasible start");
  }

  MechanismDesign run() {
    Vector x = initial_point();
    if (!in_domain(x))
      throw InfeasibleConfig("solve: initial point violates a barrier domain");

    MechanismDesign out;
    double t = opts_.t0;
    int accepted = 0;
    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;
    Vector g;
    Matrix H;
    for (int outer = 0; outer < opts_.max_outer; ++outer) {
      for (int inner = 0; inner < opts_.max_inner; ++inner) {
        grad_hess(x, t, g, H);
        Vector dx;
        Eigen::LDLT<Matrix> ldlt(H);
        if (ldlt.info() == Eigen::Success) {
          dx = ldlt.solve(-g);
        } else {
          Matrix Hr = H + 1e-10 * H.diagonal().cwiseAbs().maxCoeff() * Matrix::Identity(m_, m_);
          dx = Hr.ldlt().solve(-g);
        }
        const double lam2 = -g.dot(dx);
        if (!(lam2 > 0.0)) break;  // non-descent direction: H numerically indefinite
        if (0.5 * lam2 < opts_.newton_tol) break;
        const double fx = merit(x, t);
        double step = 1.0;
        const double slope = g.dot(dx);
        while (true) {
          const Vector xn = x + step * dx;
          if (in_domain(xn) && merit(xn, t) <= fx + opts_.armijo_c * step * slope) {
            x = xn;
            break;
          }
          step *= opts_.backtrack;
          if (step < 1e-14)
            throw LineSearchStall("solve: backtracking line search stalled");
        }
        ++accepted;
      }
      out.stage_objectives.push_back(objective(x));
      gap = static_cast<double>(m_total_) / t;
      if (gap < opts_.gap_tol) {
        converged = true;
        break;
      }
      t *= opts_.t_factor;
      if (opts_.verbose)
        std::fprintf(stderr, "barrier stage t=%.3e obj=%.6f\n", t, out.stage_objectives.back());
    }
    if (!converged) throw NotConverged("solve: barrier method exhausted max_outer stages");

    const Point pt = unpack(x);
    out.Sigma_v_K = symmetrized(pt.Sigma_v);
    out.Sigma_j_K = symmetrized(pt.Sigma_j);
    out.Pi_K = symmetrized(pt.Pi);
    out.objective = objective(x);
    out.iterations = accepted;
    out.gap = gap;
    out.solve_status = SolveStatus::converged;
    const std::vector<Matrix> mats = barrier_matrices(x);
    out.lmi_margin = min_eigenvalue(mats[0]);
    if (p_.constrained()) {
      const Index ny = p_.model.ny();
      for (int k = 0; k < p_.K; ++k) {
        // True constraint margin (margin shift added back).
        Matrix S = mats[6 + k] + p_.margin * Matrix::Identity(ny, ny);
        out.constraint_margins.push_back(min_eigenvalue(S));
      }
    }
    out.cap_active = max_eigenvalue(pt.Sigma_v) > 0.9 * opts_.cap ||
                     max_eigenvalue(pt.Sigma_j) > 0.9 * opts_.cap;
    return out;
  }

 private:
  void build_step_params() {
    const Index ny = p_.model.ny(), nu = p_.model.nu();
    for (int i = 0; i < mv_; ++i) {
      const auto [p, q] = iv_.entries[i];
      v_params_.push_back({p, q, 1.0, i});
      v_params_neg_.push_back({p, q, -1.0, i});
      lmi_params_.push_back({npi_ + p, npi_ + q, 1.0, i});
    }
    for (int i = 0; i < mj_; ++i) {
      const auto [p, q] = ij_.entries[i];
      j_params_.push_back({p, q, 1.0, i + mv_});
      j_params_neg_.push_back({p, q, -1.0, i + mv_});
    }
    for (int i = 0; i < mpi_; ++i) {
      const auto [p, q] = ipi_.entries[i];
      pi_params_.push_back({p, q, 1.0, i + mv_ + mj_});
      lmi_params_.push_back({p, q, -1.0, i + mv_ + mj_});
    }
    if (!p_.constrained()) return;
    step_params_.resize(p_.K);
    for (int k = 0; k < p_.K; ++k) {
      for (int i = 0; i < mv_; ++i) {
        const auto [p, q] = iv_.entries[i];
        if (p / ny != k || q / ny != k) continue;
        Matrix U = Matrix::Zero(ny, ny);
        U(p % ny, q % ny) = 1.0;
        U(q % ny, p % ny) = 1.0;
        if (p == q) U(p % ny, p % ny) = 1.0;
        step_params_[k].emplace_back(i, Matrix(-(U + p_.CL * U * p_.CL.transpose())));
      }
      if (k < p_.j_blocks) {
        for (int i = 0; i < mj_; ++i) {
          const auto [p, q] = ij_.entries[i];
          if (p / nu != k || q / nu != k) continue;
          Matrix U = Matrix::Zero(nu, nu);
          U(p % nu, q % nu) = 1.0;
          U(q % nu, p % nu) = 1.0;
          if (p == q) U(p % nu, p % nu) = 1.0;
          step_params_[k].emplace_back(i + mv_, Matrix(-(p_.CB * U * p_.CB.transpose())));
        }
      }
    }
  }

  const SynthesisProblem& p_;
  SolverOptions opts_;
  Index nv_ = 0, nj_ = 0, npi_ = 0, n_lmi_ = 0, m_total_ = 0;
  sdetail::SymIndex iv_, ij_, ipi_;
  int mv_ = 0, mj_ = 0, mpi_ = 0, m_ = 0;
  std::vector<sdetail::UnitParam> v_params_, v_params_neg_, j_params_, j_params_neg_,
      pi_params_, lmi_params_;
  std::vector<std::vector<std::pair<int, Matrix>>> step_params_;
};

/// Information leakage I[s^K; ytilde^K] - h[j^K] of a candidate mechanism,
/// computed from the lifted covariances (no Pi involved).
inline double mechanism_cost(const SynthesisProblem& p, const Matrix& Sigma_v_K,
                             const Matrix& Sigma_j_K) {
  const Matrix Sigma_y = p.Sigma_y0 + Sigma_v_K;
  const Matrix schur = symmetrized(
      p.Sigma_s - p.Sigma_sy * solve_pd(Sigma_y, p.Sigma_sy.transpose(), "mechanism_cost"));
  const double mi = 0.5 * logdet_pd(p.Sigma_s, "mechanism_cost") -
                    0.5 * logdet_pd(schur, "mechanism_cost");
  return mi - gaussian_entropy(Sigma_j_K);
}

inline MechanismDesign solve(const SynthesisProblem& problem, const SolverOptions& opts = {}) {
  BarrierSolver solver(problem, opts);
  MechanismDesign design = solver.run();
  design.cost = mechanism_cost(problem, design.Sigma_v_K, design.Sigma_j_K);
  return design;
}

/// Post-solve audit: recomputes every constraint margin and the cost from
/// scratch, and Monte Carlo estimates the closed-loop distorted false alarm
/// rate against the bound A* + epsilon. The FAR does not depend on the known
/// input (the filter cancels it), so verification runs with zero inputs.
struct VerificationReport {
  std::vector<double> constraint_margins;
  double lmi_margin = 0.0;
  double cost_recomputed = 0.0;
  double cost_reported = 0.0;
  double far_empirical = 0.0;
  double far_std_error = 0.0;
  double far_bound = 0.0;
  bool margins_ok = false;
  bool cost_ok = false;
  bool far_ok = false;
  bool all_ok() const { return margins_ok && cost_ok && far_ok; }
};

inline VerificationReport verify(const MechanismDesign& design, const SynthesisProblem& p,
                                 std::int64_t mc_runs = 20000, std::uint64_t seed = 0x5eed) {
  VerificationReport rep;
  const Index ny = p.model.ny(), nu = p.model.nu();

  if (p.constrained()) {
    for (int k = 0; k < p.K; ++k) {
      const Matrix Svk = design.Sigma_v_K.block(k * ny, k * ny, ny, ny);
      const Matrix Sjk = (k < p.j_blocks && p.K > 1)
                             ? design.Sigma_j_K.block(k * nu, k * nu, nu, nu)
                             : (p.K == 1 ? design.Sigma_j_K : Matrix::Zero(nu, nu));
      const Matrix Sigma_tilde = distorted_residual_cov(p.design, p.model, Svk, Sjk);
      rep.constraint_margins.push_back(min_eigenvalue(p.beta * p.Sigma_r - Sigma_tilde));
    }
  }
  {
    Matrix big(design.Pi_K.rows() + design.Sigma_v_K.rows(),
               design.Pi_K.rows() + design.Sigma_v_K.rows());
    big.topLeftCorner(design.Pi_K.rows(), design.Pi_K.rows()) = p.Sigma_s - design.Pi_K;
    big.topRightCorner(design.Pi_K.rows(), design.Sigma_v_K.rows()) = p.Sigma_sy;
    big.bottomLeftCorner(design.Sigma_v_K.rows(), design.Pi_K.rows()) = p.Sigma_sy.transpose();
    big.bottomRightCorner(design.Sigma_v_K.rows(), design.Sigma_v_K.rows()) =
        p.Sigma_y0 + design.Sigma_v_K;
    rep.lmi_margin = min_eigenvalue(big);
  }
  rep.margins_ok = rep.lmi_margin >= 0.0;
  for (double m : rep.constraint_margins) rep.margins_ok = rep.margins_ok && m >= 0.0;

  {
    // Recompute the leakage through the lifted_info path.
    std::vector<Vector> zero_inputs(p.K - 1, Vector::Zero(nu));
    const JointLaw law = joint_law(p.lifted, p.model, zero_inputs, design.Sigma_v_K);
    rep.cost_recomputed = mutual_information(law) - gaussian_entropy(design.Sigma_j_K);
    rep.cost_reported = design.cost;
    rep.cost_ok = std::abs(rep.cost_recomputed - rep.cost_reported) <=
                  1e-6 * std::max(1.0, std::abs(rep.cost_reported));
  }

  {
    rep.far_bound = std::min(1.0, p.target_far + p.epsilon);
    const DetectorConfig cfg{p.target_far, p.epsilon, p.alpha, static_cast<int>(ny)};
    std::vector<Vector> zero_inputs(p.K - 1, Vector::Zero(nu));
    const Matrix Sigma_j_mech =
        p.K > 1 ? design.Sigma_j_K : Matrix::Zero(0, 0);  // K=1 has no applied input noise
    std::int64_t alarms = 0, trials = 0;
    const int k_lo = p.K / 2;  // pool the settled half of the horizon
    for (std::int64_t run = 0; run < mc_runs; ++run) {
      const Trajectory traj = simulate(p.model, zero_inputs, seed * 2654435761ULL + run);
      const DistortedTrajectory dist =
          apply_mechanism(traj, design.Sigma_v_K, Sigma_j_mech, p.model, seed ^ (run + 1));
      const ResidualSequence res =
          run_remote_filter(p.model, p.design, dist.y_tilde, dist.u_tilde);
      for (int k = k_lo; k < p.K; ++k) {
        alarms += res.z[k] > cfg.alpha ? 1 : 0;
        ++trials;
      }
    }
    rep.far_empirical = static_cast<double>(alarms) / static_cast<double>(trials);
    // Conservative standard error: per-run step counts, ignoring within-run correlation.
    rep.far_std_error = std::sqrt(rep.far_empirical * (1.0 - rep.far_empirical) /
                                  static_cast<double>(mc_runs));
    rep.far_ok = rep.far_empirical <= rep.far_bound + 3.0 * rep.far_std_error + 1e-3;
  }
  return rep;
}

}  // namespace privmon
