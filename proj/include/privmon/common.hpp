#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace privmon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Numerical tolerances used across the library.
inline constexpr double kTolPd = 1e-10;    // eigenvalue floor for definiteness checks
inline constexpr double kTolRank = 1e-8;   // singular value floor, relative to the largest
inline constexpr double kCondLimit = 1e12; // condition number guard for covariance solves

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct HorizonMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotPsd : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotPd : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularCovariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LineSearchStall : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllZero : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Throws NotPsd when `s` is not square or has an eigenvalue below -kTolPd.
inline void require_psd(const Matrix& s, const std::string& what) {
  if (s.rows() != s.cols())
    throw DimensionMismatch(what + ": covariance must be square");
  if (s.size() > 0 && min_eigenvalue(s) < -kTolPd)
    throw NotPsd(what + ": matrix is not positive semidefinite");
}

inline void require_pd(const Matrix& s, const std::string& what) {
  if (s.rows() != s.cols())
    throw DimensionMismatch(what + ": matrix must be square");
  if (s.size() == 0 || min_eigenvalue(s) <= kTolPd)
    throw NotPd(what + ": matrix is not positive definite");
}

/// Symmetric (eigendecomposition) square root. Accepts PSD-but-singular
/// inputs; eigenvalues in [-kTolPd, 0) are clamped to zero.
inline Matrix symmetric_sqrt(const Matrix& s) {
  if (s.size() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s));
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < -kTolPd)
    throw NotPsd("symmetric_sqrt: matrix is not positive semidefinite");
  Vector root = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// log det of a positive definite matrix via Cholesky.
inline double logdet_pd(const Matrix& s, const char* what = "logdet_pd") {
  if (s.size() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(symmetrized(s));
  if (llt.info() != Eigen::Success)
    throw NotPd(std::string(what) + ": Cholesky factorization failed");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline Matrix solve_pd(const Matrix& s, const Matrix& rhs, const char* what = "solve_pd") {
  Eigen::LLT<Matrix> llt(symmetrized(s));
  if (llt.info() != Eigen::Success)
    throw NotPd(std::string(what) + ": Cholesky factorization failed");
  return llt.solve(rhs);
}

/// Inverse of a PD matrix with a condition number guard (throws
/// SingularCovariance beyond kCondLimit).
inline Matrix inverse_pd_guarded(const Matrix& s, double cond_limit = kCondLimit,
                                 const char* what = "inverse_pd_guarded") {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s));
  const Vector& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0 || ev.maxCoeff() / ev.minCoeff() > cond_limit)
    throw SingularCovariance(std::string(what) + ": matrix is singular or ill-conditioned");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace privmon
