#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "privmon/common.hpp"
#include "privmon/rng.hpp"

namespace privmon {

namespace detail {

inline constexpr int kGammaMaxTerms = 300;

// Lower incomplete gamma by power series, valid for x < a + 1.
inline double gamma_series(double a, double x) {
  const double gln = std::lgamma(a);
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < kGammaMaxTerms; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * std::numeric_limits<double>::epsilon()) break;
  }
  return sum * std::exp(-x + a * std::log(x) - gln);
}

// Upper incomplete gamma by Lentz continued fraction, valid for x >= a + 1.
inline double gamma_cont_fraction(double a, double x) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double fpmin = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  const double gln = std::lgamma(a);
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kGammaMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= eps) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma function P(a, x).
inline double reg_lower_gamma(double a, double x) {
  if (a <= 0.0) throw DomainError("reg_lower_gamma: a must be positive");
  if (x < 0.0) throw DomainError("reg_lower_gamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_series(a, x);
  return 1.0 - detail::gamma_cont_fraction(a, x);
}

/// Inverse of P(a, .) in its second argument: returns x with P(a, x) = p.
/// Bracketed Newton with bisection fallback; p = 0 maps to 0.
inline double inv_reg_lower_gamma(double a, double p) {
  if (a <= 0.0) throw DomainError("inv_reg_lower_gamma: a must be positive");
  if (p < 0.0 || p >= 1.0) throw DomainError("inv_reg_lower_gamma: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;

  double lo = 0.0;
  double hi = a + 1.0;
  while (reg_lower_gamma(a, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NoConvergence("inv_reg_lower_gamma: bracket expansion failed");
  }
  const double gln = std::lgamma(a);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = reg_lower_gamma(a, x) - p;
    if (std::abs(f) <= 1e-13) return x;
    if (f > 0.0) hi = x; else lo = x;
    const double dpdx = std::exp((a - 1.0) * std::log(x) - x - gln);
    double xn = (dpdx > 0.0) ? x - f / dpdx : 0.0;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);  // bisection fallback
    if (xn == x) return x;
    x = xn;
  }
  return x;
}

inline double chi2_cdf(int dof, double x) {
  if (dof <= 0) throw DomainError("chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return reg_lower_gamma(0.5 * dof, 0.5 * x);
}

/// CDF of the noncentral chi-squared distribution as a Poisson-weighted
/// series of central chi-squared CDFs; truncated once the remaining Poisson
/// tail mass drops below 1e-12.
inline double noncentral_chi2_cdf(int dof, double lambda, double x) {
  if (dof <= 0) throw DomainError("noncentral_chi2_cdf: dof must be positive");
  if (lambda < 0.0) throw DomainError("noncentral_chi2_cdf: lambda must be nonnegative");
  if (x <= 0.0) return 0.0;
  if (lambda == 0.0) return chi2_cdf(dof, x);

  const double half_lambda = 0.5 * lambda;
  const double log_hl = std::log(half_lambda);
  double cdf = 0.0;
  double weight_sum = 0.0;
  for (int j = 0; j < 100000; ++j) {
    const double w = std::exp(-half_lambda + j * log_hl - std::lgamma(j + 1.0));
    cdf += w * reg_lower_gamma(0.5 * dof + j, 0.5 * x);
    weight_sum += w;
    if (1.0 - weight_sum < 1e-12 && j > half_lambda) break;
  }
  return std::min(cdf, 1.0);
}

/// Welch-Satterthwaite gamma fit of sum_i lambda_i * chi2_1.
struct GammaFit {
  double shape = 0.0;  // K_z
  double scale = 0.0;  // theta_z
};

inline GammaFit ws_gamma_fit(const std::vector<double>& eigenvalues) {
  double s1 = 0.0, s2 = 0.0;
  for (double lam : eigenvalues) {
    if (lam < 0.0) throw DomainError("ws_gamma_fit: eigenvalues must be nonnegative");
    s1 += lam;
    s2 += lam * lam;
  }
  if (s2 == 0.0) throw AllZero("ws_gamma_fit: all eigenvalues are zero");
  return GammaFit{s1 * s1 / (2.0 * s2), 2.0 * s2 / s1};
}

inline double gamma_cdf(const GammaFit& fit, double x) {
  if (x <= 0.0) return 0.0;
  return reg_lower_gamma(fit.shape, x / fit.scale);
}

/// Monte Carlo probability estimate with its binomial standard error.
struct McProbability {
  double value = 0.0;
  double std_error = 0.0;
};

/// CDF of the generalized chi-squared variable (m + shift)' Sigma' (m + shift)
/// at x, with m standard normal, estimated by Monte Carlo.
inline McProbability generalized_chi2_cdf_mc(const Matrix& sigma_prime, const Vector& shift,
                                             double x, std::int64_t samples, std::uint64_t seed) {
  if (sigma_prime.rows() != sigma_prime.cols() || sigma_prime.rows() != shift.size())
    throw DimensionMismatch("generalized_chi2_cdf_mc: inconsistent dimensions");
  if (samples < 10000)
    throw DomainError("generalized_chi2_cdf_mc: need at least 1e4 samples");
  const Matrix sym = symmetrized(sigma_prime);
  RngStream stream(seed, "gchi2");
  const Index n = shift.size();
  std::int64_t hits = 0;
  Vector m(n);
  for (std::int64_t i = 0; i < samples; ++i) {
    for (Index k = 0; k < n; ++k) m[k] = stream.normal() + shift[k];
    if (m.dot(sym * m) <= x) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(samples));
  return McProbability{p, se};
}

}  // namespace privmon
