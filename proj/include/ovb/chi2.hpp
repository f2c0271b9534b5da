#pragma once

namespace ovb {

/// Regularized lower incomplete gamma P(a, x), dependency-free: power series
/// for x < a+1, Lentz continued fraction for the upper tail otherwise.
/// Accurate to ~1e-10 for the degrees of freedom used here (a <= 50).
double regularized_gamma_p(double a, double x);

/// P(chisq_p <= x).
double chi2_cdf(int p, double x);

/// The (1-alpha) quantile of chi-square with p degrees of freedom, found by
/// bisection on the CDF to absolute tolerance 1e-9. alpha must lie in (0,1];
/// alpha = 1 returns 0.
double chi2_quantile(int p, double alpha);

}  // namespace ovb
