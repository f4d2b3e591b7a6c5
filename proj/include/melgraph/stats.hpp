#pragma once

namespace melgraph {

// Regularized lower incomplete gamma P(a, x), series/continued-fraction
// evaluation to 1e-12 relative tolerance.
double regularized_gamma_p(double a, double x);

// Regularized incomplete beta I_x(a, b), continued fraction (Lentz).
double regularized_beta(double a, double b, double x);

// Chi-square CDF with k degrees of freedom.
double chi2_cdf(double x, double k);

// Chi-square quantile (inverse CDF) by bisection.
double chi2_quantile(double p, double k);

// Noncentral chi-square CDF: Poisson-weighted sum of central chi-square
// terms, truncated once 1 - 1e-12 of the Poisson mass is covered.
double noncentral_chi2_cdf(double x, double k, double lambda);

// Noncentral chi-square quantile by bisection on the CDF.
double noncentral_chi2_quantile(double p, double k, double lambda);

// Student-t CDF with nu degrees of freedom.
double student_t_cdf(double t, double nu);

}  // namespace melgraph
