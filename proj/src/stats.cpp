#include "melgraph/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace melgraph {

namespace {

constexpr double kTol = 1e-12;
constexpr int kMaxIter = 10000;

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kTol) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / kTol;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kTol) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_cf(double a, double b, double x) {
  const double tiny = std::numeric_limits<double>::min() / kTol;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kTol) break;
  }
  return h;
}

// Generic increasing-CDF inversion on [0, inf).
template <typename Cdf>
double invert_cdf(double p, const Cdf& cdf, double hint) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) throw std::invalid_argument("quantile: p must be < 1");
  double lo = 0.0;
  double hi = hint > 0 ? hint : 1.0;
  while (cdf(hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("quantile: bracket failed");
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("regularized_gamma_p: a must be > 0");
  if (x < 0.0) throw std::invalid_argument("regularized_gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double regularized_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double chi2_cdf(double x, double k) {
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * k, 0.5 * x);
}

double chi2_quantile(double p, double k) {
  return invert_cdf(p, [k](double x) { return chi2_cdf(x, k); }, k);
}

double noncentral_chi2_cdf(double x, double k, double lambda) {
  if (x <= 0.0) return 0.0;
  if (lambda <= 0.0) return chi2_cdf(x, k);
  double half = 0.5 * lambda;
  // Poisson weights around the mode, summed until 1 - 1e-12 mass is covered.
  double w = std::exp(-half);
  double mass = w;
  double sum = w * chi2_cdf(x, k);
  for (int j = 1; j < kMaxIter; ++j) {
    w *= half / j;
    mass += w;
    sum += w * chi2_cdf(x, k + 2.0 * j);
    if (1.0 - mass < kTol && j > half) break;
  }
  return sum;
}

double noncentral_chi2_quantile(double p, double k, double lambda) {
  return invert_cdf(
      p, [k, lambda](double x) { return noncentral_chi2_cdf(x, k, lambda); },
      k + lambda);
}

double student_t_cdf(double t, double nu) {
  if (nu <= 0.0) throw std::invalid_argument("student_t_cdf: nu must be > 0");
  if (t == 0.0) return 0.5;
  double x = nu / (nu + t * t);
  double tail = 0.5 * regularized_beta(0.5 * nu, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

}  // namespace melgraph
