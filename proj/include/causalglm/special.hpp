#pragma once

// Scalar special functions: regularized incomplete gamma, chi-squared
// CDF/quantile, standard normal CDF/quantile, Poisson CDF/quantile.
// Everything here is deterministic and thread-safe.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace causalglm {

namespace detail {

// Lower regularized incomplete gamma via its power series.
// Valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < 1000000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma via modified Lentz continued fraction.
// Valid for x >= a + 1.
inline double gamma_q_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000000; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || !std::isfinite(a) || !std::isfinite(x))
    throw std::domain_error("gamma_p: require a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_cf(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || !std::isfinite(a) || !std::isfinite(x))
    throw std::domain_error("gamma_q: require a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// Chi-squared CDF with (possibly non-integer) df degrees of freedom.
inline double chisq_cdf(double x, double df) {
  if (!(df > 0.0)) throw std::domain_error("chisq_cdf: df must be positive");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

namespace detail {
inline constexpr double ln2 = 0.6931471805599453094172321214581766;
}

inline double chisq_pdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double h = 0.5 * df;
  return std::exp((h - 1.0) * std::log(x) - 0.5 * x - std::lgamma(h) - h * detail::ln2);
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile. Rational initial approximation refined by one
// Halley step against erfc, giving near machine accuracy on (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p must lie in (0,1)");
  // Work in the lower tail, where the CDF keeps full relative precision
  // (1 - p is exact for p in [0.5, 1]).
  if (p > 0.5) return -normal_quantile(1.0 - p);

  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

// Chi-squared quantile: Wilson-Hilferty start, then safeguarded Newton
// iterations on the CDF. Relative accuracy around 1e-12.
inline double chisq_quantile(double p, double df) {
  if (!(df > 0.0)) throw std::domain_error("chisq_quantile: df must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("chisq_quantile: p must lie in (0,1)");

  const double z = normal_quantile(p);
  const double t = 2.0 / (9.0 * df);
  double x = df * std::pow(1.0 - t + z * std::sqrt(t), 3);
  if (!(x > 0.0) || !std::isfinite(x)) x = df;

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chisq_cdf(x, df) - p;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double pdf = chisq_pdf(x, df);
    double step;
    if (pdf > 0.0 && std::isfinite(pdf)) {
      step = f / pdf;
    } else {
      step = 0.0;
    }
    double xn = x - step;
    if (!(xn > lo && xn < hi) || step == 0.0) {
      xn = std::isfinite(hi) ? 0.5 * (lo + hi) : (lo > 0.0 ? 2.0 * lo : 1.0);
    }
    if (std::fabs(xn - x) <= 1e-13 * std::fabs(x)) {
      x = xn;
      break;
    }
    x = xn;
  }
  return x;
}

// Poisson CDF P(X <= k) for rate lambda; non-integer k is floored.
inline double poisson_cdf(double k, double lambda) {
  if (!(lambda >= 0.0)) throw std::domain_error("poisson_cdf: lambda must be >= 0");
  if (k < 0.0) return 0.0;
  if (lambda == 0.0) return 1.0;
  const double kf = std::floor(k);
  return gamma_q(kf + 1.0, lambda);
}

// Smallest integer k with P(X <= k) >= u. Exact CDF inversion: a cumulative
// scan for small rates, otherwise a Cornish-Fisher guess corrected by an
// integer search on the CDF.
inline double poisson_quantile(double u, double lambda) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("poisson_quantile: u must lie in (0,1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::domain_error("poisson_quantile: lambda must be finite and >= 0");
  if (lambda == 0.0) return 0.0;

  if (lambda <= 30.0) {
    double pmf = std::exp(-lambda);
    double cdf = pmf;
    double k = 0.0;
    while (cdf < u) {
      k += 1.0;
      pmf *= lambda / k;
      cdf += pmf;
      if (pmf < 1e-18 && cdf >= 1.0 - 1e-12) break;
      if (k > 1e6) break;
    }
    return k;
  }

  const double z = normal_quantile(u);
  const double guess = lambda + std::sqrt(lambda) * z + (z * z - 1.0) / 6.0;
  double k = std::max(0.0, std::round(guess));
  if (poisson_cdf(k, lambda) < u) {
    do {
      k += 1.0;
    } while (poisson_cdf(k, lambda) < u);
  } else {
    while (k > 0.0 && poisson_cdf(k - 1.0, lambda) >= u) k -= 1.0;
  }
  return k;
}

}  // namespace causalglm
