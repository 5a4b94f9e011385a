#pragma once

// Exponential dispersion families with canonical link: the cumulant
// generator b and its derivatives, squared Pearson residuals, and the
// log-likelihood kernel sum_i (y_i * theta_i - b(theta_i)) / a(phi).
// The base-measure term c(y; phi) is model-independent for fixed data and
// is excluded from all likelihood values.

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace causalglm {

enum class FamilyKind { Poisson, Bernoulli };

// Natural-parameter cap for the Poisson family; exp(theta) overflows the
// double range near 709.
inline constexpr double kPoissonThetaCap = 700.0;

struct Family {
  FamilyKind kind = FamilyKind::Poisson;
  double dispersion = 1.0;  // a(phi); fixed to 1 for both supported kinds

  static Family poisson() { return Family{FamilyKind::Poisson, 1.0}; }
  static Family bernoulli() { return Family{FamilyKind::Bernoulli, 1.0}; }

  const char* name() const {
    return kind == FamilyKind::Poisson ? "poisson" : "bernoulli";
  }
};

struct Cumulant {
  double b;       // b(theta)
  double bdot;    // db/dtheta, the conditional mean
  double bddot;   // d2b/dtheta2, the variance function
};

inline double logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline Cumulant cumulant(const Family& family, double theta) {
  if (!std::isfinite(theta)) throw std::domain_error("cumulant: theta must be finite");
  switch (family.kind) {
    case FamilyKind::Poisson: {
      if (theta > kPoissonThetaCap)
        throw std::overflow_error("cumulant: Poisson theta exceeds overflow cap");
      const double e = std::exp(theta);
      // exp underflows below theta ~ -745; keep the variance function
      // strictly positive.
      const double var = e > 0.0 ? e : std::numeric_limits<double>::min();
      return Cumulant{e, e, var};
    }
    case FamilyKind::Bernoulli: {
      const double mu = logistic(theta);
      const double complement = logistic(-theta);  // 1 - mu at full precision
      const double var = mu * complement;
      return Cumulant{log1pexp(theta), mu,
                      var > 0.0 ? var : std::numeric_limits<double>::min()};
    }
  }
  throw std::logic_error("cumulant: unknown family");
}

inline bool in_support(const Family& family, double y) {
  switch (family.kind) {
    case FamilyKind::Poisson:
      return y >= 0.0 && std::isfinite(y) && std::floor(y) == y;
    case FamilyKind::Bernoulli:
      return y == 0.0 || y == 1.0;
  }
  return false;
}

// Squared Pearson residual (y - bdot(theta))^2 / (bddot(theta) * a(phi)).
inline double pearson_sq(const Family& family, double y, double theta) {
  if (!in_support(family, y))
    throw std::domain_error("pearson_sq: y outside family support");
  const Cumulant c = cumulant(family, theta);
  const double r = y - c.bdot;
  return (r * r) / (c.bddot * family.dispersion);
}

// Log-likelihood kernel sum_i (y_i theta_i - b(theta_i)) / a(phi),
// excluding the c(y; phi) base-measure terms.
inline double loglik_kernel(const Family& family, std::span<const double> y,
                            std::span<const double> theta) {
  if (y.size() != theta.size())
    throw std::invalid_argument("loglik_kernel: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!in_support(family, y[i]))
      throw std::domain_error("loglik_kernel: y outside family support");
    const Cumulant c = cumulant(family, theta[i]);
    acc += y[i] * theta[i] - c.b;
  }
  return acc / family.dispersion;
}

}  // namespace causalglm
