#pragma once

// Tests of the null hypothesis that a fitted model's Pearson risk equals the
// dispersion a(phi): the statistic is the sum of squared Pearson residuals,
// compared two-sided either against a chi-squared reference with n - edf
// degrees of freedom (Poisson) or against a parametric bootstrap under the
// fitted conditional law.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "causalglm/basis.hpp"
#include "causalglm/edf.hpp"
#include "causalglm/fit.hpp"
#include "causalglm/parallel.hpp"
#include "causalglm/rng.hpp"
#include "causalglm/special.hpp"

namespace causalglm {

enum class TestMethod { ChiSq, Bootstrap };

struct TestResult {
  double statistic = 0.0;
  double edf_used = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::ChiSq;
  int bootstrap_reps = 0;
  bool accepted = false;
  double alpha = 0.05;
};

// Sum of squared Pearson residuals at arbitrary linear predictors.
inline double pearson_statistic(const Family& family, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& eta) {
  if (y.size() != eta.size())
    throw std::invalid_argument("pearson_statistic: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += pearson_sq(family, y[i], eta[i]);
  return acc;
}

// Two-sided p-value against the chi-squared law with df degrees of freedom.
inline double chisq_two_sided_pvalue(double statistic, double df) {
  const double cdf = chisq_cdf(statistic, df);
  return std::min(1.0, 2.0 * std::min(cdf, 1.0 - cdf));
}

inline TestResult chisq_test(const Family& family, const FitResult& fit,
                             const Eigen::VectorXd& y, double alpha,
                             bool force = false) {
  if (family.kind != FamilyKind::Poisson && !force)
    throw std::invalid_argument(
        "chisq_test: chi-squared reference is supported for the Poisson family; "
        "use the bootstrap (or force explicitly)");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("chisq_test: alpha must lie in (0,1)");
  const double df = static_cast<double>(y.size()) - fit.edf;
  if (!(df >= 1.0))
    throw std::invalid_argument("chisq_test: degenerate degrees of freedom");

  TestResult result;
  result.method = TestMethod::ChiSq;
  result.alpha = alpha;
  result.edf_used = fit.edf;
  result.statistic = pearson_statistic(family, y, fit.eta);
  result.p_value = chisq_two_sided_pvalue(result.statistic, df);
  result.accepted = result.p_value >= alpha;
  return result;
}

namespace detail {

inline double draw_response(const Family& family, double mean, double u) {
  if (family.kind == FamilyKind::Poisson) return poisson_quantile(u, mean);
  return u <= 1.0 - mean ? 0.0 : 1.0;
}

}  // namespace detail

// Parametric bootstrap: resamples y from the fitted conditional law with the
// design held fixed, refits at the original lambda, and compares the observed
// statistic two-sided against the replicate distribution. Replicates use
// seed-derived substreams, so results are identical for any thread count;
// replicates whose refit fails are redrawn from fresh substreams, and more
// than 10% failures is an error.
inline TestResult bootstrap_test(const Family& family, const FitResult& fit,
                                 const Design& design, const Eigen::VectorXd& y,
                                 double alpha, int replicates, std::uint64_t seed,
                                 unsigned threads = 0) {
  if (replicates < 19)
    throw std::invalid_argument("bootstrap_test: need at least 19 replicates");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("bootstrap_test: alpha must lie in (0,1)");
  if (!fit.converged)
    throw std::invalid_argument("bootstrap_test: fit did not converge");

  const Eigen::Index n = y.size();
  Eigen::VectorXd means(n);
  for (Eigen::Index i = 0; i < n; ++i) means[i] = cumulant(family, fit.eta[i]).bdot;

  const double observed = pearson_statistic(family, y, fit.eta);

  constexpr int kMaxAttempts = 16;
  std::vector<double> stats(static_cast<std::size_t>(replicates));
  std::vector<int> failures(static_cast<std::size_t>(replicates), 0);

  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t b) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Rng rng(substream_key(seed, "bootstrap",
                            (static_cast<std::uint64_t>(b) << 16) |
                                static_cast<std::uint64_t>(attempt)));
      Eigen::VectorXd ystar(n);
      for (Eigen::Index i = 0; i < n; ++i)
        ystar[i] = detail::draw_response(family, means[i], rng.next_unit());
      try {
        const FitResult refit = fit_glm(family, design, ystar, fit.lambda, &fit.beta);
        if (refit.converged) {
          stats[b] = pearson_statistic(family, ystar, refit.eta);
          failures[b] += attempt;
          return;
        }
      } catch (const std::exception&) {
        // fall through to redraw
      }
    }
    failures[b] += kMaxAttempts;
    stats[b] = std::numeric_limits<double>::quiet_NaN();
  });

  int total_failures = 0;
  int dead = 0;
  for (std::size_t b = 0; b < stats.size(); ++b) {
    total_failures += failures[b];
    if (std::isnan(stats[b])) ++dead;
  }
  if (dead > 0 || total_failures > replicates / 10)
    throw std::runtime_error("bootstrap_test: excessive refit failures");

  int count_ge = 0;
  int count_le = 0;
  for (double s : stats) {
    if (s >= observed) ++count_ge;
    if (s <= observed) ++count_le;
  }
  const double denom = static_cast<double>(replicates) + 1.0;
  const double p = 2.0 * std::min((1.0 + count_ge) / denom, (1.0 + count_le) / denom);

  TestResult result;
  result.method = TestMethod::Bootstrap;
  result.bootstrap_reps = replicates;
  result.alpha = alpha;
  result.edf_used = fit.edf;
  result.statistic = observed;
  result.p_value = std::min(1.0, p);
  result.accepted = result.p_value >= alpha;
  return result;
}

}  // namespace causalglm
