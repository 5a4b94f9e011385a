#pragma once

// Penalized maximum-likelihood GLM fitting by iteratively reweighted least
// squares (Newton steps with step-halving). The objective is
//   sum_i (y_i theta_i - b(theta_i)) / a(phi) - (lambda/2) beta' Omega beta,
// maximized over beta with theta = X beta. Effective degrees of freedom are
// the trace of (X'WX + lambda Omega)^{-1} X'WX at convergence, and
// BIC = -2 loglik + edf log n.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "causalglm/basis.hpp"
#include "causalglm/edf.hpp"

namespace causalglm {

struct FitResult {
  Eigen::VectorXd beta;
  double edf = 0.0;
  double loglik = 0.0;   // kernel at beta, penalty excluded
  double bic = 0.0;
  double lambda = 0.0;
  bool converged = false;
  bool separated = false;  // Bernoulli quasi-separation flag
  int iterations = 0;
  Eigen::VectorXd eta;
  std::vector<double> objective_trace;  // accepted objective after each iteration
};

namespace detail {

inline constexpr int kIrlsMaxIter = 100;
inline constexpr int kIrlsMaxHalvings = 30;
inline constexpr double kIrlsRelObjTol = 1e-10;
inline constexpr double kIrlsStepTol = 1e-8;
inline constexpr double kIrlsScoreTol = 5e-7;
inline constexpr double kSeparationCap = 30.0;

// Objective value, or -inf when theta leaves the family's safe range.
inline double glm_objective(const Family& family, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& eta, double lambda,
                            const Eigen::MatrixXd& penalty,
                            const Eigen::VectorXd& beta) {
  double acc = 0.0;
  if (family.kind == FamilyKind::Poisson) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      if (eta[i] > kPoissonThetaCap) return -std::numeric_limits<double>::infinity();
      acc += y[i] * eta[i] - std::exp(eta[i]);
    }
  } else {
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      acc += y[i] * eta[i] - log1pexp(eta[i]);
  }
  acc /= family.dispersion;
  if (lambda > 0.0) acc -= 0.5 * lambda * beta.dot(penalty * beta);
  return std::isfinite(acc) ? acc : -std::numeric_limits<double>::infinity();
}

// X' r with a compensated (Neumaier) per-column accumulation; the score at
// convergence is a tiny residue of large cancelling terms, and the plain sum
// can lose it at large n.
inline Eigen::VectorXd gemv_transpose_compensated(const Eigen::MatrixXd& x,
                                                  const Eigen::VectorXd& r) {
  const Eigen::Index n = x.rows();
  const Eigen::Index q = x.cols();
  Eigen::VectorXd out(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    double sum = 0.0;
    double comp = 0.0;
    const double* col = x.col(j).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double term = col[i] * r[i];
      const double t = sum + term;
      if (std::fabs(sum) >= std::fabs(term))
        comp += (sum - t) + term;
      else
        comp += (term - t) + sum;
      sum = t;
    }
    out[j] = sum + comp;
  }
  return out;
}

}  // namespace detail

// Fits the GLM on the given design with smoothing weight lambda >= 0.
// beta_init, when provided, warm-starts the iteration.
inline FitResult fit_glm(const Family& family, const Design& design,
                         const Eigen::VectorXd& y, double lambda,
                         const Eigen::VectorXd* beta_init = nullptr) {
  const Eigen::MatrixXd& x = design.matrix;
  const Eigen::Index n = x.rows();
  const Eigen::Index q = x.cols();
  if (y.size() != n) throw std::invalid_argument("fit_glm: y length mismatch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit_glm: lambda must be >= 0");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!in_support(family, y[i]))
      throw std::domain_error("fit_glm: y outside family support");

  FitResult result;
  result.lambda = lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  if (beta_init && beta_init->size() == q) {
    beta = *beta_init;
  } else {
    double mean = y.mean();
    const double lo = 1.0 / (static_cast<double>(n) + 1.0);
    if (family.kind == FamilyKind::Bernoulli) {
      mean = std::min(std::max(mean, lo), 1.0 - lo);
      beta[0] = std::log(mean / (1.0 - mean));
    } else {
      mean = std::max(mean, lo);
      beta[0] = std::log(mean);
    }
  }

  Eigen::VectorXd eta = x * beta;
  double objective = detail::glm_objective(family, y, eta, lambda, design.penalty, beta);
  if (!std::isfinite(objective)) {
    beta.setZero();
    eta.setZero();
    objective = detail::glm_objective(family, y, eta, lambda, design.penalty, beta);
  }

  Eigen::VectorXd mu(n), w(n);
  Eigen::MatrixXd hessian(q, q);
  int iter = 0;
  result.objective_trace.push_back(objective);

  const auto newton_system = [&](const Eigen::VectorXd& at_beta,
                                 const Eigen::VectorXd& at_eta, Eigen::VectorXd& grad) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Cumulant c = cumulant(family, at_eta[i]);
      mu[i] = c.bdot;
      w[i] = c.bddot;
    }
    grad = detail::gemv_transpose_compensated(x, (y - mu)) / family.dispersion;
    if (lambda > 0.0) grad -= lambda * (design.penalty * at_beta);
    const Eigen::MatrixXd xw = w.cwiseSqrt().asDiagonal() * x;
    hessian.setZero();
    hessian.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
    hessian = hessian.selfadjointView<Eigen::Lower>();
    hessian /= family.dispersion;
    if (lambda > 0.0) hessian += lambda * design.penalty;
  };

  const auto solve_direction = [&](const Eigen::VectorXd& grad,
                                   Eigen::VectorXd& direction) -> bool {
    Eigen::LLT<Eigen::MatrixXd> llt(hessian);
    if (llt.info() != Eigen::Success) {
      const double jitter = 1e-10 * hessian.trace() / static_cast<double>(q);
      Eigen::MatrixXd bumped = hessian;
      for (int attempt = 0; attempt < 4 && llt.info() != Eigen::Success; ++attempt) {
        bumped.diagonal().array() += jitter * std::pow(10.0, attempt);
        llt.compute(bumped);
      }
      if (llt.info() != Eigen::Success) return false;
    }
    direction = llt.solve(grad);
    return true;
  };

  bool solver_ok = true;
  while (iter < detail::kIrlsMaxIter) {
    ++iter;
    Eigen::VectorXd grad, direction;
    newton_system(beta, eta, grad);
    if (!solve_direction(grad, direction)) {
      solver_ok = false;
      break;
    }

    double step = 1.0;
    double new_objective = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd new_beta, new_eta;
    bool accepted = false;
    for (int halving = 0; halving <= detail::kIrlsMaxHalvings; ++halving) {
      new_beta = beta + step * direction;
      new_eta = x * new_beta;
      new_objective =
          detail::glm_objective(family, y, new_eta, lambda, design.penalty, new_beta);
      if (new_objective >= objective) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // improvement below the objective's resolution

    const double delta_inf = (new_beta - beta).lpNorm<Eigen::Infinity>();
    const double rel_change =
        std::fabs(new_objective - objective) / (std::fabs(objective) + 1e-300);
    beta = std::move(new_beta);
    eta = std::move(new_eta);
    objective = new_objective;
    result.objective_trace.push_back(objective);

    if (rel_change < detail::kIrlsRelObjTol || delta_inf < detail::kIrlsStepTol) break;
  }

  // Near the optimum the true objective gain falls below its floating-point
  // resolution, so the monotone phase stalls with the score only partially
  // resolved. A few plain Newton steps (taken only while tiny and strictly
  // reducing the score norm) finish the job.
  double score_inf = std::numeric_limits<double>::infinity();
  if (solver_ok) {
    Eigen::VectorXd grad, direction;
    newton_system(beta, eta, grad);
    score_inf = grad.lpNorm<Eigen::Infinity>();
    for (int polish = 0; polish < 10 && score_inf > detail::kIrlsScoreTol; ++polish) {
      if (!solve_direction(grad, direction)) break;
      if (direction.lpNorm<Eigen::Infinity>() >
          1e-5 * (1.0 + beta.lpNorm<Eigen::Infinity>()))
        break;
      const Eigen::VectorXd cand_beta = beta + direction;
      const Eigen::VectorXd cand_eta = x * cand_beta;
      Eigen::VectorXd cand_grad;
      newton_system(cand_beta, cand_eta, cand_grad);
      const double cand_score = cand_grad.lpNorm<Eigen::Infinity>();
      if (cand_score >= score_inf) break;
      beta = cand_beta;
      eta = cand_eta;
      score_inf = cand_score;
      grad = std::move(cand_grad);
    }
  }
  const bool converged = solver_ok && score_inf <= detail::kIrlsScoreTol;

  result.beta = beta;
  result.eta = eta;
  result.iterations = iter;
  result.converged = converged;

  if (family.kind == FamilyKind::Bernoulli &&
      beta.lpNorm<Eigen::Infinity>() > detail::kSeparationCap) {
    result.separated = true;
    result.converged = false;
  }

  // Effective degrees of freedom: trace of (X'WX + lambda Omega)^{-1} X'WX.
  if (lambda == 0.0) {
    result.edf = static_cast<double>(q);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) w[i] = cumulant(family, eta[i]).bddot;
    const Eigen::MatrixXd xw = w.cwiseSqrt().asDiagonal() * x;
    Eigen::MatrixXd info(q, q);
    info.setZero();
    info.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
    info = info.selfadjointView<Eigen::Lower>();
    info /= family.dispersion;
    Eigen::MatrixXd penalized = info + lambda * design.penalty;
    Eigen::LLT<Eigen::MatrixXd> llt(penalized);
    if (llt.info() != Eigen::Success) {
      penalized.diagonal().array() += 1e-10 * penalized.trace() / static_cast<double>(q);
      llt.compute(penalized);
    }
    result.edf = llt.info() == Eigen::Success
                     ? llt.solve(info).trace()
                     : static_cast<double>(q);
  }

  result.loglik = loglik_kernel(family, std::span<const double>(y.data(), y.size()),
                                std::span<const double>(eta.data(), eta.size()));
  result.bic = -2.0 * result.loglik + result.edf * std::log(static_cast<double>(n));
  return result;
}

inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 9; ++k) grid.push_back(std::pow(10.0, -4.0 + k));
  return grid;
}

// Pearson statistic of a fit, used as the GCV deviance measure.
inline double fit_pearson(const Family& family, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& eta) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += pearson_sq(family, y[i], eta[i]);
  return acc;
}

// Selects the smoothing weight minimizing the GCV score
// n * D(lambda) / (n - edf(lambda))^2 with D the Pearson statistic; ties go
// to the larger lambda. Fits are warm-started along the grid from large to
// small lambda.
inline std::pair<double, FitResult> select_lambda(const Family& family,
                                                  const Design& design,
                                                  const Eigen::VectorXd& y,
                                                  const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  const double n = static_cast<double>(design.n());
  double best_gcv = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  FitResult best_fit;
  bool any = false;
  const Eigen::VectorXd* warm = nullptr;
  FitResult fit;
  for (double lambda : sorted) {
    fit = fit_glm(family, design, y, lambda, warm);
    warm = &fit.beta;
    if (!fit.converged) continue;
    const double denom = n - fit.edf;
    if (!(denom > 0.0)) continue;
    const double gcv = n * fit_pearson(family, y, fit.eta) / (denom * denom);
    if (gcv < best_gcv) {
      best_gcv = gcv;
      best_lambda = lambda;
      best_fit = fit;
      any = true;
    }
  }
  if (!any) throw std::runtime_error("select_lambda: no grid point produced a usable fit");
  return {best_lambda, best_fit};
}

// Log-likelihood kernel of a fixed coefficient vector on an evaluated basis
// matrix (for in-sample versus shifted-environment comparisons).
inline double loglik_at(const Family& family, const Eigen::MatrixXd& design_eval,
                        const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  if (design_eval.rows() != y.size() || design_eval.cols() != beta.size())
    throw std::invalid_argument("loglik_at: shape mismatch");
  const Eigen::VectorXd eta = design_eval * beta;
  return loglik_kernel(family, std::span<const double>(y.data(), y.size()),
                       std::span<const double>(eta.data(), eta.size()));
}

}  // namespace causalglm
