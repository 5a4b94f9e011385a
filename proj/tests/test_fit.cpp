#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "causalglm/fit.hpp"
#include "causalglm/simulate.hpp"

using namespace causalglm;
using Catch::Approx;

namespace {

BasisSpec linear_spec() {
  BasisSpec spec;
  spec.kind = BasisKind::Linear;
  return spec;
}

BasisSpec spline_spec(int df = 8) {
  BasisSpec spec;
  spec.kind = BasisKind::AdditiveSpline;
  spec.spline_df = df;
  return spec;
}

// Independent oracle: a generic Newton maximizer of the Poisson objective
// sum_i (y_i x_i'b - exp(x_i'b)) using finite-difference derivatives only.
Eigen::VectorXd newton_fd_poisson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) acc += y[i] * eta[i] - std::exp(eta[i]);
    return acc;
  };
  const Eigen::Index q = x.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  const double h = 1e-5;
  for (int iter = 0; iter < 60; ++iter) {
    Eigen::VectorXd grad(q);
    Eigen::MatrixXd hess(q, q);
    for (Eigen::Index a = 0; a < q; ++a) {
      Eigen::VectorXd ea = Eigen::VectorXd::Zero(q);
      ea[a] = h;
      grad[a] = (objective(beta + ea) - objective(beta - ea)) / (2.0 * h);
      for (Eigen::Index b = 0; b <= a; ++b) {
        Eigen::VectorXd eb = Eigen::VectorXd::Zero(q);
        eb[b] = h;
        const double val = (objective(beta + ea + eb) - objective(beta + ea - eb) -
                            objective(beta - ea + eb) + objective(beta - ea - eb)) /
                           (4.0 * h * h);
        hess(a, b) = val;
        hess(b, a) = val;
      }
    }
    const Eigen::VectorXd step = hess.ldlt().solve(-grad);
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-9) break;
  }
  return beta;
}

}  // namespace

TEST_CASE("intercept-only Poisson fit is the log sample mean") {
  Dataset data;
  data.names = {"Y"};
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  data.columns = {y};
  data.target_name = "Y";

  const Design design = build_design(data, {}, linear_spec());
  const FitResult fit = fit_glm(Family::poisson(), design, y, 0.0);
  REQUIRE(fit.converged);
  CHECK(fit.beta[0] == Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(fit.edf == 1.0);
  CHECK(fit.bic == -2.0 * fit.loglik + fit.edf * std::log(3.0));
}

TEST_CASE("intercept-only balanced Bernoulli fit is zero") {
  Dataset data;
  data.names = {"Y"};
  Eigen::VectorXd y(2);
  y << 0, 1;
  data.columns = {y};
  data.target_name = "Y";

  const Design design = build_design(data, {}, linear_spec());
  const FitResult fit = fit_glm(Family::bernoulli(), design, y, 0.0);
  REQUIRE(fit.converged);
  CHECK(fit.beta[0] == Approx(0.0).margin(1e-9));
}

TEST_CASE("large-sample linear Poisson fit recovers the causal coefficients") {
  const Dataset data = gen_fig1(100000, 7);
  const Design design = build_design(data, {0}, linear_spec());
  const FitResult fit = fit_glm(Family::poisson(), design, data.target(), 0.0);
  REQUIRE(fit.converged);
  CHECK(std::fabs(fit.beta[1] - 1.0) < 0.02);
  CHECK(std::fabs(fit.beta[0]) < 0.02);

  // Independent generic optimizer agrees.
  const Eigen::VectorXd oracle = newton_fd_poisson(design.matrix, data.target());
  CHECK((fit.beta - oracle).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("converged unpenalized fits solve the score equations tightly") {
  const Dataset data = gen_fig1(20000, 3);
  for (const auto& subset : {std::vector<int>{}, {0}, {1}, {0, 1}}) {
    const Design design = build_design(data, subset, linear_spec());
    const FitResult fit = fit_glm(Family::poisson(), design, data.target(), 0.0);
    REQUIRE(fit.converged);
    Eigen::VectorXd mu(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
      mu[i] = cumulant(Family::poisson(), fit.eta[i]).bdot;
    const Eigen::VectorXd score = design.matrix.transpose() * (data.target() - mu);
    CAPTURE(subset.size());
    CHECK(score.lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("objective trace is nondecreasing") {
  const Dataset data = gen_fig3(500, 17);
  const Design design = build_design(data, {1, 2}, spline_spec());
  for (double lambda : {0.0, 0.1, 10.0}) {
    const FitResult fit = fit_glm(Family::poisson(), design, data.target(), lambda);
    REQUIRE(fit.objective_trace.size() > 1);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
      CHECK(fit.objective_trace[k] >= fit.objective_trace[k - 1]);
  }
}

TEST_CASE("penalized score vanishes at the penalized optimum") {
  const Dataset data = gen_fig3(800, 23);
  const Design design = build_design(data, {1, 2}, spline_spec());
  const double lambda = 3.7;
  const FitResult fit = fit_glm(Family::poisson(), design, data.target(), lambda);
  REQUIRE(fit.converged);
  Eigen::VectorXd mu(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    mu[i] = cumulant(Family::poisson(), fit.eta[i]).bdot;
  const Eigen::VectorXd score = design.matrix.transpose() * (data.target() - mu) -
                                lambda * (design.penalty * fit.beta);
  const double bound = 1e-6 * (1.0 + data.target().lpNorm<Eigen::Infinity>());
  CHECK(score.lpNorm<Eigen::Infinity>() <= bound);

  // 1 <= edf <= q, strictly interior for a positive penalty.
  CHECK(fit.edf >= 1.0);
  CHECK(fit.edf < static_cast<double>(design.q()));
}

TEST_CASE("nested unpenalized models cannot lose likelihood") {
  const Dataset data = gen_fig1(5000, 29);
  const Design small = build_design(data, {0}, linear_spec());
  const Design large = build_design(data, {0, 1}, linear_spec());
  const FitResult fit_small = fit_glm(Family::poisson(), small, data.target(), 0.0);
  const FitResult fit_large = fit_glm(Family::poisson(), large, data.target(), 0.0);
  CHECK(fit_small.loglik <= fit_large.loglik + 1e-8);
}

TEST_CASE("mean score at the true causal coefficients shrinks like root n") {
  for (Eigen::Index n : {10000, 100000}) {
    const Dataset data = gen_fig1(n, 41);
    const Design design = build_design(data, {0}, linear_spec());
    Eigen::VectorXd beta_true(2);
    beta_true << 0.0, 1.0;
    const Eigen::VectorXd eta = design.matrix * beta_true;
    Eigen::VectorXd residual = data.target();
    for (Eigen::Index i = 0; i < n; ++i) residual[i] -= std::exp(eta[i]);
    const Eigen::VectorXd score = design.matrix.transpose() * residual;
    const double mean_score = score.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
    CAPTURE(n);
    CHECK(mean_score <= 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("separation is flagged and treated as non-converged") {
  Dataset data;
  data.names = {"X1", "Y"};
  Eigen::VectorXd x(40), y(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = i < 20 ? -1.0 - 0.05 * i : 1.0 + 0.05 * i;
    y[i] = i < 20 ? 0.0 : 1.0;
  }
  data.columns = {x, y};
  data.target_name = "Y";
  const Design design = build_design(data, {0}, linear_spec());
  const FitResult fit = fit_glm(Family::bernoulli(), design, y, 0.0);
  CHECK(fit.separated);
  CHECK_FALSE(fit.converged);
}

TEST_CASE("lambda selection on a zero penalty returns identical fits") {
  const Dataset data = gen_fig1(2000, 51);
  const Design design = build_design(data, {0, 1}, linear_spec());
  const auto [lambda, fit] = select_lambda(Family::poisson(), design, data.target(),
                                           default_lambda_grid());
  const FitResult direct = fit_glm(Family::poisson(), design, data.target(), 0.0);
  CHECK((fit.beta - direct.beta).lpNorm<Eigen::Infinity>() < 1e-8);

  const auto [lambda0, fit0] =
      select_lambda(Family::poisson(), design, data.target(), {0.0});
  CHECK(lambda0 == 0.0);
  CHECK((fit0.beta - direct.beta).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("gcv-selected spline fit has interior effective degrees of freedom") {
  const Dataset data = gen_fig3(1000, 61);
  const Design design = build_design(data, {1, 2}, spline_spec());
  const auto [lambda, fit] = select_lambda(Family::poisson(), design, data.target(),
                                           default_lambda_grid());
  REQUIRE(fit.converged);
  CHECK(fit.lambda == lambda);
  CHECK(fit.edf > 1.0);
  CHECK(fit.edf < static_cast<double>(design.q()));
}

TEST_CASE("loglik_at is consistent with the fit's own likelihood") {
  const Dataset data = gen_fig1(3000, 71);
  const Design design = build_design(data, {0, 1}, linear_spec());
  const FitResult fit = fit_glm(Family::poisson(), design, data.target(), 0.0);
  const double replay = loglik_at(Family::poisson(), design.matrix, data.target(), fit.beta);
  CHECK(replay == Approx(fit.loglik).epsilon(1e-12));

  Eigen::VectorXd wrong_shape(2);
  wrong_shape << 0.0, 1.0;
  CHECK_THROWS_AS(loglik_at(Family::poisson(), design.matrix, data.target(), wrong_shape),
                  std::invalid_argument);
}

TEST_CASE("subset order does not change fitted values") {
  const Dataset data = gen_fig3(600, 81);
  const Design ab = build_design(data, {1, 2}, spline_spec(6));
  const Design ba = build_design(data, {2, 1}, spline_spec(6));
  const FitResult fit_ab = fit_glm(Family::poisson(), ab, data.target(), 2.5);
  const FitResult fit_ba = fit_glm(Family::poisson(), ba, data.target(), 2.5);
  REQUIRE(fit_ab.converged);
  REQUIRE(fit_ba.converged);
  CHECK((fit_ab.eta - fit_ba.eta).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("fit rejects data outside the family support") {
  Dataset data;
  data.names = {"Y"};
  Eigen::VectorXd y(2);
  y << 0.5, 1.0;
  data.columns = {y};
  data.target_name = "Y";
  const Design design = build_design(data, {}, linear_spec());
  CHECK_THROWS_AS(fit_glm(Family::poisson(), design, y, 0.0), std::domain_error);
  CHECK_THROWS_AS(fit_glm(Family::bernoulli(), design, y, 0.0), std::domain_error);
  CHECK_THROWS_AS(fit_glm(Family::poisson(), design, Eigen::VectorXd::Ones(2), -1.0),
                  std::invalid_argument);
}
