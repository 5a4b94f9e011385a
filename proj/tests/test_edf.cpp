#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "causalglm/edf.hpp"
#include "causalglm/rng.hpp"
#include "causalglm/special.hpp"

using namespace causalglm;
using Catch::Approx;

TEST_CASE("cumulant values at the pinned points") {
  const auto p0 = cumulant(Family::poisson(), 0.0);
  CHECK(p0.b == Approx(1.0));
  CHECK(p0.bdot == Approx(1.0));
  CHECK(p0.bddot == Approx(1.0));

  const auto b0 = cumulant(Family::bernoulli(), 0.0);
  CHECK(b0.b == Approx(std::log(2.0)));
  CHECK(b0.bdot == Approx(0.5));
  CHECK(b0.bddot == Approx(0.25));

  const auto p1 = cumulant(Family::poisson(), 1.0);
  CHECK(p1.b == Approx(std::exp(1.0)));
  CHECK(p1.bdot == Approx(std::exp(1.0)));
  CHECK(p1.bddot == Approx(std::exp(1.0)));
}

TEST_CASE("cumulant guards") {
  CHECK_THROWS_AS(cumulant(Family::poisson(), 701.0), std::overflow_error);
  CHECK_NOTHROW(cumulant(Family::bernoulli(), 701.0));
  CHECK_THROWS_AS(cumulant(Family::poisson(), std::nan("")), std::domain_error);
  CHECK(cumulant(Family::poisson(), -1e6).bddot > 0.0);
}

TEST_CASE("derivatives of b match centered finite differences") {
  const double h = 1e-4;
  for (const Family& family : {Family::poisson(), Family::bernoulli()}) {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const double theta = 12.0 * (rng.next_unit() - 0.5);
      const auto c = cumulant(family, theta);
      const double bplus = cumulant(family, theta + h).b;
      const double bminus = cumulant(family, theta - h).b;
      const double fd1 = (bplus - bminus) / (2.0 * h);
      CHECK(c.bdot == Approx(fd1).epsilon(1e-6));
      const double dplus = cumulant(family, theta + h).bdot;
      const double dminus = cumulant(family, theta - h).bdot;
      const double fd2 = (dplus - dminus) / (2.0 * h);
      CHECK(c.bddot == Approx(fd2).epsilon(1e-6));
      CHECK(c.bddot > 0.0);
    }
  }
}

TEST_CASE("squared Pearson residuals at the pinned points") {
  CHECK(pearson_sq(Family::poisson(), 2.0, std::log(2.0)) == Approx(0.0).margin(1e-12));
  CHECK(pearson_sq(Family::poisson(), 0.0, 0.0) == Approx(1.0));
  CHECK(pearson_sq(Family::bernoulli(), 1.0, 0.0) == Approx(1.0));
  CHECK_THROWS_AS(pearson_sq(Family::poisson(), -1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(pearson_sq(Family::poisson(), 1.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(pearson_sq(Family::bernoulli(), 2.0, 0.0), std::domain_error);
}

TEST_CASE("pearson_sq vanishes exactly when y equals the mean") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double theta = 6.0 * (rng.next_unit() - 0.5);
    const double mean = cumulant(Family::poisson(), theta).bdot;
    // integer y: zero iff y == mean
    const double y = std::round(mean);
    const double value = pearson_sq(Family::poisson(), y, theta);
    if (y == mean)
      CHECK(value == 0.0);
    else
      CHECK(value > 0.0);
  }
  // Exact-mean case via theta = log(k)
  CHECK(pearson_sq(Family::poisson(), 3.0, std::log(3.0)) == Approx(0.0).margin(1e-12));
}

TEST_CASE("log-likelihood kernel values") {
  std::vector<double> y1 = {1.0};
  std::vector<double> t1 = {0.0};
  CHECK(loglik_kernel(Family::poisson(), y1, t1) == Approx(-1.0));

  std::vector<double> y2 = {1.0, 0.0};
  std::vector<double> t2 = {0.0, 0.0};
  CHECK(loglik_kernel(Family::bernoulli(), y2, t2) == Approx(-2.0 * std::log(2.0)));

  // Direct scalar evaluation: sum y_i*log(2) - 3*2 over y = (1,2,3).
  std::vector<double> y3 = {1.0, 2.0, 3.0};
  std::vector<double> t3 = {std::log(2.0), std::log(2.0), std::log(2.0)};
  CHECK(loglik_kernel(Family::poisson(), y3, t3) == Approx(6.0 * std::log(2.0) - 6.0));

  std::vector<double> bad = {1.0, 2.0};
  CHECK_THROWS_AS(loglik_kernel(Family::poisson(), bad, t3), std::invalid_argument);
}

TEST_CASE("Monte-Carlo dispersion of pearson_sq is one") {
  const int draws = 100000;
  {
    const double theta = 0.7;
    const double rate = std::exp(theta);
    Rng rng(2024);
    double acc = 0.0;
    for (int i = 0; i < draws; ++i)
      acc += pearson_sq(Family::poisson(), poisson_quantile(rng.next_unit(), rate), theta);
    CHECK(acc / draws == Approx(1.0).margin(0.03));
  }
  {
    const double theta = -0.4;
    const double p = logistic(theta);
    Rng rng(2025);
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double y = rng.next_unit() <= 1.0 - p ? 0.0 : 1.0;
      acc += pearson_sq(Family::bernoulli(), y, theta);
    }
    CHECK(acc / draws == Approx(1.0).margin(0.03));
  }
}
