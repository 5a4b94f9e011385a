#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "causalglm/disptest.hpp"
#include "causalglm/simulate.hpp"

using namespace causalglm;
using Catch::Approx;

namespace {

double var_of(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

double corr_of(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
  return (da * db).sum() / std::sqrt(da.square().sum() * db.square().sum());
}

}  // namespace

TEST_CASE("two-covariate design: columns, moments and determinism") {
  const Eigen::Index n = 100000;
  const Dataset data = gen_fig1(n, 7);
  REQUIRE(data.names == std::vector<std::string>{"X1", "X2", "Y"});
  REQUIRE(data.n() == n);

  CHECK(var_of(data.column("X1")) == Approx(1.0).margin(0.05));
  CHECK(var_of(data.column("X2")) == Approx(3.0).margin(0.1));

  // E[Y / e^{X1}] = 1 by the conditional mean identity.
  const auto& x1 = data.column("X1");
  const auto& y = data.column("Y");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += y[i] / std::exp(x1[i]);
  CHECK(acc / static_cast<double>(n) == Approx(1.0).margin(0.02));

  const Dataset again = gen_fig1(n, 7);
  for (std::size_t j = 0; j < data.columns.size(); ++j)
    CHECK((data.columns[j] - again.columns[j]).lpNorm<Eigen::Infinity>() == 0.0);

  const Dataset other = gen_fig1(n, 8);
  CHECK((data.column("Y") - other.column("Y")).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("seven-covariate design: structure checks") {
  const Dataset data = gen_fig3(10000, 13);
  REQUIRE(data.names ==
          std::vector<std::string>{"X1", "X2", "X3", "X4", "X5", "X6", "X7", "Y"});

  CHECK(corr_of(data.column("X7"), data.column("X6")) > 0.9);

  CHECK_THROWS_AS(gen_fig3(0, 1), std::invalid_argument);
}

TEST_CASE("seven-covariate design: conditional-mean identity") {
  const Eigen::Index n = 100000;
  const Dataset data = gen_fig3(n, 99);
  const auto& x2 = data.column("X2");
  const auto& x3 = data.column("X3");
  const auto& y = data.column("Y");
  // Regress Y on the true rate through the origin; the slope estimates 1.
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = std::exp(std::sin(5.0 * x2[i]) + std::pow(x3[i], 3));
    num += rate * y[i];
    den += rate * rate;
  }
  CHECK(num / den == Approx(1.0).margin(0.05));
}

TEST_CASE("logistic design: columns and coupling") {
  const Eigen::Index n = 100000;
  const double pi = 0.1;
  const Dataset data = gen_fig4(n, 21, pi);
  REQUIRE(data.names == std::vector<std::string>{"X1", "X2", "X3", "X4", "X5", "Y"});

  const auto& y = data.column("Y");
  for (Eigen::Index i = 0; i < n; ++i) REQUIRE((y[i] == 0.0 || y[i] == 1.0));

  // P(Y=1) near 0.5 in the stratum X2, X3 both near zero.
  const auto& x2 = data.column("X2");
  const auto& x3 = data.column("X3");
  double hits = 0.0, count = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::fabs(x2[i]) < 0.05 && std::fabs(x3[i]) < 0.05) {
      count += 1.0;
      hits += y[i];
    }
  }
  REQUIRE(count > 30.0);
  CHECK(hits / count == Approx(0.5).margin(0.15));

  // E[X5|Y=1] - E[X5|Y=0] = (1 - 2 pi).
  const auto& x5 = data.column("X5");
  double s1 = 0.0, c1 = 0.0, s0 = 0.0, c0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == 1.0) {
      s1 += x5[i];
      c1 += 1.0;
    } else {
      s0 += x5[i];
      c0 += 1.0;
    }
  }
  CHECK(s1 / c1 - s0 / c0 == Approx(1.0 - 2.0 * pi).margin(0.03));

  CHECK_THROWS_AS(gen_fig4(10, 1, 1.5), std::invalid_argument);
}

TEST_CASE("declaration order does not change the generated law") {
  ScmSpec spec = fig3_spec();
  ScmSpec shuffled = spec;
  std::reverse(shuffled.nodes.begin(), shuffled.nodes.end());

  const Dataset a = gen_scm(spec, 5000, 4242, "fig3");
  const Dataset b = gen_scm(shuffled, 5000, 4242, "fig3");
  for (const auto& name : {"X1", "X4", "X7", "Y"})
    CHECK((a.column(name) - b.column(name)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("scm json round trip") {
  const ScmSpec spec = fig4_spec(0.25);
  const ScmSpec back = ScmSpec::from_json_string(spec.to_json_string());
  CHECK(back.to_json_string() == spec.to_json_string());

  const Dataset a = gen_scm(spec, 500, 5, "fig4");
  const Dataset b = gen_scm(back, 500, 5, "fig4");
  CHECK((a.column("Y") - b.column("Y")).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("scm validation rejects bad specs") {
  ScmSpec cyclic;
  cyclic.nodes = {{"A", {"B"}, "B", 1.0}, {"B", {"A"}, "A", 1.0}};
  cyclic.target = {"Y", FamilyKind::Poisson, {"A"}, "A", ""};
  CHECK_THROWS_AS(gen_scm(cyclic, 10, 1, "bad"), std::invalid_argument);

  ScmSpec dangling;
  dangling.nodes = {{"A", {"Q"}, "Q", 1.0}};
  dangling.target = {"Y", FamilyKind::Poisson, {"A"}, "A", ""};
  CHECK_THROWS_AS(gen_scm(dangling, 10, 1, "bad"), std::invalid_argument);

  ScmSpec noiseless_latent;
  noiseless_latent.nodes = {{"A", {}, "0", 1.0}, {"Z", {"A"}, "A", 0.0}};
  noiseless_latent.target = {"Y", FamilyKind::Poisson, {"A"}, "A", "Z"};
  CHECK_THROWS_AS(gen_scm(noiseless_latent, 10, 1, "bad"), std::invalid_argument);

  ScmSpec bad_expr;
  bad_expr.nodes = {{"A", {}, "0", 1.0}, {"B", {"A"}, "A +* 2", 1.0}};
  bad_expr.target = {"Y", FamilyKind::Poisson, {"A"}, "A", ""};
  CHECK_THROWS_AS(gen_scm(bad_expr, 10, 1, "bad"), std::invalid_argument);
}

TEST_CASE("expression language evaluates its operator set") {
  ScmSpec spec;
  spec.nodes = {{"A", {}, "2", 0.0},
                {"B", {"A"}, "cube(A) - exp(A)*0.5 + sin(A - A)", 0.0}};
  spec.target = {"Y", FamilyKind::Poisson, {"A"}, "A - 2", ""};
  const Dataset data = gen_scm(spec, 3, 1, "expr");
  CHECK(data.column("A")[0] == 2.0);
  CHECK(data.column("B")[0] == Approx(8.0 - 0.5 * std::exp(2.0)));
}

TEST_CASE("shift with zero variance reproduces the data") {
  const Dataset base = gen_fig1(2000, 17);
  const Dataset same = apply_shift(base, 0.0, {"X1", "X2"}, 555);
  for (std::size_t j = 0; j < base.columns.size(); ++j)
    CHECK((base.columns[j] - same.columns[j]).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("shifting X1 raises downstream variance and keeps the conditional law") {
  const Eigen::Index n = 100000;
  const Dataset base = gen_fig1(n, 31);
  const double sigma2 = 4.0;
  const Dataset shifted = apply_shift(base, sigma2, {"X1"}, 77);

  // X2 = X1 + eps_Z + eps_2 picks up the full shift variance.
  CHECK(var_of(shifted.column("X2")) ==
        Approx(var_of(base.column("X2")) + sigma2).epsilon(0.05));

  // Y | X1 stays Poisson(e^{X1}): the true causal predictor is perfectly
  // dispersed on the shifted environment.
  const auto& x1 = shifted.column("X1");
  const auto& y = shifted.column("Y");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    acc += pearson_sq(Family::poisson(), y[i], x1[i]);
  CHECK(acc / static_cast<double>(n) == Approx(1.0).margin(0.03));

  CHECK_THROWS_AS(apply_shift(base, 1.0, {"Y"}, 1), std::invalid_argument);
  CHECK_THROWS_AS(apply_shift(base, 1.0, {"nope"}, 1), std::invalid_argument);
}

TEST_CASE("pearson risk of the true predictor is invariant across shift sizes") {
  const Eigen::Index n = 100000;
  const Dataset base = gen_fig1(n, 101);
  for (double sigma2 : {0.0, 5.0, 10.0}) {
    const Dataset data =
        sigma2 == 0.0 ? base : apply_shift(base, sigma2, {"X1", "X2"}, 202);
    const auto& x1 = data.column("X1");
    const auto& y = data.column("Y");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += pearson_sq(Family::poisson(), y[i], x1[i]);
    CAPTURE(sigma2);
    CHECK(acc / static_cast<double>(n) == Approx(1.0).margin(0.03));
  }
}
