#pragma once

// Benchmark experiments: detection-rate tables over replicated simulations
// and the large-sample invariance summary. The master seed fans out per
// (experiment, n, replicate), so every cell is independently reproducible;
// replicates run in parallel with single-threaded searches inside.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "causalglm/parallel.hpp"
#include "causalglm/search.hpp"
#include "causalglm/simulate.hpp"

namespace causalglm {

struct DetectionRow {
  Eigen::Index n = 0;
  double full_pct = 0.0;
  double step_pct = 0.0;
  double full_seconds = 0.0;  // summed per-replicate wall time
  double step_seconds = 0.0;
};

namespace detail {

inline bool selected_equals(const SearchReport& report,
                            const std::vector<std::string>& names) {
  if (!report.selected) return false;
  return report.subset_names(*report.selected) == names;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// Detection of the exact parent set {X2, X3} in the seven-covariate Poisson
// design, full versus stepwise search with the chi-squared test.
inline std::vector<DetectionRow> bench_fig3_table(
    int reps, std::uint64_t master_seed,
    const std::vector<Eigen::Index>& n_list = {100, 150, 200, 250, 500, 1000},
    unsigned threads = 0) {
  const std::vector<std::string> truth = {"X2", "X3"};
  std::vector<DetectionRow> rows;
  for (const Eigen::Index n : n_list) {
    const std::uint64_t row_seed =
        substream_key(master_seed, "fig3-table", static_cast<std::uint64_t>(n));
    std::vector<int> full_hit(static_cast<std::size_t>(reps), 0);
    std::vector<int> step_hit(static_cast<std::size_t>(reps), 0);
    std::vector<double> full_sec(static_cast<std::size_t>(reps), 0.0);
    std::vector<double> step_sec(static_cast<std::size_t>(reps), 0.0);

    parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t rep) {
      const std::uint64_t rep_seed = substream_key(row_seed, "rep", rep);
      const Dataset data = gen_fig3(n, rep_seed);

      SearchConfig cfg;
      cfg.alpha = 0.05;
      cfg.method = TestMethod::ChiSq;
      cfg.basis.kind = BasisKind::AdditiveSpline;
      cfg.seed = rep_seed;
      cfg.threads = 1;

      auto t0 = std::chrono::steady_clock::now();
      cfg.strategy = SearchStrategy::Full;
      const SearchReport full = full_search(data, "Y", Family::poisson(), cfg);
      full_sec[rep] = detail::seconds_since(t0);
      full_hit[rep] = detail::selected_equals(full, truth) ? 1 : 0;

      t0 = std::chrono::steady_clock::now();
      cfg.strategy = SearchStrategy::Stepwise;
      const SearchReport step = stepwise_search(data, "Y", Family::poisson(), cfg);
      step_sec[rep] = detail::seconds_since(t0);
      step_hit[rep] = detail::selected_equals(step, truth) ? 1 : 0;
    });

    DetectionRow row;
    row.n = n;
    for (int rep = 0; rep < reps; ++rep) {
      row.full_pct += full_hit[static_cast<std::size_t>(rep)];
      row.step_pct += step_hit[static_cast<std::size_t>(rep)];
      row.full_seconds += full_sec[static_cast<std::size_t>(rep)];
      row.step_seconds += step_sec[static_cast<std::size_t>(rep)];
    }
    row.full_pct *= 100.0 / reps;
    row.step_pct *= 100.0 / reps;
    rows.push_back(row);
  }
  return rows;
}

// Detection of {X2, X3} in the five-covariate logistic design with the
// parametric bootstrap test and linear predictors.
inline std::vector<DetectionRow> bench_fig4_rates(
    int reps, std::uint64_t master_seed,
    const std::vector<Eigen::Index>& n_list = {250, 500, 1000}, unsigned threads = 0,
    int bootstrap_reps = 199, double pi = 0.1) {
  const std::vector<std::string> truth = {"X2", "X3"};
  std::vector<DetectionRow> rows;
  for (const Eigen::Index n : n_list) {
    const std::uint64_t row_seed =
        substream_key(master_seed, "fig4-rates", static_cast<std::uint64_t>(n));
    std::vector<int> full_hit(static_cast<std::size_t>(reps), 0);
    std::vector<int> step_hit(static_cast<std::size_t>(reps), 0);
    std::vector<double> full_sec(static_cast<std::size_t>(reps), 0.0);
    std::vector<double> step_sec(static_cast<std::size_t>(reps), 0.0);

    parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t rep) {
      const std::uint64_t rep_seed = substream_key(row_seed, "rep", rep);
      const Dataset data = gen_fig4(n, rep_seed, pi);

      SearchConfig cfg;
      cfg.alpha = 0.05;
      cfg.method = TestMethod::Bootstrap;
      cfg.bootstrap_B = bootstrap_reps;
      cfg.basis.kind = BasisKind::Linear;
      cfg.seed = rep_seed;
      cfg.threads = 1;

      auto t0 = std::chrono::steady_clock::now();
      cfg.strategy = SearchStrategy::Full;
      const SearchReport full = full_search(data, "Y", Family::bernoulli(), cfg);
      full_sec[rep] = detail::seconds_since(t0);
      full_hit[rep] = detail::selected_equals(full, truth) ? 1 : 0;

      t0 = std::chrono::steady_clock::now();
      cfg.strategy = SearchStrategy::Stepwise;
      const SearchReport step = stepwise_search(data, "Y", Family::bernoulli(), cfg);
      step_sec[rep] = detail::seconds_since(t0);
      step_hit[rep] = detail::selected_equals(step, truth) ? 1 : 0;
    });

    DetectionRow row;
    row.n = n;
    for (int rep = 0; rep < reps; ++rep) {
      row.full_pct += full_hit[static_cast<std::size_t>(rep)];
      row.step_pct += step_hit[static_cast<std::size_t>(rep)];
      row.full_seconds += full_sec[static_cast<std::size_t>(rep)];
      row.step_seconds += step_sec[static_cast<std::size_t>(rep)];
    }
    row.full_pct *= 100.0 / reps;
    row.step_pct *= 100.0 / reps;
    rows.push_back(row);
  }
  return rows;
}

struct PopulationRow {
  std::string model;  // "x1", "x2", "full", "causal"
  double pearson_obs = 0.0;
  double pearson_shift5 = 0.0;
  double pearson_shift10 = 0.0;
  double loglik_obs = 0.0;
  double loglik_shift5 = 0.0;
  double loglik_shift10 = 0.0;
};

// Large-sample two-covariate design: Pearson risks and in/out-of-sample
// log-likelihoods for the single-covariate models, the saturated model and
// the causal coefficient vector, under the observational law and under
// covariate shifts of variance 5 and 10.
inline std::vector<PopulationRow> bench_fig1_population(std::uint64_t seed,
                                                        Eigen::Index n = 100000) {
  const Family family = Family::poisson();
  const Dataset obs = gen_fig1(n, seed);
  const std::vector<std::string> shift_vars = {"X1", "X2"};
  const Dataset shift5 = apply_shift(obs, 5.0, shift_vars, substream_key(seed, "shift", 5));
  const Dataset shift10 =
      apply_shift(obs, 10.0, shift_vars, substream_key(seed, "shift", 10));

  BasisSpec linear;
  linear.kind = BasisKind::Linear;

  const Design design_x1 = build_design(obs, {0}, linear);
  const Design design_x2 = build_design(obs, {1}, linear);
  const Design design_full = build_design(obs, {0, 1}, linear);

  const FitResult fit_x1 = fit_glm(family, design_x1, obs.target(), 0.0);
  const FitResult fit_x2 = fit_glm(family, design_x2, obs.target(), 0.0);
  const FitResult fit_full = fit_glm(family, design_full, obs.target(), 0.0);
  Eigen::VectorXd causal_beta(3);
  causal_beta << 0.0, 1.0, 0.0;

  struct Model {
    std::string name;
    const Design* design;
    Eigen::VectorXd beta;
  };
  const std::vector<Model> models = {{"x1", &design_x1, fit_x1.beta},
                                     {"x2", &design_x2, fit_x2.beta},
                                     {"full", &design_full, fit_full.beta},
                                     {"causal", &design_full, causal_beta}};

  std::vector<PopulationRow> rows;
  for (const auto& model : models) {
    PopulationRow row;
    row.model = model.name;
    const auto eval = [&](const Dataset& data, double& pearson, double& loglik) {
      const Eigen::MatrixXd basis = eval_basis(*model.design, data);
      const Eigen::VectorXd eta = basis * model.beta;
      pearson = pearson_statistic(family, data.target(), eta) / static_cast<double>(n);
      loglik = loglik_at(family, basis, data.target(), model.beta);
    };
    eval(obs, row.pearson_obs, row.loglik_obs);
    eval(shift5, row.pearson_shift5, row.loglik_shift5);
    eval(shift10, row.pearson_shift10, row.loglik_shift10);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace causalglm
