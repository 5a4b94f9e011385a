#pragma once

// Causal-parent search. Every candidate covariate subset (plus an intercept)
// is fitted by penalized maximum likelihood and its Pearson dispersion is
// tested two-sided; subsets whose test cannot be rejected are candidates,
// and the final estimate is the candidate minimizing BIC. The stepwise
// variant grows the model on dispersion p-values (phase 1) and then strips
// superfluous variables by BIC (phase 2).
//
// Subset evaluations run in parallel over an immutable dataset; results are
// aggregated in a canonical order, so reports are identical for any thread
// count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "causalglm/basis.hpp"
#include "causalglm/dataset.hpp"
#include "causalglm/disptest.hpp"
#include "causalglm/fit.hpp"
#include "causalglm/parallel.hpp"

namespace causalglm {

enum class SearchStrategy { Full, Stepwise };

struct SearchConfig {
  double alpha = 0.05;
  TestMethod method = TestMethod::ChiSq;
  BasisSpec basis;
  SearchStrategy strategy = SearchStrategy::Full;
  int bootstrap_B = 199;
  std::uint64_t seed = 0;
  std::optional<int> max_subset_size;
  std::vector<double> lambda_grid;  // empty = default grid (splines only)
  bool force_chisq = false;         // allow chi-squared outside Poisson
  unsigned threads = 0;             // 0 = worker_count()
};

struct CandidateRecord {
  std::vector<int> subset;  // sorted covariate indices
  FitResult fit;
  std::optional<TestResult> test;
  bool is_candidate = false;
  std::string note;  // failure note when the fit could not be evaluated
};

struct TraceEntry {
  int phase = 0;             // 1 = forward, 2 = backward
  std::string action;        // "start", "add", "remove", "skip", "stop"
  std::string variable;
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

struct SearchReport {
  std::vector<std::string> covariates;            // index -> name
  std::vector<CandidateRecord> records;
  std::vector<std::vector<int>> candidates;       // accepted subsets
  std::optional<std::vector<int>> selected;
  std::vector<TraceEntry> trace;                  // stepwise decisions

  std::vector<std::string> subset_names(const std::vector<int>& subset) const {
    std::vector<std::string> out;
    for (int j : subset) out.push_back(covariates[static_cast<std::size_t>(j)]);
    return out;
  }
};

// BIC refinement: argmin of fit.bic over candidate records; ties broken by
// smaller subset, then lexicographic index order.
inline std::optional<std::vector<int>> bic_refine(
    const std::vector<CandidateRecord>& records) {
  const CandidateRecord* best = nullptr;
  for (const auto& record : records) {
    if (!record.is_candidate) continue;
    if (!best) {
      best = &record;
      continue;
    }
    if (record.fit.bic < best->fit.bic ||
        (record.fit.bic == best->fit.bic &&
         (record.subset.size() < best->subset.size() ||
          (record.subset.size() == best->subset.size() && record.subset < best->subset))))
      best = &record;
  }
  if (!best) return std::nullopt;
  return best->subset;
}

namespace detail {

inline std::uint64_t subset_stream_index(const std::vector<int>& subset) {
  std::uint64_t key = 0x5851F42D4C957F2DULL;
  for (int j : subset) key = mix_u64(key, static_cast<std::uint64_t>(j) + 1);
  return key;
}

// Fits and tests one subset; fit or design failures become rejected records.
inline CandidateRecord evaluate_subset(const Family& family, const DesignBuilder& builder,
                                       const Eigen::VectorXd& y,
                                       std::vector<int> subset, const SearchConfig& cfg,
                                       bool run_test, unsigned inner_threads) {
  std::sort(subset.begin(), subset.end());
  CandidateRecord record;
  record.subset = subset;
  try {
    const Design design = builder.build(subset);
    if (cfg.basis.kind == BasisKind::Linear) {
      record.fit = fit_glm(family, design, y, 0.0);
    } else {
      const auto grid = cfg.lambda_grid.empty() ? default_lambda_grid() : cfg.lambda_grid;
      auto [lambda, fit] = select_lambda(family, design, y, grid);
      record.fit = std::move(fit);
      record.fit.lambda = lambda;
    }
    if (record.fit.converged && run_test) {
      if (cfg.method == TestMethod::ChiSq) {
        record.test = chisq_test(family, record.fit, y, cfg.alpha, cfg.force_chisq);
      } else {
        record.test = bootstrap_test(
            family, record.fit, design, y, cfg.alpha, cfg.bootstrap_B,
            substream_key(cfg.seed, "test", subset_stream_index(subset)), inner_threads);
      }
    }
  } catch (const std::exception& error) {
    record.note = error.what();
    record.fit.converged = false;
    record.is_candidate = false;
    return record;
  }
  record.is_candidate =
      record.fit.converged && record.test.has_value() && record.test->accepted;
  return record;
}

// All subsets up to max_size, in canonical (size, lexicographic) order.
inline void enumerate_subsets(int p, std::optional<int> max_size,
                              std::vector<std::vector<int>>& out) {
  const int cap = max_size ? std::min(*max_size, p) : p;
  for (int s = 0; s <= cap; ++s) {
    std::vector<int> idx(static_cast<std::size_t>(s));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      out.push_back(idx);
      int i = s - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == p - s + i) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < s; ++j)
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

}  // namespace detail

// Exhaustive search over all covariate subsets (optionally capped in size).
inline SearchReport full_search(const Dataset& data, const std::string& target,
                                const Family& family, const SearchConfig& cfg) {
  Dataset view = data;
  view.target_name = target;
  const Eigen::VectorXd& y = view.target();

  SearchReport report;
  report.covariates = view.covariate_names();
  const int p = static_cast<int>(report.covariates.size());
  if (p > 25 && !cfg.max_subset_size)
    throw std::invalid_argument(
        "full_search: more than 25 covariates; set max_subset_size or use the "
        "stepwise strategy");

  std::vector<std::vector<int>> subsets;
  detail::enumerate_subsets(p, cfg.max_subset_size, subsets);

  DesignBuilder builder(view, cfg.basis);
  builder.prepare({});

  const unsigned threads = cfg.threads == 0 ? worker_count() : cfg.threads;
  report.records.resize(subsets.size());
  parallel_for(subsets.size(), threads, [&](std::size_t k) {
    report.records[k] =
        detail::evaluate_subset(family, builder, y, subsets[k], cfg, true, 1);
  });

  for (const auto& record : report.records)
    if (record.is_candidate) report.candidates.push_back(record.subset);
  report.selected = bic_refine(report.records);
  return report;
}

// Stepwise search: phase 1 grows the model while the dispersion p-value
// improves or stays above alpha; phase 2 removes variables while BIC
// improves. The phase-2 terminal model is the selection.
inline SearchReport stepwise_search(const Dataset& data, const std::string& target,
                                    const Family& family, const SearchConfig& cfg) {
  Dataset view = data;
  view.target_name = target;
  const Eigen::VectorXd& y = view.target();

  SearchReport report;
  report.covariates = view.covariate_names();
  const int p = static_cast<int>(report.covariates.size());

  DesignBuilder builder(view, cfg.basis);
  builder.prepare({});

  const unsigned threads = cfg.threads == 0 ? worker_count() : cfg.threads;

  std::map<std::vector<int>, std::size_t> seen;
  auto remember = [&](CandidateRecord record) -> const CandidateRecord& {
    auto it = seen.find(record.subset);
    if (it != seen.end()) {
      // Keep the earlier record unless this one adds a test result.
      auto& existing = report.records[it->second];
      if (!existing.test && record.test) existing = std::move(record);
      return report.records[it->second];
    }
    report.records.push_back(std::move(record));
    seen.emplace(report.records.back().subset, report.records.size() - 1);
    return report.records.back();
  };

  auto name_of = [&](int j) { return report.covariates[static_cast<std::size_t>(j)]; };

  // In bootstrap mode the dispersion test is expensive, so phase 2 fits are
  // evaluated without tests; the terminal model is always tested.
  const bool test_in_phase2 = cfg.method == TestMethod::ChiSq;

  // Phase 1: forward, driven by dispersion p-values.
  std::vector<int> current;
  const CandidateRecord& base =
      remember(detail::evaluate_subset(family, builder, y, current, cfg, true, threads));
  double current_p = base.test ? base.test->p_value : -1.0;
  {
    TraceEntry entry;
    entry.phase = 1;
    entry.action = "start";
    entry.p_value = current_p;
    entry.bic = base.fit.bic;
    report.trace.push_back(entry);
  }

  while (static_cast<int>(current.size()) < p) {
    std::vector<int> additions;
    for (int j = 0; j < p; ++j)
      if (std::find(current.begin(), current.end(), j) == current.end())
        additions.push_back(j);

    std::vector<CandidateRecord> trials(additions.size());
    parallel_for(additions.size(), threads, [&](std::size_t k) {
      auto subset = current;
      subset.push_back(additions[k]);
      trials[k] = detail::evaluate_subset(family, builder, y, subset, cfg, true, 1);
    });

    int best = -1;
    double best_p = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < additions.size(); ++k) {
      const auto& trial = trials[k];
      if (!trial.fit.converged || !trial.test) {
        TraceEntry entry;
        entry.phase = 1;
        entry.action = "skip";
        entry.variable = name_of(additions[k]);
        entry.note = trial.note.empty() ? "fit did not converge" : trial.note;
        report.trace.push_back(entry);
        remember(trials[k]);
        continue;
      }
      remember(trials[k]);
      if (trial.test->p_value > best_p) {
        best_p = trial.test->p_value;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) break;  // nothing fit this round

    if (best_p > current_p || best_p > cfg.alpha) {
      current.push_back(additions[static_cast<std::size_t>(best)]);
      std::sort(current.begin(), current.end());
      current_p = best_p;
      TraceEntry entry;
      entry.phase = 1;
      entry.action = "add";
      entry.variable = name_of(additions[static_cast<std::size_t>(best)]);
      entry.p_value = best_p;
      report.trace.push_back(entry);
    } else {
      TraceEntry entry;
      entry.phase = 1;
      entry.action = "stop";
      entry.p_value = best_p;
      entry.note = "max p-value below current and below alpha";
      report.trace.push_back(entry);
      break;
    }
  }

  // Phase 2: backward, driven by BIC.
  const CandidateRecord* current_record = nullptr;
  {
    auto it = seen.find(current);
    current_record = &report.records[it->second];
  }
  double current_bic = current_record->fit.bic;
  {
    TraceEntry entry;
    entry.phase = 2;
    entry.action = "start";
    entry.bic = current_bic;
    report.trace.push_back(entry);
  }

  while (!current.empty()) {
    std::vector<CandidateRecord> trials(current.size());
    parallel_for(current.size(), threads, [&](std::size_t k) {
      std::vector<int> subset;
      for (std::size_t m = 0; m < current.size(); ++m)
        if (m != k) subset.push_back(current[m]);
      trials[k] =
          detail::evaluate_subset(family, builder, y, subset, cfg, test_in_phase2, 1);
    });

    int best = -1;
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < current.size(); ++k) {
      remember(trials[k]);
      if (!trials[k].fit.converged) continue;
      if (trials[k].fit.bic < best_bic) {
        best_bic = trials[k].fit.bic;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) break;

    if (best_bic < current_bic) {
      const int removed = current[static_cast<std::size_t>(best)];
      current.erase(current.begin() + best);
      current_bic = best_bic;
      TraceEntry entry;
      entry.phase = 2;
      entry.action = "remove";
      entry.variable = name_of(removed);
      entry.bic = best_bic;
      report.trace.push_back(entry);
    } else {
      TraceEntry entry;
      entry.phase = 2;
      entry.action = "stop";
      entry.bic = best_bic;
      entry.note = "no removal improves BIC";
      report.trace.push_back(entry);
      break;
    }
  }

  // The terminal model always carries a dispersion test.
  {
    auto it = seen.find(current);
    CandidateRecord& terminal = report.records[it->second];
    if (!terminal.test && terminal.fit.converged) {
      CandidateRecord retested =
          detail::evaluate_subset(family, builder, y, current, cfg, true, threads);
      terminal = std::move(retested);
    }
  }

  for (const auto& record : report.records)
    if (record.is_candidate) report.candidates.push_back(record.subset);
  std::sort(report.candidates.begin(), report.candidates.end(),
            [](const auto& a, const auto& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  report.selected = current;
  return report;
}

inline SearchReport run_search(const Dataset& data, const std::string& target,
                               const Family& family, const SearchConfig& cfg) {
  return cfg.strategy == SearchStrategy::Full ? full_search(data, target, family, cfg)
                                              : stepwise_search(data, target, family, cfg);
}

}  // namespace causalglm
