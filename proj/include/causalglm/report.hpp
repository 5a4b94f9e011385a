#pragma once

// Machine-readable run reports ("causal-glm/1" schema). Serialization is
// lossless: doubles round-trip exactly, absent values are JSON null, and
// equality of reports is equality of their serialized forms.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalglm/search.hpp"
#include "causalglm/version.hpp"

namespace causalglm {

struct ReportRecord {
  std::vector<std::string> subset;
  double loglik = 0.0;
  double bic = 0.0;
  double edf = 0.0;
  double lambda = 0.0;
  bool converged = false;
  bool separated = false;
  int iterations = 0;
  std::optional<TestResult> test;
  bool is_candidate = false;
  std::string note;
};

struct RunReport {
  std::string schema = kReportSchema;
  std::string version = kVersion;
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  double timing_sec = 0.0;
  std::int64_t n = 0;
  std::string target;
  std::vector<std::string> covariates;
  std::vector<ReportRecord> records;
  std::vector<std::vector<std::string>> candidates;
  std::optional<std::vector<std::string>> selected;
  std::vector<TraceEntry> trace;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);

  bool operator==(const RunReport& other) const { return to_json() == other.to_json(); }
};

namespace detail {

inline nlohmann::json json_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

inline double double_or_nan(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

inline nlohmann::json test_to_json(const TestResult& t) {
  return nlohmann::json{
      {"statistic", t.statistic},
      {"edf_used", t.edf_used},
      {"p_value", t.p_value},
      {"method", t.method == TestMethod::ChiSq ? "chisq" : "bootstrap"},
      {"bootstrap_reps", t.bootstrap_reps},
      {"accepted", t.accepted},
      {"alpha", t.alpha}};
}

inline TestResult test_from_json(const nlohmann::json& j) {
  TestResult t;
  t.statistic = j.at("statistic").get<double>();
  t.edf_used = j.at("edf_used").get<double>();
  t.p_value = j.at("p_value").get<double>();
  t.method = j.at("method").get<std::string>() == "chisq" ? TestMethod::ChiSq
                                                          : TestMethod::Bootstrap;
  t.bootstrap_reps = j.at("bootstrap_reps").get<int>();
  t.accepted = j.at("accepted").get<bool>();
  t.alpha = j.at("alpha").get<double>();
  return t;
}

}  // namespace detail

inline nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["schema"] = schema;
  j["version"] = version;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["timing_sec"] = timing_sec;
  j["n"] = n;
  j["target"] = target;
  j["covariates"] = covariates;

  nlohmann::json records_json = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json rec{{"subset", r.subset},
                       {"loglik", r.loglik},
                       {"bic", r.bic},
                       {"edf", r.edf},
                       {"lambda", r.lambda},
                       {"converged", r.converged},
                       {"separated", r.separated},
                       {"iterations", r.iterations},
                       {"is_candidate", r.is_candidate},
                       {"note", r.note}};
    rec["test"] = r.test ? detail::test_to_json(*r.test) : nlohmann::json(nullptr);
    records_json.push_back(std::move(rec));
  }
  j["records"] = std::move(records_json);

  j["candidates"] = candidates;
  j["selected"] = selected ? nlohmann::json(*selected) : nlohmann::json(nullptr);

  nlohmann::json trace_json = nlohmann::json::array();
  for (const auto& t : trace) {
    trace_json.push_back(nlohmann::json{{"phase", t.phase},
                                        {"action", t.action},
                                        {"variable", t.variable},
                                        {"p_value", detail::json_or_null(t.p_value)},
                                        {"bic", detail::json_or_null(t.bic)},
                                        {"note", t.note}});
  }
  j["trace"] = std::move(trace_json);
  return j;
}

inline RunReport RunReport::from_json(const nlohmann::json& j) {
  RunReport report;
  report.schema = j.at("schema").get<std::string>();
  report.version = j.at("version").get<std::string>();
  report.command = j.at("command").get<std::string>();
  report.config = j.at("config");
  report.seed = j.at("seed").get<std::uint64_t>();
  report.timing_sec = j.at("timing_sec").get<double>();
  report.n = j.at("n").get<std::int64_t>();
  report.target = j.at("target").get<std::string>();
  report.covariates = j.at("covariates").get<std::vector<std::string>>();

  for (const auto& rec : j.at("records")) {
    ReportRecord r;
    r.subset = rec.at("subset").get<std::vector<std::string>>();
    r.loglik = rec.at("loglik").get<double>();
    r.bic = rec.at("bic").get<double>();
    r.edf = rec.at("edf").get<double>();
    r.lambda = rec.at("lambda").get<double>();
    r.converged = rec.at("converged").get<bool>();
    r.separated = rec.at("separated").get<bool>();
    r.iterations = rec.at("iterations").get<int>();
    r.is_candidate = rec.at("is_candidate").get<bool>();
    r.note = rec.at("note").get<std::string>();
    if (!rec.at("test").is_null()) r.test = detail::test_from_json(rec.at("test"));
    report.records.push_back(std::move(r));
  }

  report.candidates = j.at("candidates").get<std::vector<std::vector<std::string>>>();
  if (!j.at("selected").is_null())
    report.selected = j.at("selected").get<std::vector<std::string>>();

  for (const auto& t : j.at("trace")) {
    TraceEntry entry;
    entry.phase = t.at("phase").get<int>();
    entry.action = t.at("action").get<std::string>();
    entry.variable = t.at("variable").get<std::string>();
    entry.p_value = detail::double_or_nan(t.at("p_value"));
    entry.bic = detail::double_or_nan(t.at("bic"));
    entry.note = t.at("note").get<std::string>();
    report.trace.push_back(std::move(entry));
  }
  return report;
}

// Assembles the per-record section of a report from a finished search.
inline void fill_report_from_search(RunReport& report, const SearchReport& search) {
  report.covariates = search.covariates;
  for (const auto& record : search.records) {
    ReportRecord r;
    r.subset = search.subset_names(record.subset);
    r.loglik = record.fit.loglik;
    r.bic = record.fit.bic;
    r.edf = record.fit.edf;
    r.lambda = record.fit.lambda;
    r.converged = record.fit.converged;
    r.separated = record.fit.separated;
    r.iterations = record.fit.iterations;
    r.test = record.test;
    r.is_candidate = record.is_candidate;
    r.note = record.note;
    report.records.push_back(std::move(r));
  }
  for (const auto& c : search.candidates) report.candidates.push_back(search.subset_names(c));
  if (search.selected) report.selected = search.subset_names(*search.selected);
  report.trace = search.trace;
}

}  // namespace causalglm
