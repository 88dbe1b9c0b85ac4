#pragma once

// JSON serialization of results, and plain-text / CSV renderings of that
// JSON. Text output is always derived from the JSON form.

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cohort.hpp"
#include "eval.hpp"
#include "metrics.hpp"
#include "sampler.hpp"

namespace distinct {

using nlohmann::json;

inline std::string to_string(VariableKind k) { return k == VariableKind::continuous ? "continuous" : "categorical"; }

inline json to_json(const LoadReport& r) {
  json ex = json::array();
  for (const auto& e : r.excluded) ex.push_back({{"line", e.line}, {"reason", e.reason}});
  return {{"rows_read", r.rows_read}, {"rows_loaded", r.rows_loaded}, {"excluded", ex}};
}

inline json to_json(const TestResult& t) {
  json j{{"method", to_string(t.method)}, {"statistic", t.statistic}, {"p_value", t.p_value},
         {"n_a", t.n_a}, {"n_b", t.n_b}};
  j["permutations"] = t.permutations_used ? json(*t.permutations_used) : json(nullptr);
  return j;
}

inline json to_json(const AlignmentReport& r) {
  json tests = json::array();
  for (const auto& t : r.tests) {
    json e = to_json(t.test);
    e["variable"] = t.variable;
    e["kind"] = to_string(t.kind);
    e["passed"] = t.passed;
    tests.push_back(std::move(e));
  }
  return {{"alpha", r.alpha},         {"source_n", r.source_n}, {"target_n", r.target_n},
          {"num_tests", r.num_tests()}, {"passed", r.passed},     {"failing_variables", r.failing_variables()},
          {"tests", tests}};
}

inline json to_json(const SubsampleResult& s, bool with_rows = true) {
  json strata = json::array();
  for (const auto& [key, d] : s.per_stratum)
    strata.push_back({{"key", key.codes},
                      {"label", key.to_string()},
                      {"quota", d.quota},
                      {"drawn", d.drawn},
                      {"available", d.available},
                      {"deficient", d.deficient()}});
  json j{{"requested_n", s.requested_n},
         {"realized_n", s.realized_n},
         {"deficient_strata", s.deficient_strata()},
         {"strata", strata}};
  if (with_rows) j["row_indices"] = s.row_indices;
  return j;
}

inline json to_json(const SizeAssessment& a) {
  json reps = json::array();
  for (const auto& r : a.replicates)
    reps.push_back({{"draw_seed", r.draw_seed},
                    {"realized_n", r.subsample.realized_n},
                    {"deficient_strata", r.subsample.deficient_strata()},
                    {"report", to_json(r.report)}});
  return {{"requested_n", a.requested_n}, {"realized_n", a.realized_n()}, {"passed", a.passed},
          {"failing_variables", a.failing_variables}, {"replicates", reps}};
}

inline json optional_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const SweepResult& s) {
  json assessments = json::array();
  for (const auto& a : s.assessments) assessments.push_back(to_json(a));
  return {{"schedule", s.schedule},
          {"max_aligned_requested_n", optional_json(s.max_aligned_requested_n)},
          {"max_aligned_realized_n", optional_json(s.max_aligned_realized_n)},
          {"assessments", assessments}};
}

inline json to_json(const MaxSizeResult& m) {
  json probes = json::array();
  for (const auto& p : m.probes)
    probes.push_back({{"requested_n", p.requested_n}, {"realized_n", p.realized_n}, {"passed", p.passed}});
  json j{{"n_star", optional_json(m.n_star)},
         {"realized_n", m.best ? json(m.best->realized_n()) : json(nullptr)},
         {"availability_capped", m.availability_capped},
         {"start_n", m.start_n},
         {"saturation_n", m.saturation_n},
         {"probes", probes}};
  j["best"] = m.best ? to_json(*m.best) : json(nullptr);
  j["diagnostics"] = m.diagnostics ? to_json(*m.diagnostics) : json(nullptr);
  return j;
}

inline json to_json(const AucResult& a) {
  return {{"auc", a.auc},     {"variance", a.variance},     {"se", a.se()},          {"ci_lo", a.ci_lo},
          {"ci_hi", a.ci_hi}, {"n_cases", a.n_cases}, {"n_controls", a.n_controls}};
}

inline json to_json(const StratifiedTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json scores = json::object();
    for (const auto& [name, res] : r.by_score) scores[name] = res ? to_json(*res) : json(nullptr);
    rows.push_back({{"group", r.group}, {"level", r.level}, {"n", r.n}, {"scores", scores}});
  }
  return {{"scores", t.scores}, {"outcome", t.outcome}, {"rows", rows},
          {"notes", json::array({"values are AUC +/- DeLong standard error; null marks a stratum without both classes"})}};
}

inline json to_json(const TrajectoryResult& t) {
  json points = json::array();
  for (const auto& p : t.points) {
    json scores = json::array();
    for (const auto& s : p.scores) {
      json reps = json::array();
      for (const auto& r : s.replicates) reps.push_back(to_json(r));
      scores.push_back({{"score", s.score},
                        {"replicates_used", s.replicates_used},
                        {"mean_auc", s.replicates_used ? json(s.mean_auc) : json(nullptr)},
                        {"mean_variance", s.mean_variance},
                        {"ci_lo", s.ci_lo},
                        {"ci_hi", s.ci_hi},
                        {"replicate_sd", s.replicate_sd},
                        {"replicates", reps}});
    }
    points.push_back({{"requested_n", p.requested_n}, {"realized_n", p.realized_n}, {"scores", scores}});
  }
  return {{"points", points}};
}

// Renderings ----------------------------------------------------------------

inline std::string format_p(double p) {
  if (p < 1e-3) return "<1e-3";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", p);
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

namespace detail {
inline std::string method_title(const std::string& m) { return m == "ks_asymptotic" ? "K-S" : "Wasserstein"; }

inline void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) line += "  ";
      line += rows[i][c];
      if (c + 1 < rows[i].size()) line += std::string(width[c] - rows[i][c].size(), ' ');
    }
    out << line << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
}
}  // namespace detail

/// One row per (variable, method) from an AlignmentReport JSON.
inline void render_alignment_text(std::ostream& out, const json& report) {
  std::vector<std::vector<std::string>> rows{{"variable", "method", "statistic", "p", "verdict"}};
  for (const auto& t : report.at("tests"))
    rows.push_back({t.at("variable").get<std::string>(), detail::method_title(t.at("method").get<std::string>()),
                    format_fixed(t.at("statistic").get<double>(), 4), format_p(t.at("p_value").get<double>()),
                    t.at("passed").get<bool>() ? "pass" : "FAIL"});
  detail::print_table(out, rows);
  out << "alpha " << report.at("alpha").get<double>() << ", " << report.at("num_tests").get<std::size_t>()
      << " tests (uncorrected), source n " << report.at("source_n").get<std::size_t>() << ", target n "
      << report.at("target_n").get<std::size_t>() << ": " << (report.at("passed").get<bool>() ? "ALIGNED" : "NOT ALIGNED")
      << '\n';
}

/// Size-by-variable p-value grid per test method, from a SweepResult JSON
/// (first replicate of each size). "method verdict" covers that method's
/// tests on that replicate; "overall" is the size's combined verdict.
inline void render_sweep_text(std::ostream& out, const json& sweep) {
  const auto& assessments = sweep.at("assessments");
  if (assessments.empty()) return;
  std::vector<std::string> methods, variables;
  for (const auto& a : assessments)
    for (const auto& t : a.at("replicates").at(0).at("report").at("tests")) {
      const auto m = t.at("method").get<std::string>();
      const auto v = t.at("variable").get<std::string>();
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
      if (std::find(variables.begin(), variables.end(), v) == variables.end()) variables.push_back(v);
    }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"test", "requested", "realized"};
  header.insert(header.end(), variables.begin(), variables.end());
  header.push_back("method verdict");
  header.push_back("overall");
  rows.push_back(header);
  for (const auto& m : methods) {
    for (const auto& a : assessments) {
      std::vector<std::string> row{detail::method_title(m), std::to_string(a.at("requested_n").get<std::size_t>()),
                                   std::to_string(a.at("realized_n").get<std::size_t>())};
      bool method_pass = true;
      for (const auto& v : variables) {
        std::string cell = "-";
        for (const auto& t : a.at("replicates").at(0).at("report").at("tests"))
          if (t.at("variable") == v && t.at("method") == m) {
            cell = format_p(t.at("p_value").get<double>());
            method_pass = method_pass && t.at("passed").get<bool>();
          }
        row.push_back(cell);
      }
      row.push_back(method_pass ? "pass" : "FAIL");
      row.push_back(a.at("passed").get<bool>() ? "pass" : "FAIL");
      rows.push_back(std::move(row));
    }
  }
  detail::print_table(out, rows);
  const auto& best = sweep.at("max_aligned_realized_n");
  out << "largest aligned realized size: " << (best.is_null() ? std::string("none") : std::to_string(best.get<std::size_t>()))
      << '\n';
}

/// Group-by-score AUC grid from a StratifiedTable JSON.
inline void render_stratified_text(std::ostream& out, const json& table) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"group", "level (n)"};
  for (const auto& s : table.at("scores")) header.push_back(s.get<std::string>());
  rows.push_back(header);
  for (const auto& r : table.at("rows")) {
    std::vector<std::string> row{r.at("group").get<std::string>(),
                                 r.at("level").get<std::string>() + " (" + std::to_string(r.at("n").get<std::size_t>()) + ")"};
    for (const auto& s : table.at("scores")) {
      const auto& res = r.at("scores").at(s.get<std::string>());
      row.push_back(res.is_null() ? "n/a" : format_fixed(res.at("auc").get<double>(), 3) + " +/- " +
                                                format_fixed(res.at("se").get<double>(), 3));
    }
    rows.push_back(std::move(row));
  }
  detail::print_table(out, rows);
  out << "(+/- is the DeLong standard error; n/a marks strata lacking cases or controls)\n";
}

/// Plot-ready trajectory CSV: one row per (size, score).
inline void render_trajectory_csv(std::ostream& out, const json& trajectory) {
  out << "requested_n,realized_n,score,auc,lo,hi\n";
  for (const auto& p : trajectory.at("points"))
    for (const auto& s : p.at("scores")) {
      out << p.at("requested_n").get<std::size_t>() << ',' << p.at("realized_n").get<std::size_t>() << ','
          << csv::escape(s.at("score").get<std::string>()) << ',';
      if (s.at("mean_auc").is_null())
        out << ",,\n";
      else
        out << csv::format_double(s.at("mean_auc").get<double>()) << ','
            << csv::format_double(s.at("ci_lo").get<double>()) << ','
            << csv::format_double(s.at("ci_hi").get<double>()) << '\n';
    }
}

/// One-column CSV of the ids of the subsampled source rows.
inline void write_subsample_ids(std::ostream& out, const Cohort& source, const SubsampleResult& s) {
  out << "id\n";
  for (auto r : s.row_indices) out << csv::escape(source.id(r)) << '\n';
}

}  // namespace distinct
