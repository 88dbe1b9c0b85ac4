#pragma once

// ROC/AUC evaluation of score columns with DeLong variances.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cohort.hpp"
#include "config.hpp"
#include "sampler.hpp"

namespace distinct {

struct ScoredOutcome {
  std::vector<double> scores;
  std::vector<int> outcomes;  // 1 = case, 0 = control

  std::size_t cases() const { return static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), 1)); }
  std::size_t controls() const { return outcomes.size() - cases(); }
};

struct AucResult {
  double auc = 0.5;
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  std::size_t n_cases = 0;
  std::size_t n_controls = 0;

  double se() const { return std::sqrt(variance); }
};

namespace detail {

struct SplitScores {
  std::vector<double> cases;     // ascending
  std::vector<double> controls;  // ascending
};

inline SplitScores split(const ScoredOutcome& d) {
  if (d.scores.size() != d.outcomes.size()) throw std::invalid_argument("scores and outcomes differ in length");
  SplitScores s;
  for (std::size_t i = 0; i < d.scores.size(); ++i) {
    if (!std::isfinite(d.scores[i])) throw std::invalid_argument("non-finite score");
    if (d.outcomes[i] == 1)
      s.cases.push_back(d.scores[i]);
    else if (d.outcomes[i] == 0)
      s.controls.push_back(d.scores[i]);
    else
      throw std::invalid_argument("outcomes must be 0 or 1");
  }
  if (s.cases.empty() || s.controls.empty()) throw std::invalid_argument("degenerate outcome: need at least one case and one control");
  std::sort(s.cases.begin(), s.cases.end());
  std::sort(s.controls.begin(), s.controls.end());
  return s;
}

// Credit of `x` against every element of sorted `v`: #{v < x} + #{v == x}/2.
inline double credit_against(const std::vector<double>& v, double x) {
  const auto lo = std::lower_bound(v.begin(), v.end(), x);
  const auto hi = std::upper_bound(lo, v.end(), x);
  return static_cast<double>(lo - v.begin()) + 0.5 * static_cast<double>(hi - lo);
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

inline double sample_covariance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

// DeLong structural components in input order of the cases / controls.
struct Components {
  std::vector<double> per_case;     // V10
  std::vector<double> per_control;  // V01
};

inline Components components(const ScoredOutcome& d) {
  const auto s = split(d);
  Components c;
  const double nc = static_cast<double>(s.cases.size());
  const double nn = static_cast<double>(s.controls.size());
  for (std::size_t i = 0; i < d.scores.size(); ++i) {
    if (d.outcomes[i] == 1)
      c.per_case.push_back(credit_against(s.controls, d.scores[i]) / nn);
    else
      c.per_control.push_back((nc - credit_against(s.cases, d.scores[i])) / nc);
  }
  return c;
}

}  // namespace detail

/// Mann-Whitney AUC: P(case > control) + P(tie)/2 over all pairs.
inline double auc(const ScoredOutcome& data) {
  const auto s = detail::split(data);
  // Sum of credits is a half-integer count, so this equals exhaustive pair
  // counting exactly.
  double credit = 0.0;
  for (double x : s.cases) credit += detail::credit_against(s.controls, x);
  return credit / (static_cast<double>(s.cases.size()) * static_cast<double>(s.controls.size()));
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Empirical ROC: one point per distinct threshold, from (0,0) to (1,1).
/// Tied scores move diagonally, so the trapezoidal area is the
/// tie-half-credited AUC.
inline std::vector<RocPoint> roc_curve(const ScoredOutcome& data) {
  auto s = detail::split(data);
  std::vector<std::pair<double, int>> ordered;
  ordered.reserve(data.scores.size());
  for (std::size_t i = 0; i < data.scores.size(); ++i) ordered.emplace_back(data.scores[i], data.outcomes[i]);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double nc = static_cast<double>(s.cases.size());
  const double nn = static_cast<double>(s.controls.size());
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < ordered.size();) {
    const double threshold = ordered[i].first;
    while (i < ordered.size() && ordered[i].first == threshold) {
      if (ordered[i].second == 1) ++tp; else ++fp;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / nc});
  }
  return curve;
}

inline double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  return area;
}

/// DeLong variance S10/m + S01/n from the per-case and per-control
/// structural components (sample variances, divisor count - 1).
inline double delong_variance(const ScoredOutcome& data) {
  const auto c = detail::components(data);
  return detail::sample_variance(c.per_case) / static_cast<double>(c.per_case.size()) +
         detail::sample_variance(c.per_control) / static_cast<double>(c.per_control.size());
}

inline AucResult auc_result(const ScoredOutcome& data) {
  AucResult r;
  r.auc = auc(data);
  r.variance = delong_variance(data);
  r.n_cases = data.cases();
  r.n_controls = data.controls();
  const double half = 1.96 * std::sqrt(r.variance);
  r.ci_lo = std::clamp(r.auc - half, 0.0, 1.0);
  r.ci_hi = std::clamp(r.auc + half, 0.0, 1.0);
  return r;
}

/// Two-sided p-value of a standard normal statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

struct AucComparison {
  double z = 0.0;
  double p_value = 1.0;
};

/// Difference of AUCs measured on disjoint groups (covariance zero).
inline AucComparison compare_auc_independent(const AucResult& a, const AucResult& b) {
  const double var = a.variance + b.variance;
  if (var <= 0.0) {
    if (a.auc == b.auc) return {0.0, 1.0};
    throw std::invalid_argument("degenerate comparison: both variances are zero");
  }
  AucComparison c;
  c.z = (a.auc - b.auc) / std::sqrt(var);
  c.p_value = normal_two_sided_p(c.z);
  return c;
}

/// Paired DeLong test for two scores measured on the same subjects.
inline AucComparison compare_auc_paired(std::span<const double> score_a, std::span<const double> score_b,
                                        std::span<const int> outcomes) {
  if (score_a.size() != outcomes.size() || score_b.size() != outcomes.size())
    throw std::invalid_argument("compare_auc_paired: length mismatch");
  ScoredOutcome da{{score_a.begin(), score_a.end()}, {outcomes.begin(), outcomes.end()}};
  ScoredOutcome db{{score_b.begin(), score_b.end()}, {outcomes.begin(), outcomes.end()}};
  const auto ca = detail::components(da);
  const auto cb = detail::components(db);
  const double m = static_cast<double>(ca.per_case.size());
  const double n = static_cast<double>(ca.per_control.size());
  const double var_a = detail::sample_variance(ca.per_case) / m + detail::sample_variance(ca.per_control) / n;
  const double var_b = detail::sample_variance(cb.per_case) / m + detail::sample_variance(cb.per_control) / n;
  const double cov = detail::sample_covariance(ca.per_case, cb.per_case) / m +
                     detail::sample_covariance(ca.per_control, cb.per_control) / n;
  const double diff = auc(da) - auc(db);
  const double var = var_a + var_b - 2.0 * cov;
  if (var <= 0.0) {
    if (diff == 0.0) return {0.0, 1.0};
    throw std::invalid_argument("degenerate comparison: zero variance of the AUC difference");
  }
  AucComparison c;
  c.z = diff / std::sqrt(var);
  c.p_value = normal_two_sided_p(c.z);
  return c;
}

inline ScoredOutcome scored_rows(const Cohort& cohort, const std::string& score_col, const std::string& outcome_col,
                                 std::span<const std::size_t> rows) {
  const auto& s = cohort.score_column(score_col);
  const auto& o = cohort.outcome_column(outcome_col);
  ScoredOutcome d;
  d.scores.reserve(rows.size());
  d.outcomes.reserve(rows.size());
  for (auto r : rows) {
    d.scores.push_back(s.at(r));
    d.outcomes.push_back(o.at(r));
  }
  return d;
}

// Stratified tables ---------------------------------------------------------

struct StratumAucRow {
  std::string group;  // variable name, or "all"
  std::string level;  // level or bin label, or "Full Dataset"
  std::size_t n = 0;
  std::map<std::string, std::optional<AucResult>> by_score;  // nullopt: unavailable (single class)
};

struct StratifiedTable {
  std::vector<std::string> scores;
  std::string outcome;
  std::vector<StratumAucRow> rows;
};

/// Partitions rows by one schema variable: its bins (continuous) or levels
/// (categorical), in schema order. Out-of-range rows belong to no group.
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> group_rows(const Cohort& cohort,
                                                                               const CovariateSchema& schema,
                                                                               const std::string& variable) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  if (const auto* c = schema.find_continuous(variable)) {
    const auto& col = cohort.continuous.at(variable);
    groups.resize(c->bin_count());
    for (std::size_t b = 0; b < groups.size(); ++b) groups[b].first = c->bin_label(static_cast<int>(b + 1));
    for (std::size_t r = 0; r < cohort.size(); ++r) {
      try {
        groups[static_cast<std::size_t>(bin_value(*c, col[r]) - 1)].second.push_back(r);
      } catch (const BinRangeError&) {
      }
    }
  } else if (const auto* c = schema.find_categorical(variable)) {
    const auto& col = cohort.categorical.at(variable);
    for (const auto& l : c->levels) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < cohort.size(); ++r)
        if (col[r] == l.code) rows.push_back(r);
      groups.emplace_back(l.label, std::move(rows));
    }
  } else {
    throw std::invalid_argument("unknown variable '" + variable + "'");
  }
  return groups;
}

/// One row per level of each grouping variable plus a full-dataset row, with
/// an AucResult per score column.
inline StratifiedTable stratified_auc(const Cohort& cohort, const std::vector<std::string>& score_cols,
                                      const std::string& outcome_col, const CovariateSchema& schema,
                                      const std::vector<std::string>& group_vars) {
  for (const auto& s : score_cols) cohort.score_column(s);
  cohort.outcome_column(outcome_col);
  StratifiedTable table;
  table.scores = score_cols;
  table.outcome = outcome_col;
  auto make_row = [&](std::string group, std::string level, const std::vector<std::size_t>& rows) {
    StratumAucRow row{std::move(group), std::move(level), rows.size(), {}};
    for (const auto& s : score_cols) {
      auto d = scored_rows(cohort, s, outcome_col, rows);
      if (d.scores.empty() || d.cases() == 0 || d.controls() == 0)
        row.by_score[s] = std::nullopt;
      else
        row.by_score[s] = auc_result(d);
    }
    table.rows.push_back(std::move(row));
  };
  for (const auto& var : group_vars)
    for (const auto& [label, rows] : group_rows(cohort, schema, var)) make_row(var, label, rows);
  std::vector<std::size_t> all(cohort.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  make_row("all", "Full Dataset", all);
  return table;
}

// Size trajectories ---------------------------------------------------------

struct TrajectoryScore {
  std::string score;
  std::size_t replicates_used = 0;  // replicates with both classes present
  double mean_auc = 0.0;
  double mean_variance = 0.0;
  double ci_lo = 0.0;  // mean_auc -/+ 1.96 sqrt(mean_variance), clamped
  double ci_hi = 1.0;
  double replicate_sd = 0.0;
  std::vector<AucResult> replicates;
};

struct TrajectoryPoint {
  std::size_t requested_n = 0;
  std::size_t realized_n = 0;  // first replicate
  std::vector<TrajectoryScore> scores;
};

struct TrajectoryResult {
  std::vector<TrajectoryPoint> points;
};

/// For each scheduled size, draws config.replicates DISTINCT subsamples
/// (same seeds as assess_size) and evaluates every score column on them.
inline TrajectoryResult auc_trajectory(const AlignmentProblem& problem, const std::vector<std::size_t>& schedule,
                                       const std::vector<std::string>& score_cols, const std::string& outcome_col,
                                       const AlignmentConfig& config) {
  config.validate();
  for (const auto& s : score_cols) problem.source->score_column(s);
  problem.source->outcome_column(outcome_col);
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1]) throw std::invalid_argument("auc_trajectory: schedule must be strictly increasing");

  TrajectoryResult result;
  for (auto n : schedule) {
    TrajectoryPoint point;
    point.requested_n = n;
    std::vector<SubsampleResult> draws;
    for (int r = 0; r < config.replicates; ++r)
      draws.push_back(draw_subsample(problem.source_strata, problem.proportions, n, draw_seed_for(config, n, r)));
    point.realized_n = draws.front().realized_n;
    for (const auto& s : score_cols) {
      TrajectoryScore ts;
      ts.score = s;
      for (const auto& d : draws) {
        auto data = scored_rows(*problem.source, s, outcome_col, d.row_indices);
        if (data.cases() == 0 || data.controls() == 0) continue;
        ts.replicates.push_back(auc_result(data));
      }
      ts.replicates_used = ts.replicates.size();
      if (ts.replicates_used > 0) {
        std::vector<double> aucs;
        for (const auto& a : ts.replicates) {
          aucs.push_back(a.auc);
          ts.mean_variance += a.variance;
        }
        ts.mean_auc = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
        ts.mean_variance /= static_cast<double>(aucs.size());
        ts.replicate_sd = std::sqrt(detail::sample_variance(aucs));
        const double half = 1.96 * std::sqrt(ts.mean_variance);
        ts.ci_lo = std::clamp(ts.mean_auc - half, 0.0, 1.0);
        ts.ci_hi = std::clamp(ts.mean_auc + half, 0.0, 1.0);
      }
      point.scores.push_back(std::move(ts));
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

}  // namespace distinct
