#pragma once

// Stratified subsampling toward a target's joint stratum proportions, and the
// size search built on top of it.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "config.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace distinct {

/// Target stratum counts y_l over N_T. Quotas are computed from the counts
/// in exact integer arithmetic, so floor(n * y_l / N_T) never suffers from
/// rounding of the proportion.
struct TargetProportions {
  std::map<StratumKey, std::size_t> counts;  // only strata with y_l > 0
  std::size_t total = 0;

  double proportion(const StratumKey& key) const {
    auto it = counts.find(key);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
  }

  std::map<StratumKey, double> as_map() const {
    std::map<StratumKey, double> p;
    for (const auto& [k, y] : counts) p[k] = static_cast<double>(y) / static_cast<double>(total);
    return p;
  }

  std::size_t quota(const StratumKey& key, std::size_t n) const {
    auto it = counts.find(key);
    if (it == counts.end()) return 0;
    return static_cast<std::size_t>((static_cast<unsigned __int128>(n) * it->second) / total);
  }
};

inline TargetProportions target_proportions(const StratumTable& target) {
  if (target.total == 0) throw std::invalid_argument("target_proportions: empty target table");
  TargetProportions p;
  p.total = target.total;
  for (const auto& [key, members] : target.strata)
    if (!members.empty()) p.counts[key] = members.size();
  return p;
}

struct StratumDraw {
  std::size_t quota = 0;
  std::size_t drawn = 0;
  std::size_t available = 0;
  bool deficient() const { return drawn < quota; }
};

struct SubsampleResult {
  std::size_t requested_n = 0;
  std::size_t realized_n = 0;
  std::vector<std::size_t> row_indices;  // ascending source rows
  std::map<StratumKey, StratumDraw> per_stratum;  // every target stratum

  std::size_t deficient_strata() const {
    return static_cast<std::size_t>(std::count_if(per_stratum.begin(), per_stratum.end(),
                                                  [](const auto& kv) { return kv.second.deficient(); }));
  }
};

/// Draws min(x_l, floor(n p_l)) rows uniformly without replacement from each
/// target stratum. Stratum l uses the stream derive_seed(seed, {hash(l)}), so
/// a fixed seed yields nested draws as n grows.
inline SubsampleResult draw_subsample(const StratumTable& source, const TargetProportions& proportions,
                                      std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("draw_subsample: n must be >= 1");
  SubsampleResult result;
  result.requested_n = n;
  std::vector<std::size_t> pool;
  for (const auto& [key, y] : proportions.counts) {
    StratumDraw d;
    d.quota = proportions.quota(key, n);
    auto it = source.strata.find(key);
    d.available = it == source.strata.end() ? 0 : it->second.size();
    d.drawn = std::min(d.available, d.quota);
    if (d.drawn > 0) {
      pool = it->second;
      Rng rng(derive_seed(seed, {key.hash()}));
      // partial Fisher-Yates; the first `drawn` slots are the sample
      for (std::size_t i = 0; i < d.drawn; ++i) {
        const std::size_t pick = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[pick]);
      }
      result.row_indices.insert(result.row_indices.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(d.drawn));
    }
    result.per_stratum.emplace(key, d);
  }
  std::sort(result.row_indices.begin(), result.row_indices.end());
  result.realized_n = result.row_indices.size();
  return result;
}

/// Source and target prepared once for repeated draws: strata of both and
/// the target's included rows.
struct AlignmentProblem {
  const Cohort* source = nullptr;
  const Cohort* target = nullptr;
  const CovariateSchema* schema = nullptr;
  StratumTable source_strata;
  StratumTable target_strata;
  TargetProportions proportions;
  std::vector<std::size_t> target_rows;

  AlignmentProblem(const Cohort& src, const Cohort& tgt, const CovariateSchema& sch)
      : source(&src), target(&tgt), schema(&sch) {
    sch.validate();
    source_strata = build_strata(src, sch);
    target_strata = build_strata(tgt, sch);
    proportions = target_proportions(target_strata);
    target_rows = target_strata.members();
  }

  /// Smallest requested size at which every fillable target stratum is
  /// exhausted; beyond it the draw no longer changes.
  std::size_t saturation_size() const {
    std::size_t n_cap = 1;
    for (const auto& [key, y] : proportions.counts) {
      const std::size_t x = source_strata.count(key);
      if (x == 0) continue;
      const std::size_t need = (x * proportions.total + y - 1) / y;
      n_cap = std::max(n_cap, need);
    }
    return n_cap;
  }
};

struct ReplicateDraw {
  std::uint64_t draw_seed = 0;
  SubsampleResult subsample;
  AlignmentReport report;
};

struct SizeAssessment {
  std::size_t requested_n = 0;
  std::vector<ReplicateDraw> replicates;
  bool passed = false;
  std::vector<std::string> failing_variables;  // union over counted replicates

  std::size_t realized_n() const { return replicates.front().subsample.realized_n; }
  const AlignmentReport& report() const { return replicates.front().report; }
};

inline std::uint64_t draw_seed_for(const AlignmentConfig& config, std::size_t n, int replicate) {
  const std::uint64_t size_part = config.nesting == Nesting::nested ? 0 : n;
  return derive_seed(config.seed, {0x64726177ULL, size_part, static_cast<std::uint64_t>(replicate)});
}

inline std::uint64_t test_seed_for(const AlignmentConfig& config, std::size_t n, int replicate) {
  return derive_seed(config.seed, {0x74657374ULL, n, static_cast<std::uint64_t>(replicate)});
}

/// Draws config.replicates subsamples of requested size n, scores each with
/// compare_all and combines the verdicts per config.pass_rule.
inline SizeAssessment assess_size(const AlignmentProblem& problem, std::size_t n, const AlignmentConfig& config) {
  config.validate();
  if (n == 0) throw std::invalid_argument("assess_size: n must be >= 1");
  SizeAssessment a;
  a.requested_n = n;
  const int counted = config.pass_rule == PassRule::single_draw ? 1 : config.replicates;
  int passes = 0;
  for (int r = 0; r < counted; ++r) {
    ReplicateDraw d;
    d.draw_seed = draw_seed_for(config, n, r);
    d.subsample = draw_subsample(problem.source_strata, problem.proportions, n, d.draw_seed);
    if (d.subsample.realized_n == 0) {
      d.report.alpha = config.alpha;
      d.report.target_n = problem.target_rows.size();
      d.report.passed = false;
    } else {
      AlignmentConfig per_draw = config;
      per_draw.seed = test_seed_for(config, n, r);
      d.report = compare_all(*problem.source, d.subsample.row_indices, *problem.target, problem.target_rows,
                             *problem.schema, per_draw);
    }
    if (d.report.passed) ++passes;
    for (auto& v : d.report.failing_variables())
      if (std::find(a.failing_variables.begin(), a.failing_variables.end(), v) == a.failing_variables.end())
        a.failing_variables.push_back(v);
    a.replicates.push_back(std::move(d));
  }
  switch (config.pass_rule) {
    case PassRule::single_draw: a.passed = passes == 1; break;
    case PassRule::all_replicates: a.passed = passes == counted; break;
    case PassRule::majority: a.passed = 2 * passes > counted; break;
  }
  return a;
}

inline SizeAssessment assess_size(const Cohort& source, const Cohort& target, const CovariateSchema& schema,
                                  std::size_t n, const AlignmentConfig& config) {
  return assess_size(AlignmentProblem(source, target, schema), n, config);
}

/// Default requested-size grid for sweeps.
inline std::vector<std::size_t> default_schedule() {
  return {279, 559, 1038, 2019, 3998, 5981, 7981, 9974, 11963, 13963, 15965, 17958};
}

struct SweepResult {
  std::vector<std::size_t> schedule;
  std::vector<SizeAssessment> assessments;
  std::optional<std::size_t> max_aligned_requested_n;
  std::optional<std::size_t> max_aligned_realized_n;
};

inline SweepResult sweep(const AlignmentProblem& problem, const std::vector<std::size_t>& schedule,
                         const AlignmentConfig& config) {
  if (schedule.empty()) throw std::invalid_argument("sweep: empty schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] == 0) throw std::invalid_argument("sweep: sizes must be >= 1");
    if (i && schedule[i] <= schedule[i - 1]) throw std::invalid_argument("sweep: schedule must be strictly increasing");
  }
  SweepResult result;
  result.schedule = schedule;
  for (auto n : schedule) {
    auto a = assess_size(problem, n, config);
    if (a.passed && (!result.max_aligned_realized_n || a.realized_n() >= *result.max_aligned_realized_n)) {
      result.max_aligned_realized_n = a.realized_n();
      result.max_aligned_requested_n = n;
    }
    result.assessments.push_back(std::move(a));
  }
  return result;
}

struct SizeProbe {
  std::size_t requested_n = 0;
  std::size_t realized_n = 0;
  bool passed = false;
};

struct MaxSizeResult {
  std::optional<std::size_t> n_star;        // largest passing requested size
  std::optional<SizeAssessment> best;       // assessment at n_star
  std::optional<SizeAssessment> diagnostics;  // assessment at the start size when nothing passed
  bool availability_capped = false;         // n_star reached the saturation size
  std::size_t start_n = 0;
  std::size_t saturation_n = 0;
  std::vector<SizeProbe> probes;            // in evaluation order
};

/// Doubles the requested size from min(N_T, 256) until the verdict fails
/// (or the draw saturates), then bisects between the last pass and the
/// first failure down to a resolution of one.
inline MaxSizeResult max_aligned_size(const AlignmentProblem& problem, const AlignmentConfig& config) {
  config.validate();
  MaxSizeResult result;
  result.start_n = std::min<std::size_t>(problem.proportions.total, 256);
  result.saturation_n = std::max(problem.saturation_size(), result.start_n);

  std::map<std::size_t, SizeAssessment> memo;
  auto probe = [&](std::size_t n) -> const SizeAssessment& {
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    auto a = assess_size(problem, n, config);
    result.probes.push_back({n, a.realized_n(), a.passed});
    return memo.emplace(n, std::move(a)).first->second;
  };

  std::size_t n = result.start_n;
  if (!probe(n).passed) {
    result.diagnostics = memo.at(n);
    return result;
  }
  std::size_t lo = n;
  std::optional<std::size_t> hi;
  while (!hi) {
    if (lo >= result.saturation_n) {
      result.availability_capped = true;
      break;
    }
    n = std::min(lo * 2, result.saturation_n);
    if (probe(n).passed)
      lo = n;
    else
      hi = n;
  }
  while (hi && *hi - lo > 1) {
    const std::size_t mid = lo + (*hi - lo) / 2;
    if (probe(mid).passed)
      lo = mid;
    else
      hi = mid;
  }
  result.n_star = lo;
  result.best = memo.at(lo);
  return result;
}

}  // namespace distinct
