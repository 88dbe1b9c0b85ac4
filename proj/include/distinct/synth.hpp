#pragma once

// Seeded synthetic cohorts with independent covariate marginals, and
// binormal score/outcome columns with a prescribed AUC.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "json.hpp"

#include "cohort.hpp"
#include "rng.hpp"

namespace distinct {

struct ContinuousDist {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  std::optional<double> lower;  // truncation bounds, inclusive
  std::optional<double> upper;
};

struct CategoricalDist {
  std::string name;
  std::vector<std::pair<std::string, double>> levels;  // label, probability
};

struct PopulationSpec {
  std::string name = "synthetic";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<ContinuousDist> continuous;
  std::vector<CategoricalDist> categorical;

  void validate() const {
    if (n < 1) throw std::invalid_argument("population spec: n must be >= 1");
    for (const auto& c : continuous) {
      if (!(c.sd > 0.0)) throw std::invalid_argument(c.name + ": sd must be > 0");
      if (c.lower && c.upper && !(*c.lower < *c.upper))
        throw std::invalid_argument(c.name + ": truncation bounds must satisfy lower < upper");
    }
    for (const auto& c : categorical) {
      double total = 0.0;
      for (const auto& [label, p] : c.levels) {
        if (!(p >= 0.0)) throw std::invalid_argument(c.name + ": negative probability for " + label);
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument(c.name + ": level probabilities sum to " + std::to_string(total) + ", not 1");
    }
  }
};

inline PopulationSpec parse_population_spec(const nlohmann::json& j) {
  PopulationSpec s;
  try {
    s.name = j.value("name", std::string("synthetic"));
    s.n = j.at("n").get<std::size_t>();
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.value("continuous", nlohmann::json::array())) {
      ContinuousDist d;
      d.name = c.at("name").get<std::string>();
      d.mean = c.at("mean").get<double>();
      d.sd = c.at("sd").get<double>();
      if (c.contains("lower")) d.lower = c.at("lower").get<double>();
      if (c.contains("upper")) d.upper = c.at("upper").get<double>();
      s.continuous.push_back(std::move(d));
    }
    for (const auto& c : j.value("categorical", nlohmann::json::array())) {
      CategoricalDist d;
      d.name = c.at("name").get<std::string>();
      for (const auto& l : c.at("levels")) d.levels.emplace_back(l.at("label").get<std::string>(), l.at("p").get<double>());
      s.categorical.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("population spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline PopulationSpec load_population_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open population spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("population spec " + path + ": " + e.what());
  }
  return parse_population_spec(j);
}

namespace detail {
inline double truncated_normal(Rng& rng, const ContinuousDist& d) {
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const double x = rng.normal(d.mean, d.sd);
    if ((!d.lower || x >= *d.lower) && (!d.upper || x <= *d.upper)) return x;
  }
  throw std::invalid_argument(d.name + ": truncation window has negligible mass");
}
}  // namespace detail

/// Draws spec.n independent rows from one stream seeded by spec.seed. Every
/// schema variable must be described by the spec and vice versa.
inline Cohort generate_cohort(const PopulationSpec& spec, const CovariateSchema& schema) {
  spec.validate();
  schema.validate();
  for (const auto& c : spec.continuous)
    if (!schema.find_continuous(c.name)) throw std::invalid_argument(c.name + ": not a continuous schema variable");
  struct Cat {
    const CategoricalDist* dist;
    std::vector<int> codes;
  };
  std::vector<Cat> cats;
  for (const auto& c : spec.categorical) {
    const auto* sc = schema.find_categorical(c.name);
    if (!sc) throw std::invalid_argument(c.name + ": not a categorical schema variable");
    Cat cat{&c, {}};
    for (const auto& [label, _] : c.levels) {
      auto code = sc->code_of(label);
      if (!code) throw std::invalid_argument(c.name + ": level '" + label + "' not in schema");
      cat.codes.push_back(*code);
    }
    cats.push_back(std::move(cat));
  }
  if (spec.continuous.size() + spec.categorical.size() != schema.label_order.size())
    throw std::invalid_argument("population spec must describe every schema variable exactly once");

  Cohort cohort;
  cohort.name = spec.name;
  cohort.rows = spec.n;
  cohort.report.rows_read = cohort.report.rows_loaded = spec.n;
  for (const auto& c : spec.continuous) cohort.continuous[c.name].reserve(spec.n);
  for (const auto& c : spec.categorical) cohort.categorical[c.name].reserve(spec.n);
  cohort.ids.reserve(spec.n);

  Rng rng(spec.seed);
  for (std::size_t r = 0; r < spec.n; ++r) {
    auto digits = std::to_string(r + 1);
    cohort.ids.push_back(spec.name + "-" + std::string(digits.size() < 7 ? 7 - digits.size() : 0, '0') + digits);
    for (const auto& c : spec.continuous) cohort.continuous[c.name].push_back(detail::truncated_normal(rng, c));
    for (const auto& cat : cats) {
      const double u = rng.uniform01();
      double acc = 0.0;
      std::size_t pick = cat.codes.size() - 1;
      for (std::size_t l = 0; l < cat.codes.size(); ++l) {
        acc += cat.dist->levels[l].second;
        if (u < acc) {
          pick = l;
          break;
        }
      }
      // a trailing zero-probability level can only be picked by rounding slack
      while (pick > 0 && cat.dist->levels[pick].second == 0.0) --pick;
      cohort.categorical[cat.dist->name].push_back(cat.codes[pick]);
    }
  }
  return cohort;
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

/// Case-mean shift of the equal-variance binormal model with the given AUC,
/// from AUC = Phi(mu / sqrt(2)).
inline double binormal_shift(double target_auc) { return std::sqrt(2.0) * normal_quantile(target_auc); }

/// Returns a copy of `cohort` with an outcome column (Bernoulli prevalence)
/// and a score column: controls ~ N(0,1), cases ~ N(mu,1). An existing
/// outcome column is reused, so several scores can share one outcome.
inline Cohort generate_scores(const Cohort& cohort, double target_auc, double prevalence, std::uint64_t seed,
                              const std::string& score_col = "score", const std::string& outcome_col = "outcome") {
  if (!(target_auc > 0.5 && target_auc < 1.0)) throw std::invalid_argument("target_auc must lie in (0.5, 1)");
  if (!(prevalence > 0.0 && prevalence < 1.0)) throw std::invalid_argument("prevalence must lie in (0, 1)");
  const double mu = binormal_shift(target_auc);
  Cohort out = cohort;
  const bool reuse = out.outcomes.contains(outcome_col);
  auto& scores = out.scores[score_col];
  auto& outcomes = out.outcomes[outcome_col];
  scores.assign(cohort.size(), 0.0);
  if (!reuse) outcomes.assign(cohort.size(), 0);
  Rng rng(seed);
  for (std::size_t r = 0; r < cohort.size(); ++r) {
    const int y = reuse ? outcomes[r] : (rng.bernoulli(prevalence) ? 1 : 0);
    outcomes[r] = y;
    scores[r] = rng.normal(y ? mu : 0.0, 1.0);
  }
  return out;
}

}  // namespace distinct
