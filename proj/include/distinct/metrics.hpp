#pragma once

// Two-sample distances and their p-values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "config.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace distinct {

enum class TestMethod { wasserstein_permutation, ks_asymptotic };

inline std::string to_string(TestMethod m) {
  return m == TestMethod::ks_asymptotic ? "ks_asymptotic" : "wasserstein_permutation";
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::ks_asymptotic;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::optional<int> permutations_used;
};

namespace detail {

inline std::vector<double> sorted_copy(std::span<const double> s, const char* who) {
  if (s.empty()) throw std::invalid_argument(std::string(who) + ": empty sample");
  std::vector<double> v(s.begin(), s.end());
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite value");
  std::sort(v.begin(), v.end());
  return v;
}

/// Walks the pooled sorted values of two sorted samples. At each distinct
/// pooled value x (after absorbing all ties) calls visit(x, i, j) where i and
/// j count elements <= x in a and b.
template <typename Visit>
void walk_ecdfs(const std::vector<double>& a, const std::vector<double>& b, Visit&& visit) {
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      x = a[i];
    else
      x = b[j];
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    visit(x, i, j);
  }
}

}  // namespace detail

/// sup_x |F_A(x) - F_B(x)| with right-continuous ECDFs evaluated at every
/// pooled value.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  const auto sa = detail::sorted_copy(a, "ks_distance");
  const auto sb = detail::sorted_copy(b, "ks_distance");
  const auto na = static_cast<std::int64_t>(sa.size());
  const auto nb = static_cast<std::int64_t>(sb.size());
  // Track the gap scaled by na*nb so the maximum is found in exact integers.
  std::int64_t best = 0;
  detail::walk_ecdfs(sa, sb, [&](double, std::size_t i, std::size_t j) {
    const std::int64_t gap = static_cast<std::int64_t>(i) * nb - static_cast<std::int64_t>(j) * na;
    best = std::max(best, gap < 0 ? -gap : gap);
  });
  return static_cast<double>(best) / (static_cast<double>(na) * static_cast<double>(nb));
}

/// Survival function of the Kolmogorov distribution,
/// Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2).
inline double kolmogorov_sf(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("kolmogorov_sf: lambda must be >= 0");
  if (lambda == 0.0) return 1.0;
  if (lambda < 0.2) {
    // The alternating series needs O(1/lambda) terms here; use the
    // equivalent theta-function form of the CDF instead.
    constexpr double pi = std::numbers::pi;
    const double c = pi * pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1;; ++k) {
      const double term = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * c);
      cdf += term;
      if (term < 1e-16) break;
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k < 100000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    const double next = std::exp(-2.0 * (k + 1.0) * (k + 1.0) * lambda * lambda);
    if (next < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Asymptotic two-sample K-S p-value.
inline double ks_pvalue(double d, std::size_t n_a, std::size_t n_b) {
  if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("ks_pvalue: d must lie in [0, 1]");
  if (n_a == 0 || n_b == 0) throw std::invalid_argument("ks_pvalue: sample sizes must be >= 1");
  const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
  return kolmogorov_sf(std::sqrt(na * nb / (na + nb)) * d);
}

inline TestResult ks_test(std::span<const double> a, std::span<const double> b) {
  TestResult r;
  r.method = TestMethod::ks_asymptotic;
  r.statistic = ks_distance(a, b);
  r.n_a = a.size();
  r.n_b = b.size();
  r.p_value = ks_pvalue(r.statistic, r.n_a, r.n_b);
  return r;
}

/// 1-Wasserstein distance: the exact area between the two ECDFs, summed over
/// the gaps between consecutive pooled values.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
  const auto sa = detail::sorted_copy(a, "wasserstein1");
  const auto sb = detail::sorted_copy(b, "wasserstein1");
  if (sa.size() == sb.size()) {
    // Equal sizes: the quantile functions share breakpoints, so the area is
    // the mean absolute difference of order statistics.
    double sum = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) sum += std::abs(sa[k] - sb[k]);
    return sum / static_cast<double>(sa.size());
  }
  const auto na = static_cast<std::int64_t>(sa.size());
  const auto nb = static_cast<std::int64_t>(sb.size());
  double area = 0.0;
  double prev = 0.0;
  std::int64_t prev_gap = 0;
  bool first = true;
  detail::walk_ecdfs(sa, sb, [&](double x, std::size_t i, std::size_t j) {
    if (!first) area += static_cast<double>(prev_gap) * (x - prev);
    first = false;
    const std::int64_t gap = static_cast<std::int64_t>(i) * nb - static_cast<std::int64_t>(j) * na;
    prev_gap = gap < 0 ? -gap : gap;
    prev = x;
  });
  return area / (static_cast<double>(na) * static_cast<double>(nb));
}

/// Permutation null for the 1-Wasserstein distance between two fixed
/// samples. The pooled values are sorted once and grouped into distinct
/// values; a relabelling then only needs the per-group count of one
/// arm, so each permutation costs O(min(n_a, n_b) + distinct values).
class WassersteinPermutation {
 public:
  WassersteinPermutation(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("permutation test: empty sample");
    // The smaller arm is the one whose positions are drawn.
    const bool a_small = a.size() <= b.size();
    const auto small = a_small ? a : b;
    const auto large = a_small ? b : a;
    n_small_ = small.size();
    n_total_ = a.size() + b.size();

    std::vector<std::pair<double, bool>> pooled;
    pooled.reserve(n_total_);
    for (double x : small) pooled.emplace_back(x, true);
    for (double x : large) pooled.emplace_back(x, false);
    for (const auto& [x, _] : pooled)
      if (!std::isfinite(x)) throw std::invalid_argument("permutation test: non-finite value");
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });

    group_of_.resize(n_total_);
    observed_counts_.clear();
    for (std::size_t p = 0; p < n_total_; ++p) {
      if (p == 0 || pooled[p].first != pooled[p - 1].first) {
        values_.push_back(pooled[p].first);
        cumulative_.push_back(0);
        observed_counts_.push_back(0);
      }
      group_of_[p] = static_cast<std::uint32_t>(values_.size() - 1);
      cumulative_.back() = static_cast<std::int64_t>(p + 1);
      if (pooled[p].second) ++observed_counts_.back();
    }
    observed_ = scaled_distance(observed_counts_);
  }

  std::size_t group_count() const { return values_.size(); }

  /// Observed distance between the two original samples.
  double observed() const { return observed_ / norm(); }

  /// Distance under the j-th relabelling drawn from derive_seed(seed, {j}).
  double permuted(std::uint64_t seed, std::uint64_t j) const {
    Scratch s(*this);
    return draw(seed, j, s) / norm();
  }

  /// The two pseudo-samples of relabelling j: the drawn positions first
  /// (size min(n_a, n_b)), the remainder second.
  std::pair<std::vector<double>, std::vector<double>> relabelled(std::uint64_t seed, std::uint64_t j) const {
    Scratch s(*this);
    draw(seed, j, s);
    std::vector<std::uint8_t> in_small(n_total_, 0);
    for (auto p : s.chosen) in_small[p] = 1;
    std::pair<std::vector<double>, std::vector<double>> out;
    for (std::size_t p = 0; p < n_total_; ++p)
      (in_small[p] ? out.first : out.second).push_back(values_[group_of_[p]]);
    return out;
  }

  /// Number of j in [1, m] whose permuted distance strictly exceeds the
  /// observed one. Independent of the worker count.
  std::int64_t count_exceeding(int m, std::uint64_t seed) const {
    const std::size_t chunks = std::min<std::size_t>(thread_count(), static_cast<std::size_t>(m));
    std::vector<std::int64_t> hits(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
      Scratch s(*this);
      const std::size_t begin = static_cast<std::size_t>(m) * c / chunks;
      const std::size_t end = static_cast<std::size_t>(m) * (c + 1) / chunks;
      for (std::size_t j = begin + 1; j <= end; ++j)
        if (draw(seed, j, s) > observed_) ++hits[c];
    });
    std::int64_t total = 0;
    for (auto h : hits) total += h;
    return total;
  }

 private:
  struct Scratch {
    explicit Scratch(const WassersteinPermutation& p) : counts(p.values_.size(), 0), marked(p.n_total_, 0) {
      chosen.reserve(p.n_small_);
    }
    std::vector<std::int64_t> counts;
    std::vector<std::uint8_t> marked;
    std::vector<std::uint32_t> chosen;
  };

  double norm() const {
    return static_cast<double>(n_small_) * static_cast<double>(n_total_ - n_small_);
  }

  // Area between ECDFs scaled by n_small * n_large, from per-group counts of
  // the small arm.
  double scaled_distance(const std::vector<std::int64_t>& counts) const {
    const auto k = static_cast<std::int64_t>(n_small_);
    const auto rest = static_cast<std::int64_t>(n_total_) - k;
    std::int64_t small_through = 0;
    double area = 0.0;
    for (std::size_t g = 0; g + 1 < values_.size(); ++g) {
      small_through += counts[g];
      const std::int64_t gap = small_through * rest - (cumulative_[g] - small_through) * k;
      area += static_cast<double>(gap < 0 ? -gap : gap) * (values_[g + 1] - values_[g]);
    }
    return area;
  }

  double draw(std::uint64_t seed, std::uint64_t j, Scratch& s) const {
    Rng rng(derive_seed(seed, {j}));
    // Floyd's sampling of n_small positions out of n_total.
    s.chosen.clear();
    for (std::size_t t = n_total_ - n_small_; t < n_total_; ++t) {
      auto pick = static_cast<std::uint32_t>(rng.below(t + 1));
      if (s.marked[pick]) pick = static_cast<std::uint32_t>(t);
      s.marked[pick] = 1;
      s.chosen.push_back(pick);
    }
    std::fill(s.counts.begin(), s.counts.end(), 0);
    for (auto p : s.chosen) {
      ++s.counts[group_of_[p]];
      s.marked[p] = 0;
    }
    return scaled_distance(s.counts);
  }

  std::size_t n_small_ = 0;
  std::size_t n_total_ = 0;
  std::vector<double> values_;             // distinct pooled values, ascending
  std::vector<std::int64_t> cumulative_;   // pooled count <= values_[g]
  std::vector<std::uint32_t> group_of_;    // sorted position -> group
  std::vector<std::int64_t> observed_counts_;
  double observed_ = 0.0;
};

/// Permutation p-value for the 1-Wasserstein distance,
/// (1 + #{d_j > t}) / (1 + m). Relabelling j draws from derive_seed(seed, {j}).
inline TestResult permutation_pvalue(std::span<const double> a, std::span<const double> b, int m,
                                     std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("permutation_pvalue: m must be >= 1");
  WassersteinPermutation engine(a, b);
  TestResult r;
  r.method = TestMethod::wasserstein_permutation;
  r.statistic = engine.observed();
  r.n_a = a.size();
  r.n_b = b.size();
  r.permutations_used = m;
  r.p_value = static_cast<double>(1 + engine.count_exceeding(m, seed)) / static_cast<double>(1 + m);
  return r;
}

/// Values of one schema variable for the given rows. Categorical variables
/// yield their level codes.
inline std::vector<double> encode_variable(const Cohort& cohort, std::span<const std::size_t> rows,
                                           const std::string& variable, const CovariateSchema& schema) {
  std::vector<double> out;
  out.reserve(rows.size());
  switch (schema.kind(variable)) {
    case VariableKind::continuous: {
      const auto& col = cohort.continuous.at(variable);
      for (auto r : rows) out.push_back(col.at(r));
      break;
    }
    case VariableKind::categorical: {
      const auto& col = cohort.categorical.at(variable);
      for (auto r : rows) out.push_back(static_cast<double>(col.at(r)));
      break;
    }
  }
  return out;
}

// Alignment report ----------------------------------------------------------

struct VariableTest {
  std::string variable;
  VariableKind kind = VariableKind::continuous;
  TestResult test;
  bool passed = true;
};

struct AlignmentReport {
  double alpha = 0.05;
  std::size_t source_n = 0;
  std::size_t target_n = 0;
  std::vector<VariableTest> tests;  // label order; Wasserstein before K-S per variable
  bool passed = true;

  std::size_t num_tests() const { return tests.size(); }

  std::vector<std::string> failing_variables() const {
    std::vector<std::string> out;
    for (const auto& t : tests)
      if (!t.passed && std::find(out.begin(), out.end(), t.variable) == out.end()) out.push_back(t.variable);
    return out;
  }

  const VariableTest* find(const std::string& variable, TestMethod method) const {
    for (const auto& t : tests)
      if (t.variable == variable && t.test.method == method) return &t;
    return nullptr;
  }
};

/// Tests every schema variable of source[source_rows] against
/// target[target_rows]. Passes iff every p-value exceeds config.alpha.
/// The permutation stream for variable v is derive_seed(config.seed, {v}).
inline AlignmentReport compare_all(const Cohort& source, std::span<const std::size_t> source_rows,
                                   const Cohort& target, std::span<const std::size_t> target_rows,
                                   const CovariateSchema& schema, const AlignmentConfig& config) {
  config.validate();
  if (source_rows.empty() || target_rows.empty()) throw std::invalid_argument("compare_all: empty row set");
  AlignmentReport report;
  report.alpha = config.alpha;
  report.source_n = source_rows.size();
  report.target_n = target_rows.size();
  for (std::size_t v = 0; v < schema.label_order.size(); ++v) {
    const auto& name = schema.label_order[v];
    const auto a = encode_variable(source, source_rows, name, schema);
    const auto b = encode_variable(target, target_rows, name, schema);
    auto add = [&](TestResult t) {
      VariableTest vt{name, schema.kind(name), t, t.p_value > config.alpha};
      report.passed = report.passed && vt.passed;
      report.tests.push_back(std::move(vt));
    };
    if (config.use_wasserstein) add(permutation_pvalue(a, b, config.permutations, derive_seed(config.seed, {v})));
    if (config.use_ks) add(ks_test(a, b));
  }
  return report;
}

}  // namespace distinct
