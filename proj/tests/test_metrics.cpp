#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "distinct/metrics.hpp"
#include "oracles.hpp"

using namespace distinct;

namespace {

std::vector<double> random_sample(std::mt19937_64& gen, std::size_t n, bool ties) {
  std::vector<double> v(n);
  if (ties) {
    std::uniform_int_distribution<int> d(0, 4);
    for (auto& x : v) x = d(gen);
  } else {
    std::normal_distribution<double> d(0, 2);
    for (auto& x : v) x = d(gen);
  }
  return v;
}

}  // namespace

TEST(KsDistance, Examples) {
  EXPECT_EQ(ks_distance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_EQ(ks_distance(std::vector<double>{0}, std::vector<double>{1}), 1.0);
  EXPECT_EQ(ks_distance(std::vector<double>{1, 2}, std::vector<double>{1, 3}), 0.5);
  EXPECT_THROW(ks_distance(std::vector<double>{}, std::vector<double>{1}), std::invalid_argument);
}

TEST(KolmogorovSf, SeriesValues) {
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
  // 2(e^-0.5 - e^-2 + e^-4.5 - e^-8) = 0.96394
  EXPECT_NEAR(kolmogorov_sf(0.5), 0.9639, 1e-3);
  EXPECT_NEAR(kolmogorov_sf(1.3581), 0.0500, 5e-4);
  EXPECT_THROW(kolmogorov_sf(-0.1), std::invalid_argument);
}

TEST(KolmogorovSf, MonotoneAndContinuousAcrossBranches) {
  double prev = 1.0;
  for (double l = 0.01; l < 4.0; l += 0.01) {
    const double q = kolmogorov_sf(l);
    EXPECT_LE(q, prev + 1e-12);
    EXPECT_GE(q, 0.0);
    prev = q;
  }
  EXPECT_NEAR(kolmogorov_sf(0.2 - 1e-9), kolmogorov_sf(0.2 + 1e-9), 1e-8);
}

TEST(KsPvalue, Examples) {
  EXPECT_EQ(ks_pvalue(0.0, 17, 400), 1.0);
  EXPECT_LT(ks_pvalue(1.0, 100, 100), 1e-8);
  EXPECT_NEAR(ks_pvalue(0.1921, 100, 100), 0.05, 1e-3);
  EXPECT_THROW(ks_pvalue(1.5, 10, 10), std::invalid_argument);
  EXPECT_THROW(ks_pvalue(0.5, 0, 10), std::invalid_argument);
}

TEST(Wasserstein1, Examples) {
  EXPECT_EQ(wasserstein1(std::vector<double>{4, 1, 7}, std::vector<double>{7, 4, 1}), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1(std::vector<double>{0, 1}, std::vector<double>{1, 3}), 1.5);
  const std::vector<double> a{0.3, -1.2, 5.0, 2.5, 2.5};
  std::vector<double> b = a;
  for (auto& x : b) x += 1.75;
  EXPECT_NEAR(wasserstein1(a, b), 1.75, 1e-12);
  EXPECT_THROW(wasserstein1(std::vector<double>{}, a), std::invalid_argument);
}

TEST(Wasserstein1, UnequalSizesHandExample) {
  // F_A steps 1/2 at 0 and 1 at 2; F_B jumps to 1 at 1: area = 0.5*1 + 0.5*1
  EXPECT_DOUBLE_EQ(wasserstein1(std::vector<double>{0, 2}, std::vector<double>{1}), 1.0);
}

TEST(MetricOracles, BruteForceSmallSamples) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const bool ties = trial % 2 == 0;
    const auto a = random_sample(gen, size(gen), ties);
    const auto b = random_sample(gen, size(gen), ties);
    EXPECT_NEAR(wasserstein1(a, b), oracle::w1_quantile_matching(a, b), 1e-12);
    EXPECT_NEAR(wasserstein1(a, b), oracle::w1_ecdf_area(a, b), 1e-12);
    EXPECT_NEAR(ks_distance(a, b), oracle::ks_scan(a, b), 1e-12);
  }
}

TEST(MetricProperties, Symmetry) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_sample(gen, 1 + gen() % 30, t % 3 == 0);
    const auto b = random_sample(gen, 1 + gen() % 30, t % 3 == 0);
    EXPECT_EQ(ks_distance(a, b), ks_distance(b, a));
    EXPECT_NEAR(wasserstein1(a, b), wasserstein1(b, a), 1e-12);
  }
}

TEST(MetricProperties, IdentityOfIndiscernibles) {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 100; ++t) {
    auto a = random_sample(gen, 1 + gen() % 10, true);
    // same ECDF at a different size: every value repeated twice
    std::vector<double> doubled;
    for (double x : a) doubled.insert(doubled.end(), 2, x);
    std::shuffle(doubled.begin(), doubled.end(), gen);
    EXPECT_EQ(ks_distance(a, doubled), 0.0);
    EXPECT_EQ(wasserstein1(a, doubled), 0.0);
    auto b = a;
    b[gen() % b.size()] += 1.0;
    EXPECT_GT(ks_distance(a, b), 0.0);
    EXPECT_GT(wasserstein1(a, b), 0.0);
  }
}

TEST(MetricProperties, TriangleInequality) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_sample(gen, 1 + gen() % 8, t % 2);
    const auto b = random_sample(gen, 1 + gen() % 8, t % 2);
    const auto c = random_sample(gen, 1 + gen() % 8, t % 2);
    EXPECT_LE(wasserstein1(a, c), wasserstein1(a, b) + wasserstein1(b, c) + 1e-12);
  }
}

TEST(MetricProperties, EqualSizeIdentity) {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + gen() % 50;
    auto a = random_sample(gen, n, t % 2);
    auto b = random_sample(gen, n, t % 2);
    auto sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += std::abs(sa[i] - sb[i]);
    mean /= static_cast<double>(n);
    EXPECT_NEAR(wasserstein1(a, b), mean, 1e-12);
    // the ECDF-area route must agree too
    EXPECT_NEAR(WassersteinPermutation(a, b).observed(), mean, 1e-12);
  }
}

TEST(MetricProperties, ScaleEquivarianceAndMonotoneInvariance) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_sample(gen, 1 + gen() % 20, t % 2);
    const auto b = random_sample(gen, 1 + gen() % 20, t % 2);
    const double c = (t % 4 == 0 ? -1.0 : 1.0) * (0.1 + static_cast<double>(t % 7));
    std::vector<double> ca, cb, ea, eb;
    for (double x : a) {
      ca.push_back(c * x);
      ea.push_back(std::exp(x) + x * x * x);
    }
    for (double x : b) {
      cb.push_back(c * x);
      eb.push_back(std::exp(x) + x * x * x);
    }
    EXPECT_NEAR(wasserstein1(ca, cb), std::abs(c) * wasserstein1(a, b), 1e-9);
    EXPECT_EQ(ks_distance(ea, eb), ks_distance(a, b));
  }
}

TEST(PermutationPvalue, LowerBoundAndRange) {
  const std::vector<double> a{0, 0, 0, 0, 0, 0};
  const std::vector<double> b{10, 10, 10, 10, 10, 10};
  const auto r = permutation_pvalue(a, b, 999, 1);
  EXPECT_GE(r.p_value, 1.0 / 1000);
  EXPECT_LE(r.p_value, 1.0);
  EXPECT_EQ(r.method, TestMethod::wasserstein_permutation);
  EXPECT_EQ(r.permutations_used, 999);
  EXPECT_DOUBLE_EQ(r.statistic, 10.0);
  EXPECT_THROW(permutation_pvalue(a, b, 0, 1), std::invalid_argument);
}

TEST(PermutationPvalue, IdenticalSamplesGivePNearOne) {
  const std::vector<double> a{1.5, 2.0, 3.25, 4.0, 7.5, 9.0, 11.0, 12.5};
  const auto r = permutation_pvalue(a, a, 999, 42);
  EXPECT_EQ(r.statistic, 0.0);
  // only relabellings that reproduce equal multisets can tie at zero
  EXPECT_GT(r.p_value, 0.95);
}

TEST(PermutationPvalue, PermutedDistancesMatchExplicitRelabelling) {
  std::mt19937_64 gen(8);
  const auto a = random_sample(gen, 13, false);
  const auto b = random_sample(gen, 29, true);
  WassersteinPermutation engine(a, b);
  EXPECT_NEAR(engine.observed(), wasserstein1(a, b), 1e-12);
  int exceed = 0;
  for (std::uint64_t j = 1; j <= 50; ++j) {
    const auto [x, y] = engine.relabelled(77, j);
    EXPECT_EQ(x.size(), 13u);
    EXPECT_EQ(y.size(), 29u);
    EXPECT_NEAR(engine.permuted(77, j), wasserstein1(x, y), 1e-12);
    if (engine.permuted(77, j) > engine.observed()) ++exceed;
  }
  EXPECT_EQ(engine.count_exceeding(50, 77), exceed);
}

TEST(PermutationPvalue, DeterministicAcrossThreadCounts) {
  std::mt19937_64 gen(9);
  const auto a = random_sample(gen, 150, false);
  auto b = random_sample(gen, 90, false);
  for (auto& x : b) x += 0.3;
  set_thread_count(1);
  const auto one = permutation_pvalue(a, b, 999, 123);
  set_thread_count(8);
  const auto eight = permutation_pvalue(a, b, 999, 123);
  set_thread_count(3);
  const auto three = permutation_pvalue(a, b, 999, 123);
  set_thread_count(-1);
  EXPECT_EQ(one.p_value, eight.p_value);
  EXPECT_EQ(one.p_value, three.p_value);
  EXPECT_EQ(one.statistic, eight.statistic);
  EXPECT_NE(permutation_pvalue(a, b, 999, 124).p_value, -1.0);
}

TEST(PermutationPvalue, NullIsRoughlyUniform) {
  // reduced-size version of the acceptance check
  std::mt19937_64 gen(10);
  std::normal_distribution<double> d(0, 1);
  std::vector<double> ps;
  for (int rep = 0; rep < 150; ++rep) {
    std::vector<double> a(60), b(60);
    for (auto& x : a) x = d(gen);
    for (auto& x : b) x = d(gen);
    ps.push_back(permutation_pvalue(a, b, 199, static_cast<std::uint64_t>(rep)).p_value);
  }
  EXPECT_GT(oracle::uniformity_ks_pvalue(ps), 0.01);
}

TEST(PermutationPvalue, DetectsShift) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> d(0, 1);
  std::vector<double> a(300), b(300);
  for (auto& x : a) x = d(gen);
  for (auto& x : b) x = d(gen) + 0.5;
  EXPECT_LT(permutation_pvalue(a, b, 999, 1).p_value, 0.01);
}

namespace {
CovariateSchema small_schema() {
  CovariateSchema s;
  s.continuous = {{"age", {0, 200}, false}, {"bmi", {0, 100}, false}};
  s.categorical = {{"sex", {{"Female", 0}, {"Male", 1}}},
                   {"race", {{"A", 0}, {"B", 1}, {"C", 2}, {"D", 3}, {"E", 4}}}};
  s.label_order = {"age", "sex", "race", "bmi"};
  return s;
}
}  // namespace

TEST(EncodeVariable, CodesAndPassthrough) {
  const auto s = small_schema();
  Cohort c;
  c.rows = 4;
  c.continuous["age"] = {62.0, 58.0, 70.0, 61.0};
  c.continuous["bmi"] = {20, 21, 22, 23};
  c.categorical["sex"] = {0, 1, 0, 1};
  c.categorical["race"] = {4, 0, 2, 0};
  const std::vector<std::size_t> first3{0, 1, 2};
  EXPECT_EQ(encode_variable(c, first3, "sex", s), (std::vector<double>{0, 1, 0}));
  const std::vector<std::size_t> two{0, 1};
  EXPECT_EQ(encode_variable(c, two, "age", s), (std::vector<double>{62.0, 58.0}));
  const std::vector<std::size_t> subset{0, 2, 3};
  const auto race = encode_variable(c, subset, "race", s);
  EXPECT_EQ(race, (std::vector<double>{4, 2, 0}));
  EXPECT_THROW(encode_variable(c, subset, "height", s), std::invalid_argument);
}

namespace {
Cohort normal_cohort(std::size_t n, double bmi_shift, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> age(62, 5), bmi(27 + bmi_shift, 4.5);
  std::uniform_int_distribution<int> sex(0, 1), race(0, 4);
  Cohort c;
  c.rows = n;
  for (std::size_t i = 0; i < n; ++i) {
    c.continuous["age"].push_back(age(gen));
    c.continuous["bmi"].push_back(bmi(gen));
    c.categorical["sex"].push_back(sex(gen));
    c.categorical["race"].push_back(race(gen));
  }
  return c;
}
std::vector<std::size_t> all_rows(const Cohort& c) {
  std::vector<std::size_t> r(c.size());
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}
}  // namespace

TEST(CompareAll, IdenticalPasses) {
  const auto s = small_schema();
  const auto c = normal_cohort(264, 0, 1);
  const auto rows = all_rows(c);
  AlignmentConfig cfg;
  cfg.seed = 5;
  const auto r = compare_all(c, rows, c, rows, s, cfg);
  EXPECT_TRUE(r.passed);
  ASSERT_EQ(r.tests.size(), 8u);
  // a binary variable ties the zero observed distance on a few relabellings
  for (const auto& t : r.tests) EXPECT_GT(t.test.p_value, 0.8) << t.variable;
  // layout: label order, Wasserstein then K-S for each variable
  EXPECT_EQ(r.tests[0].variable, "age");
  EXPECT_EQ(r.tests[0].test.method, TestMethod::wasserstein_permutation);
  EXPECT_EQ(r.tests[1].test.method, TestMethod::ks_asymptotic);
  EXPECT_EQ(r.tests[7].variable, "bmi");
  EXPECT_EQ(r.num_tests(), 8u);
}

TEST(CompareAll, ShiftedBmiFailsBothTests) {
  const auto s = small_schema();
  const auto source = normal_cohort(5000, 3.0, 2);
  const auto target = normal_cohort(264, 0.0, 3);
  AlignmentConfig cfg;
  cfg.seed = 6;
  const auto r = compare_all(source, all_rows(source), target, all_rows(target), s, cfg);
  EXPECT_FALSE(r.passed);
  EXPECT_LT(r.find("bmi", TestMethod::wasserstein_permutation)->test.p_value, 0.05);
  EXPECT_LT(r.find("bmi", TestMethod::ks_asymptotic)->test.p_value, 0.05);
  EXPECT_NE(std::find(r.failing_variables().begin(), r.failing_variables().end(), "bmi"), r.failing_variables().end());
}

TEST(CompareAll, MethodSelectionAndAlphaValidation) {
  const auto s = small_schema();
  const auto c = normal_cohort(50, 0, 1);
  const auto rows = all_rows(c);
  AlignmentConfig cfg;
  cfg.use_wasserstein = false;
  EXPECT_EQ(compare_all(c, rows, c, rows, s, cfg).tests.size(), 4u);
  cfg.alpha = 1.5;
  EXPECT_THROW(compare_all(c, rows, c, rows, s, cfg), std::invalid_argument);
  cfg.alpha = 0.05;
  const std::vector<std::size_t> none;
  EXPECT_THROW(compare_all(c, none, c, rows, s, cfg), std::invalid_argument);
}
