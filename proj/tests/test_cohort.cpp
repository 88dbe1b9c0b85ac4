#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "distinct/cohort.hpp"

using namespace distinct;

namespace {

// Bins from the worked labelling example: age 55-60 ... 70-75, BMI
// 10-18.5, 18.5-25, 25-30, 30+.
CovariateSchema reference_schema() {
  CovariateSchema s;
  s.continuous = {{"age", {55, 60, 65, 70, 75}, false}, {"bmi", {10, 18.5, 25, 30}, true}};
  s.categorical = {{"sex", {{"Female", 0}, {"Male", 1}}},
                   {"ethnicity", {{"Hispanic", 0}, {"Non-Hispanic", 1}}},
                   {"race", {{"White", 0}, {"Black", 1}, {"Other/Unknown", 2}, {"Asian", 3}}}};
  s.label_order = {"sex", "ethnicity", "race", "age", "bmi"};
  return s;
}

Cohort from_text(const std::string& text, const CovariateSchema& s, const RoleMap& roles = {}) {
  std::istringstream in(text);
  return make_cohort(csv::parse(in), s, roles);
}

const char* kHeader = "id,sex,ethnicity,race,age,bmi\n";

}  // namespace

TEST(BinValue, WorkedExampleComponents) {
  const auto s = reference_schema();
  EXPECT_EQ(bin_value(s.continuous[0], 62), 2);
  EXPECT_EQ(bin_value(s.continuous[1], 27), 3);
}

TEST(BinValue, LeftClosedEdges) {
  const auto s = reference_schema();
  EXPECT_EQ(bin_value(s.continuous[0], 55), 1);
  EXPECT_EQ(bin_value(s.continuous[0], 60), 2);
  EXPECT_EQ(bin_value(s.continuous[1], 18.5), 2);  // 18.5 is "normal"
  EXPECT_EQ(bin_value(s.continuous[0], 74.999), 4);
}

TEST(BinValue, OpenLastBin) {
  const auto s = reference_schema();
  EXPECT_EQ(bin_value(s.continuous[1], 30), 4);
  EXPECT_EQ(bin_value(s.continuous[1], 35), 4);
  EXPECT_EQ(bin_value(s.continuous[1], 1e6), 4);
}

TEST(BinValue, OutOfRange) {
  const auto s = reference_schema();
  EXPECT_THROW(bin_value(s.continuous[0], 54.9), BinRangeError);
  EXPECT_THROW(bin_value(s.continuous[0], 75), BinRangeError);  // closed last bin
  EXPECT_THROW(bin_value(s.continuous[1], 9), BinRangeError);
  EXPECT_THROW(bin_value(s.continuous[1], std::nan("")), BinRangeError);
}

TEST(BinValue, MonotoneInValue) {
  const ContinuousSpec spec{"x", {-3, -1, 0, 0.5, 2, 7}, true};
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3, 12);
  std::vector<double> xs(2000);
  for (auto& x : xs) x = u(gen);
  std::sort(xs.begin(), xs.end());
  int prev = 0;
  for (double x : xs) {
    const int b = bin_value(spec, x);
    EXPECT_GE(b, prev);
    EXPECT_GE(b, 1);
    EXPECT_LE(b, static_cast<int>(spec.bin_count()));
    prev = b;
  }
}

TEST(LabelRecord, WorkedExample) {
  const auto s = reference_schema();
  const Record r{{"sex", 0}, {"ethnicity", 1}, {"race", 3}, {"age", 62}, {"bmi", 27}};
  EXPECT_EQ(label_record(s, r).codes, (std::vector<int>{0, 1, 3, 2, 3}));
  EXPECT_EQ(label_record(s, r).to_string(), "(0,1,3,2,3)");
}

TEST(LabelRecord, MinimumLabelAndDeterminism) {
  const auto s = reference_schema();
  const Record r{{"sex", 0}, {"ethnicity", 0}, {"race", 0}, {"age", 55}, {"bmi", 10}};
  EXPECT_EQ(label_record(s, r).codes, (std::vector<int>{0, 0, 0, 1, 1}));
  EXPECT_EQ(label_record(s, r), label_record(s, Record(r)));
}

TEST(LabelRecord, PropagatesRangeError) {
  const auto s = reference_schema();
  EXPECT_THROW(label_record(s, {{"sex", 0}, {"ethnicity", 0}, {"race", 0}, {"age", 40}, {"bmi", 20}}), BinRangeError);
}

TEST(Schema, KeySpaceOfFiveHundred) {
  // two binary, one five-level categorical, two five-bin continuous
  CovariateSchema s;
  s.categorical = {{"a", {{"x", 0}, {"y", 1}}},
                   {"b", {{"x", 0}, {"y", 1}}},
                   {"c", {{"v", 0}, {"w", 1}, {"x", 2}, {"y", 3}, {"z", 4}}}};
  s.continuous = {{"p", {0, 1, 2, 3, 4, 5}, false}, {"q", {0, 1, 2, 3, 4}, true}};
  s.label_order = {"a", "b", "c", "p", "q"};
  s.validate();
  EXPECT_EQ(s.key_space_size(), 500u);
}

TEST(Schema, RejectsInvalid) {
  auto s = reference_schema();
  s.continuous[0].edges = {55, 55, 60};
  EXPECT_THROW(s.validate(), SchemaError);
  s = reference_schema();
  s.label_order.pop_back();
  EXPECT_THROW(s.validate(), SchemaError);
  s = reference_schema();
  s.categorical[0].levels[1].code = 0;
  EXPECT_THROW(s.validate(), SchemaError);
  s = reference_schema();
  s.categorical[0].levels.pop_back();
  EXPECT_THROW(s.validate(), SchemaError);
}

TEST(Schema, JsonRoundTrip) {
  const auto s = reference_schema();
  const auto back = parse_schema(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_THROW(parse_schema(nlohmann::json{{"continuous", nlohmann::json::array()}}), SchemaError);
}

TEST(LoadCohort, CleanInput) {
  const auto c = from_text(std::string(kHeader) +
                               "a,Female,Non-Hispanic,Asian,62,27\n"
                               "b,Male,Hispanic,White,58,31.5\n"
                               "c,Female,Non-Hispanic,Black,70,18.5\n",
                           reference_schema(), {{"id", ColumnRole::id}});
  EXPECT_EQ(c.size(), 3u);
  EXPECT_TRUE(c.report.excluded.empty());
  EXPECT_EQ(c.categorical.at("race"), (std::vector<int>{3, 0, 1}));
  EXPECT_EQ(c.id(1), "b");
}

TEST(LoadCohort, MissingValueExcludesRow) {
  const auto c = from_text(std::string(kHeader) +
                               "a,Female,Non-Hispanic,Asian,62,27\n"
                               "b,Male,Hispanic,White,58,\n"
                               "c,Female,Non-Hispanic,Black,70,NA\n"
                               "d,Female,Non-Hispanic,Black,70,22\n",
                           reference_schema());
  EXPECT_EQ(c.size(), 2u);
  ASSERT_EQ(c.report.excluded.size(), 2u);
  EXPECT_EQ(c.report.excluded[0].line, 3u);
  EXPECT_EQ(c.report.excluded[0].reason, "missing bmi");
}

TEST(LoadCohort, UnknownLevelListsKnownLabels) {
  try {
    from_text(std::string(kHeader) + "a,Female,Non-Hispanic,Martian,62,27\n", reference_schema());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("unknown level"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("White, Black, Other/Unknown, Asian"), std::string::npos);
  }
}

TEST(LoadCohort, UnparseableNumberNamesRow) {
  try {
    from_text(std::string(kHeader) + "a,Female,Non-Hispanic,Asian,62,27\nb,Male,Hispanic,White,sixty,22\n",
              reference_schema());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadCohort, MissingColumnIsSchemaError) {
  try {
    from_text("id,sex,ethnicity,race,age\na,Female,Non-Hispanic,Asian,62\n", reference_schema());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("'bmi'"), std::string::npos);
  }
}

TEST(LoadCohort, ScoreAndOutcomeRoles) {
  const auto c = from_text("sex,ethnicity,race,age,bmi,psfr,cancer\n"
                           "Female,Non-Hispanic,Asian,62,27,0.7,1\n"
                           "Male,Hispanic,White,58,31.5,0.1,0\n",
                           reference_schema(), {{"psfr", ColumnRole::score}, {"cancer", ColumnRole::outcome}});
  EXPECT_EQ(c.score_column("psfr"), (std::vector<double>{0.7, 0.1}));
  EXPECT_EQ(c.outcome_column("cancer"), (std::vector<int>{1, 0}));
  EXPECT_THROW(from_text("sex,ethnicity,race,age,bmi,cancer\nFemale,Non-Hispanic,Asian,62,27,2\n", reference_schema(),
                         {{"cancer", ColumnRole::outcome}}),
               DataError);
}

TEST(LoadCohort, QuotedCells) {
  const auto c = from_text("sex,ethnicity,race,age,bmi\n\"Female\",\"Non-Hispanic\",\"Other/Unknown\",\"62\",27\n",
                           reference_schema());
  EXPECT_EQ(c.categorical.at("race")[0], 2);
}

namespace {
Cohort random_cohort(std::size_t n, std::uint64_t seed, const CovariateSchema& s) {
  std::mt19937_64 gen(seed);
  std::ostringstream text;
  text << "sex,ethnicity,race,age,bmi\n";
  const char* sex[] = {"Female", "Male"};
  const char* eth[] = {"Hispanic", "Non-Hispanic"};
  const char* race[] = {"White", "Black", "Other/Unknown", "Asian"};
  std::uniform_real_distribution<double> age(50, 75), bmi(10, 45);
  for (std::size_t i = 0; i < n; ++i)
    text << sex[gen() % 2] << ',' << eth[gen() % 2] << ',' << race[gen() % 4] << ',' << csv::format_double(age(gen))
         << ',' << csv::format_double(bmi(gen)) << '\n';
  return from_text(text.str(), s);
}
}  // namespace

TEST(BuildStrata, SingleRow) {
  const auto c = from_text(std::string(kHeader) + "a,Female,Non-Hispanic,Asian,62,27\n", reference_schema());
  const auto t = build_strata(c, reference_schema());
  ASSERT_EQ(t.strata.size(), 1u);
  EXPECT_EQ(t.total, 1u);
  EXPECT_EQ(t.strata.begin()->first.codes, (std::vector<int>{0, 1, 3, 2, 3}));
}

TEST(BuildStrata, PartitionAndRecountOnThousandRows) {
  auto s = reference_schema();
  s.out_of_range = OutOfRangePolicy::exclude;
  const auto c = random_cohort(1000, 5, s);
  const auto t = build_strata(c, s);

  // recount: label every row independently and tally
  std::map<StratumKey, std::size_t> recount;
  std::size_t included = 0;
  for (std::size_t r = 0; r < c.size(); ++r) {
    try {
      ++recount[label_record(s, c.record(r))];
      ++included;
    } catch (const BinRangeError&) {
    }
  }
  EXPECT_EQ(t.total, included);
  EXPECT_EQ(t.excluded.size(), c.size() - included);
  EXPECT_GT(t.excluded.size(), 0u);  // ages 50-55 fall below the first edge
  std::size_t sum = 0;
  std::set<std::size_t> seen;
  for (const auto& [key, members] : t.strata) {
    EXPECT_EQ(members.size(), recount.at(key));
    sum += members.size();
    for (auto m : members) {
      EXPECT_TRUE(seen.insert(m).second) << "row in two strata";
      EXPECT_EQ(label_record(s, c.record(m)), key);
    }
  }
  EXPECT_EQ(sum, t.total);
  EXPECT_LE(t.strata.size(), s.key_space_size());
}

TEST(BuildStrata, OutOfRangeErrorPolicy) {
  const auto c = from_text(std::string(kHeader) + "a,Female,Non-Hispanic,Asian,62,27\nb,Male,Hispanic,White,50,22\n",
                           reference_schema());
  EXPECT_THROW(build_strata(c, reference_schema()), BinRangeError);
}

TEST(BuildStrata, CsvRoundTripPreservesStrata) {
  auto s = reference_schema();
  s.out_of_range = OutOfRangePolicy::exclude;
  const auto c = random_cohort(500, 9, s);
  std::stringstream buf;
  write_cohort_csv(buf, c, s);
  const auto back = make_cohort(csv::parse(buf), s, {});
  const auto a = build_strata(c, s);
  const auto b = build_strata(back, s);
  EXPECT_EQ(a.strata, b.strata);
  EXPECT_EQ(a.total, b.total);
}
