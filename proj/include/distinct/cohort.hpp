#pragma once

// Covariate schema, cohort tables, discretization and joint strata.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "csv.hpp"

namespace distinct {

/// Malformed schema, or a cohort file that does not match the schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data cell that cannot be interpreted. `line` is the 1-based file line.
class DataError : public std::runtime_error {
 public:
  DataError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Continuous value below the first bin edge (or above the last, closed edge).
class BinRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class VariableKind { continuous, categorical };

struct ContinuousSpec {
  std::string name;
  std::vector<double> edges;  // strictly increasing, at least two
  bool last_open = false;     // final bin extends to +infinity

  std::size_t bin_count() const { return edges.size() - 1 + (last_open ? 1 : 0); }

  void validate() const {
    if (edges.size() < 2) throw SchemaError(name + ": need at least two bin edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i] > edges[i - 1])) throw SchemaError(name + ": bin edges must be strictly increasing");
  }

  /// Human label for a 1-based bin, e.g. "55-60" or "30+".
  std::string bin_label(int bin) const {
    const auto i = static_cast<std::size_t>(bin);
    if (i == edges.size()) return csv::format_double(edges.back()) + "+";
    return csv::format_double(edges[i - 1]) + "-" + csv::format_double(edges[i]);
  }
};

struct Level {
  std::string label;
  int code = 0;
};

struct CategoricalSpec {
  std::string name;
  std::vector<Level> levels;

  void validate() const {
    if (levels.size() < 2) throw SchemaError(name + ": need at least two levels");
    std::set<std::string> labels;
    std::set<int> codes;
    for (const auto& l : levels) {
      if (l.code < 0) throw SchemaError(name + ": level codes must be non-negative");
      if (!labels.insert(l.label).second) throw SchemaError(name + ": duplicate level label '" + l.label + "'");
      if (!codes.insert(l.code).second)
        throw SchemaError(name + ": duplicate level code " + std::to_string(l.code));
    }
  }

  std::optional<int> code_of(std::string_view label) const {
    for (const auto& l : levels)
      if (l.label == label) return l.code;
    return std::nullopt;
  }

  std::string label_of(int code) const {
    for (const auto& l : levels)
      if (l.code == code) return l.label;
    throw std::invalid_argument(name + ": no level with code " + std::to_string(code));
  }

  std::string known_labels() const {
    std::string out;
    for (const auto& l : levels) {
      if (!out.empty()) out += ", ";
      out += l.label;
    }
    return out;
  }
};

/// What to do with a row whose continuous value falls outside the bin edges.
enum class OutOfRangePolicy { error, exclude };

struct CovariateSchema {
  std::vector<ContinuousSpec> continuous;
  std::vector<CategoricalSpec> categorical;
  std::vector<std::string> label_order;
  OutOfRangePolicy out_of_range = OutOfRangePolicy::error;

  void validate() const {
    std::set<std::string> names;
    for (const auto& c : continuous) {
      c.validate();
      if (!names.insert(c.name).second) throw SchemaError("duplicate variable name '" + c.name + "'");
    }
    for (const auto& c : categorical) {
      c.validate();
      if (!names.insert(c.name).second) throw SchemaError("duplicate variable name '" + c.name + "'");
    }
    std::set<std::string> ordered(label_order.begin(), label_order.end());
    if (ordered.size() != label_order.size() || ordered != names)
      throw SchemaError("label_order must be a permutation of all declared variable names");
  }

  const ContinuousSpec* find_continuous(std::string_view name) const {
    for (const auto& c : continuous)
      if (c.name == name) return &c;
    return nullptr;
  }
  const CategoricalSpec* find_categorical(std::string_view name) const {
    for (const auto& c : categorical)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool has(std::string_view name) const { return find_continuous(name) || find_categorical(name); }

  VariableKind kind(std::string_view name) const {
    if (find_continuous(name)) return VariableKind::continuous;
    if (find_categorical(name)) return VariableKind::categorical;
    throw std::invalid_argument("unknown variable '" + std::string(name) + "'");
  }

  /// Number of possible joint labels.
  std::uint64_t key_space_size() const {
    std::uint64_t size = 1;
    for (const auto& c : continuous) size *= c.bin_count();
    for (const auto& c : categorical) size *= c.levels.size();
    return size;
  }
};

// Schema file ---------------------------------------------------------------

inline CovariateSchema parse_schema(const nlohmann::json& j) {
  CovariateSchema s;
  try {
    for (const auto& c : j.value("continuous", nlohmann::json::array())) {
      ContinuousSpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.edges = c.at("edges").get<std::vector<double>>();
      spec.last_open = c.value("last_open", false);
      s.continuous.push_back(std::move(spec));
    }
    for (const auto& c : j.value("categorical", nlohmann::json::array())) {
      CategoricalSpec spec;
      spec.name = c.at("name").get<std::string>();
      for (const auto& l : c.at("levels")) spec.levels.push_back({l.at("label").get<std::string>(), l.at("code").get<int>()});
      s.categorical.push_back(std::move(spec));
    }
    s.label_order = j.at("label_order").get<std::vector<std::string>>();
    const auto policy = j.value("out_of_range", std::string("error"));
    if (policy == "exclude")
      s.out_of_range = OutOfRangePolicy::exclude;
    else if (policy != "error")
      throw SchemaError("out_of_range must be \"error\" or \"exclude\"");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const CovariateSchema& s) {
  nlohmann::json j;
  j["continuous"] = nlohmann::json::array();
  for (const auto& c : s.continuous)
    j["continuous"].push_back({{"name", c.name}, {"edges", c.edges}, {"last_open", c.last_open}});
  j["categorical"] = nlohmann::json::array();
  for (const auto& c : s.categorical) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : c.levels) levels.push_back({{"label", l.label}, {"code", l.code}});
    j["categorical"].push_back({{"name", c.name}, {"levels", levels}});
  }
  j["label_order"] = s.label_order;
  j["out_of_range"] = s.out_of_range == OutOfRangePolicy::exclude ? "exclude" : "error";
  return j;
}

inline CovariateSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema " + path + ": " + e.what());
  }
  return parse_schema(j);
}

// Discretization ------------------------------------------------------------

/// 1-based bin index with left-closed, right-open intervals [e[i-1], e[i]).
/// With last_open, anything at or above the last edge lands in the final bin.
inline int bin_value(const ContinuousSpec& spec, double value) {
  const auto& e = spec.edges;
  if (!std::isfinite(value)) throw BinRangeError(spec.name + ": non-finite value");
  if (value < e.front())
    throw BinRangeError(spec.name + ": " + csv::format_double(value) + " below first edge " +
                        csv::format_double(e.front()));
  if (value >= e.back()) {
    if (spec.last_open) return static_cast<int>(e.size());
    throw BinRangeError(spec.name + ": " + csv::format_double(value) + " at or above last edge " +
                        csv::format_double(e.back()));
  }
  // first edge strictly greater than value; its index is the 1-based bin
  return static_cast<int>(std::upper_bound(e.begin(), e.end(), value) - e.begin());
}

/// Covariate values of one individual. Categorical entries hold level codes.
using Record = std::map<std::string, double, std::less<>>;

/// Joint demographic label: one component per variable in label_order.
/// Categorical components are level codes, continuous ones 1-based bins.
struct StratumKey {
  std::vector<int> codes;

  auto operator<=>(const StratumKey&) const = default;
  bool operator==(const StratumKey&) const = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < codes.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(codes[i]);
    }
    return s + ")";
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int c : codes) {
      h ^= static_cast<std::uint32_t>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

inline StratumKey label_record(const CovariateSchema& schema, const Record& record) {
  StratumKey key;
  key.codes.reserve(schema.label_order.size());
  for (const auto& name : schema.label_order) {
    auto it = record.find(name);
    if (it == record.end()) throw std::invalid_argument("record has no value for '" + name + "'");
    if (const auto* c = schema.find_continuous(name))
      key.codes.push_back(bin_value(*c, it->second));
    else
      key.codes.push_back(static_cast<int>(it->second));
  }
  return key;
}

// Cohort --------------------------------------------------------------------

enum class ColumnRole { covariate, score, outcome, id };
using RoleMap = std::map<std::string, ColumnRole, std::less<>>;

struct Exclusion {
  std::size_t line = 0;  // 1-based: file line at load time, cohort row when stratifying
  std::string reason;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_loaded = 0;
  std::vector<Exclusion> excluded;
};

/// Column-oriented table. Rows that failed the missing-data policy at load
/// time are not stored; `report` records them.
struct Cohort {
  std::string name;
  std::vector<std::string> ids;                             // empty when no id column
  std::map<std::string, std::vector<double>, std::less<>> continuous;
  std::map<std::string, std::vector<int>, std::less<>> categorical;  // level codes
  std::map<std::string, std::vector<double>, std::less<>> scores;
  std::map<std::string, std::vector<int>, std::less<>> outcomes;     // 0/1
  LoadReport report;
  std::size_t rows = 0;

  std::size_t size() const { return rows; }

  Record record(std::size_t row) const {
    Record r;
    for (const auto& [k, v] : continuous) r[k] = v.at(row);
    for (const auto& [k, v] : categorical) r[k] = v.at(row);
    return r;
  }

  std::string id(std::size_t row) const { return ids.empty() ? std::to_string(row) : ids.at(row); }

  const std::vector<double>& score_column(std::string_view col) const {
    auto it = scores.find(col);
    if (it == scores.end()) throw std::invalid_argument("unknown score column '" + std::string(col) + "'");
    return it->second;
  }

  const std::vector<int>& outcome_column(std::string_view col) const {
    auto it = outcomes.find(col);
    if (it == outcomes.end()) throw std::invalid_argument("unknown outcome column '" + std::string(col) + "'");
    return it->second;
  }
};

namespace detail {
inline bool is_missing(std::string_view cell) {
  while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
  while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN";
}
}  // namespace detail

/// Builds a cohort from a parsed CSV table. Covariates are every schema
/// variable; `roles` adds score, outcome and id columns. Unlisted extra
/// columns are ignored. A row missing any used value is excluded.
inline Cohort make_cohort(const csv::Table& table, const CovariateSchema& schema, const RoleMap& roles,
                          std::string name = "cohort") {
  schema.validate();
  auto column_of = [&](const std::string& col) -> std::size_t {
    auto it = std::find(table.header.begin(), table.header.end(), col);
    if (it == table.header.end()) throw SchemaError("missing column '" + col + "'");
    return static_cast<std::size_t>(it - table.header.begin());
  };

  struct Binding {
    std::string name;
    std::size_t column;
    ColumnRole role;
    const CategoricalSpec* cat = nullptr;
  };
  std::vector<Binding> bindings;
  for (const auto& var : schema.label_order)
    bindings.push_back({var, column_of(var), ColumnRole::covariate, schema.find_categorical(var)});
  std::optional<std::size_t> id_column;
  for (const auto& [col, role] : roles) {
    if (role == ColumnRole::covariate) {
      if (!schema.has(col)) throw SchemaError("column '" + col + "' has covariate role but is not in the schema");
      continue;
    }
    if (schema.has(col)) throw SchemaError("column '" + col + "' is a schema covariate");
    if (role == ColumnRole::id)
      id_column = column_of(col);
    else
      bindings.push_back({col, column_of(col), role, nullptr});
  }

  Cohort cohort;
  cohort.name = std::move(name);
  for (const auto& b : bindings) {
    if (b.role == ColumnRole::covariate && b.cat) cohort.categorical[b.name];
    else if (b.role == ColumnRole::covariate) cohort.continuous[b.name];
    else if (b.role == ColumnRole::score) cohort.scores[b.name];
    else cohort.outcomes[b.name];
  }

  cohort.report.rows_read = table.rows.size();
  std::vector<double> numeric(bindings.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers.empty() ? r + 2 : table.line_numbers[r];
    std::string missing;
    for (std::size_t b = 0; b < bindings.size(); ++b) {
      const auto& bind = bindings[b];
      const auto& cell = row[bind.column];
      if (detail::is_missing(cell)) {
        if (missing.empty()) missing = bind.name;
        continue;
      }
      if (bind.cat) {
        auto code = bind.cat->code_of(cell);
        if (!code)
          throw DataError(line, "unknown level '" + cell + "' for " + bind.name + " (known levels: " +
                                    bind.cat->known_labels() + ")");
        numeric[b] = *code;
        continue;
      }
      auto v = csv::parse_double(cell);
      if (!v) throw DataError(line, "cannot parse '" + cell + "' as a number in column " + bind.name);
      if (bind.role == ColumnRole::outcome && *v != 0.0 && *v != 1.0)
        throw DataError(line, "outcome column " + bind.name + " must be 0 or 1, found '" + cell + "'");
      numeric[b] = *v;
    }
    if (!missing.empty()) {
      cohort.report.excluded.push_back({line, "missing " + missing});
      continue;
    }
    for (std::size_t b = 0; b < bindings.size(); ++b) {
      const auto& bind = bindings[b];
      if (bind.role == ColumnRole::covariate && bind.cat) cohort.categorical[bind.name].push_back(static_cast<int>(numeric[b]));
      else if (bind.role == ColumnRole::covariate) cohort.continuous[bind.name].push_back(numeric[b]);
      else if (bind.role == ColumnRole::score) cohort.scores[bind.name].push_back(numeric[b]);
      else cohort.outcomes[bind.name].push_back(static_cast<int>(numeric[b]));
    }
    if (id_column) cohort.ids.push_back(row[*id_column]);
    ++cohort.rows;
  }
  cohort.report.rows_loaded = cohort.rows;
  if (cohort.rows == 0) throw SchemaError("cohort '" + cohort.name + "' has no usable rows");
  return cohort;
}

inline Cohort load_cohort(const std::string& path, const CovariateSchema& schema, const RoleMap& roles = {}) {
  csv::Table table;
  try {
    table = csv::read_file(path);
  } catch (const std::runtime_error& e) {
    throw SchemaError(e.what());
  }
  return make_cohort(table, schema, roles, path);
}

/// Writes the cohort in the same CSV layout load_cohort reads: optional id,
/// covariates in label order, then scores and outcomes.
inline void write_cohort_csv(std::ostream& out, const Cohort& cohort, const CovariateSchema& schema) {
  std::vector<std::string> header;
  if (!cohort.ids.empty()) header.push_back("id");
  for (const auto& v : schema.label_order) header.push_back(v);
  for (const auto& [k, _] : cohort.scores) header.push_back(k);
  for (const auto& [k, _] : cohort.outcomes) header.push_back(k);
  csv::write_row(out, header);

  std::vector<std::string> cells;
  for (std::size_t r = 0; r < cohort.size(); ++r) {
    cells.clear();
    if (!cohort.ids.empty()) cells.push_back(cohort.ids[r]);
    for (const auto& v : schema.label_order) {
      if (const auto* cat = schema.find_categorical(v))
        cells.push_back(cat->label_of(cohort.categorical.at(v)[r]));
      else
        cells.push_back(csv::format_double(cohort.continuous.at(v)[r]));
    }
    for (const auto& [_, col] : cohort.scores) cells.push_back(csv::format_double(col[r]));
    for (const auto& [_, col] : cohort.outcomes) cells.push_back(std::to_string(col[r]));
    csv::write_row(out, cells);
  }
}

// Strata --------------------------------------------------------------------

struct StratumTable {
  std::map<StratumKey, std::vector<std::size_t>> strata;  // member rows, ascending
  std::size_t total = 0;
  std::vector<Exclusion> excluded;  // rows dropped by the out-of-range policy

  std::size_t count(const StratumKey& key) const {
    auto it = strata.find(key);
    return it == strata.end() ? 0 : it->second.size();
  }

  /// Included rows in ascending order.
  std::vector<std::size_t> members() const {
    std::vector<std::size_t> rows;
    rows.reserve(total);
    for (const auto& [_, m] : strata) rows.insert(rows.end(), m.begin(), m.end());
    std::sort(rows.begin(), rows.end());
    return rows;
  }
};

inline StratumTable build_strata(const Cohort& cohort, const CovariateSchema& schema) {
  if (cohort.size() == 0) throw std::invalid_argument("build_strata: empty cohort");
  struct Column {
    const ContinuousSpec* spec;
    const std::vector<double>* values;
    const std::vector<int>* codes;
  };
  std::vector<Column> columns;
  for (const auto& name : schema.label_order) {
    if (const auto* c = schema.find_continuous(name)) {
      auto it = cohort.continuous.find(name);
      if (it == cohort.continuous.end()) throw SchemaError("cohort has no continuous column '" + name + "'");
      columns.push_back({c, &it->second, nullptr});
    } else {
      auto it = cohort.categorical.find(name);
      if (it == cohort.categorical.end()) throw SchemaError("cohort has no categorical column '" + name + "'");
      columns.push_back({nullptr, nullptr, &it->second});
    }
  }

  StratumTable table;
  StratumKey key;
  key.codes.resize(columns.size());
  for (std::size_t row = 0; row < cohort.size(); ++row) {
    try {
      for (std::size_t c = 0; c < columns.size(); ++c)
        key.codes[c] = columns[c].spec ? bin_value(*columns[c].spec, (*columns[c].values)[row]) : (*columns[c].codes)[row];
    } catch (const BinRangeError& e) {
      if (schema.out_of_range == OutOfRangePolicy::error)
        throw BinRangeError("row " + std::to_string(row + 1) + ": " + e.what());
      table.excluded.push_back({row + 1, e.what()});
      continue;
    }
    table.strata[key].push_back(row);
    ++table.total;
  }
  return table;
}

}  // namespace distinct
