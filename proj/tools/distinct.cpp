// distinct: command-line front end.
//
//   distinct validate --schema S --cohort C
//   distinct align    --source A --target B --schema S --n N --seed K
//   distinct sweep    --source A --target B --schema S --seed K [--schedule 279,559,...]
//   distinct maxsize  --source A --target B --schema S --seed K
//   distinct evaluate --cohort C --schema S --scores s1,s2 --outcome y [--strata sex,age]
//   distinct synth    --spec P --schema S --csv OUT
//
// Exit codes: 0 success / aligned, 1 not aligned, 2 usage, I/O or schema error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "distinct/distinct.hpp"

using namespace distinct;
namespace fs = std::filesystem;

namespace {

constexpr int kAligned = 0;
constexpr int kNotAligned = 1;
constexpr int kError = 2;

std::string hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s += digits[p[i] >> 4];
    s += digits[p[i] & 15];
  }
  return s;
}

std::string sha256(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("SHA-256 failed");
  return hex(md, len);
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::size_t> parse_schedule(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < 1) throw std::invalid_argument("bad schedule entry '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw std::invalid_argument("empty schedule");
  return out;
}

// Per-invocation report: manifest + result, written as JSON and text.
struct Run {
  std::string command;
  json parameters = json::object();
  json seeds = json::object();
  json inputs = json::object();
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  std::string started_at = utc_now();

  void input(const std::string& role, const std::string& path) {
    inputs[role] = {{"path", path}, {"sha256", sha256(file_bytes(path))}};
  }

  json report(const json& result) const {
    json manifest{{"tool", "distinct"},
                  {"version", version},
                  {"command", command},
                  {"parameters", parameters},
                  {"seeds", seeds},
                  {"inputs", inputs},
                  {"payload_sha256", sha256(result.dump())}};
    manifest["runtime"] = {
        {"started_at", started_at},
        {"elapsed_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()},
        {"threads", thread_count()}};
    return {{"manifest", manifest}, {"result", result}};
  }
};

struct Output {
  std::string dir;
  bool json_stdout = false;

  void emit(const Run& run, const json& result, const std::string& text) const {
    const json doc = run.report(result);
    if (json_stdout)
      std::cout << doc.dump(2) << '\n';
    else
      std::cout << text;
    if (!dir.empty()) {
      fs::create_directories(dir);
      write(run.command + ".json", doc.dump(2) + "\n");
      write(run.command + ".txt", text);
    }
  }

  void write(const std::string& name, const std::string& content) const {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    out << content;
  }
};

void write_file(const std::string& path, const std::string& content) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// Loads a cohort CSV; an "id" column (or --id-column) is kept as row ids.
Cohort read_cohort(const std::string& path, const CovariateSchema& schema, const std::vector<std::string>& scores = {},
                   const std::string& outcome = "", const std::string& id_column = "id") {
  csv::Table table;
  try {
    table = csv::read_file(path);
  } catch (const std::runtime_error& e) {
    throw SchemaError(e.what());
  }
  RoleMap roles;
  if (std::find(table.header.begin(), table.header.end(), id_column) != table.header.end())
    roles[id_column] = ColumnRole::id;
  for (const auto& s : scores) roles[s] = ColumnRole::score;
  if (!outcome.empty()) roles[outcome] = ColumnRole::outcome;
  return make_cohort(table, schema, roles, path);
}

std::string load_summary(const std::string& role, const Cohort& c) {
  std::ostringstream s;
  s << role << ": " << c.report.rows_read << " rows read, " << c.report.rows_loaded << " loaded";
  if (!c.report.excluded.empty()) s << ", " << c.report.excluded.size() << " excluded for missing values";
  s << '\n';
  return s.str();
}

struct AlignOptions {
  std::string source, target, schema;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  int permutations = 999;
  std::string methods = "wasserstein,ks";
  int replicates = 1;
  std::string pass_rule = "single_draw";
  bool nested = false;
  std::string export_ids;
  std::string id_column = "id";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--source", source, "Source cohort CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--target", target, "Target cohort CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--schema", schema, "Covariate schema JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Master seed (required)")->required();
    cmd->add_option("--alpha", alpha, "Per-test significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    cmd->add_option("--permutations", permutations, "Wasserstein permutations")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--methods", methods, "Comma list of wasserstein, ks")->capture_default_str();
    cmd->add_option("--replicates", replicates, "Subsample draws per size")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--pass-rule", pass_rule, "single_draw, all_replicates or majority")
        ->check(CLI::IsMember({"single_draw", "all_replicates", "majority"}))
        ->capture_default_str();
    cmd->add_flag("--nested", nested, "Reuse one draw ordering across sizes");
    cmd->add_option("--export-ids", export_ids, "Write the subsample ids (at the reported size) to this CSV");
    cmd->add_option("--id-column", id_column, "Source id column")->capture_default_str();
  }

  AlignmentConfig config() const {
    AlignmentConfig c;
    c.alpha = alpha;
    c.permutations = permutations;
    c.use_wasserstein = c.use_ks = false;
    for (const auto& m : split_list(methods)) {
      if (m == "wasserstein")
        c.use_wasserstein = true;
      else if (m == "ks")
        c.use_ks = true;
      else
        throw std::invalid_argument("unknown method '" + m + "' (expected wasserstein or ks)");
    }
    c.seed = seed;
    c.replicates = replicates;
    c.pass_rule = parse_pass_rule(pass_rule);
    c.nesting = nested ? Nesting::nested : Nesting::independent;
    c.validate();
    return c;
  }

  void describe(Run& run, const AlignmentConfig& c) const {
    run.parameters.update({{"alpha", c.alpha},
                           {"permutations", c.permutations},
                           {"methods", json::array()},
                           {"replicates", c.replicates},
                           {"pass_rule", to_string(c.pass_rule)},
                           {"nesting", to_string(c.nesting)}});
    if (c.use_wasserstein) run.parameters["methods"].push_back("wasserstein");
    if (c.use_ks) run.parameters["methods"].push_back("ks");
    run.seeds["master"] = c.seed;
    run.input("source", source);
    run.input("target", target);
    run.input("schema", schema);
  }
};

struct Loaded {
  CovariateSchema schema;
  Cohort source, target;
};

Loaded load_pair(const AlignOptions& o) {
  Loaded l;
  l.schema = load_schema(o.schema);
  l.source = read_cohort(o.source, l.schema, {}, "", o.id_column);
  l.target = read_cohort(o.target, l.schema);
  return l;
}

json pair_loads(const Loaded& l, const AlignmentProblem& p) {
  auto strata = [](const StratumTable& t) {
    json ex = json::array();
    for (const auto& e : t.excluded) ex.push_back({{"row", e.line}, {"reason", e.reason}});
    return json{{"included", t.total}, {"occupied_strata", t.strata.size()}, {"excluded", ex}};
  };
  return {{"source", {{"load", to_json(l.source.report)}, {"strata", strata(p.source_strata)}}},
          {"target", {{"load", to_json(l.target.report)}, {"strata", strata(p.target_strata)}}}};
}

std::string pair_text(const Loaded& l, const AlignmentProblem& p) {
  std::ostringstream s;
  s << load_summary("source", l.source) << load_summary("target", l.target);
  if (!p.source_strata.excluded.empty() || !p.target_strata.excluded.empty())
    s << "outside the schema bins: " << p.source_strata.excluded.size() << " source rows, "
      << p.target_strata.excluded.size() << " target rows excluded\n";
  s << "target strata: " << p.proportions.counts.size() << " occupied, " << p.target_strata.total
    << " rows define the proportions\n\n";
  return s.str();
}

void export_ids(const std::string& path, const Cohort& source, const SubsampleResult& s) {
  std::ostringstream out;
  write_subsample_ids(out, source, s);
  write_file(path, out.str());
}

std::string assessment_text(const json& a) {
  std::ostringstream s;
  s << "requested n " << a.at("requested_n").get<std::size_t>() << ", realized n " << a.at("realized_n").get<std::size_t>()
    << '\n';
  const auto& reps = a.at("replicates");
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (reps.size() > 1)
      s << "\nreplicate " << r << " (realized n " << reps[r].at("realized_n").get<std::size_t>() << ")\n";
    const auto def = reps[r].at("deficient_strata").get<std::size_t>();
    if (def) s << def << " target strata could not be filled to quota\n";
    render_alignment_text(s, reps[r].at("report"));
  }
  s << "verdict: " << (a.at("passed").get<bool>() ? "ALIGNED" : "NOT ALIGNED") << '\n';
  return s.str();
}

// Commands ------------------------------------------------------------------

int cmd_validate(const std::string& schema_path, const std::string& cohort_path, const std::vector<std::string>& scores,
                 const std::string& outcome, const Output& out) {
  Run run;
  run.command = "validate";
  run.input("schema", schema_path);
  run.input("cohort", cohort_path);
  run.parameters = {{"scores", scores}, {"outcome", outcome}};
  const auto schema = load_schema(schema_path);
  const auto cohort = read_cohort(cohort_path, schema, scores, outcome);
  const auto strata = build_strata(cohort, schema);

  std::map<std::string, std::size_t> reasons;
  for (const auto& e : cohort.report.excluded) ++reasons[e.reason];
  for (const auto& e : strata.excluded) ++reasons["outside bins: " + e.reason];
  const std::size_t excluded = cohort.report.excluded.size() + strata.excluded.size();

  std::vector<std::pair<std::size_t, StratumKey>> occupancy;
  for (const auto& [k, m] : strata.strata) occupancy.emplace_back(m.size(), k);
  std::sort(occupancy.begin(), occupancy.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  json top = json::array();
  for (std::size_t i = 0; i < occupancy.size() && i < 10; ++i)
    top.push_back({{"key", occupancy[i].second.to_string()}, {"count", occupancy[i].first}});
  json strata_ex = json::array();
  for (const auto& e : strata.excluded) strata_ex.push_back({{"row", e.line}, {"reason", e.reason}});

  const json result{{"load", to_json(cohort.report)},
                    {"out_of_range_excluded", strata_ex},
                    {"rows_excluded", excluded},
                    {"rows_stratified", strata.total},
                    {"occupied_strata", strata.strata.size()},
                    {"key_space", schema.key_space_size()},
                    {"largest_strata", top},
                    {"label_order", schema.label_order}};

  std::ostringstream text;
  text << cohort.report.rows_read << " rows read, " << strata.total << " rows usable\n";
  if (excluded == 0) text << "0 rows excluded\n";
  for (const auto& [reason, n] : reasons) text << n << (n == 1 ? " row" : " rows") << " excluded: " << reason << '\n';
  for (const auto& e : cohort.report.excluded) text << "  line " << e.line << ": " << e.reason << '\n';
  for (const auto& e : strata.excluded) text << "  row " << e.line << ": " << e.reason << '\n';
  text << strata.strata.size() << " of " << schema.key_space_size() << " strata occupied (label order";
  for (const auto& v : schema.label_order) text << ' ' << v;
  text << ")\n";
  for (const auto& t : top) text << "  " << t.at("key").get<std::string>() << "  " << t.at("count").get<std::size_t>() << '\n';
  out.emit(run, result, text.str());
  return kAligned;
}

int cmd_align(const AlignOptions& o, std::size_t n, const Output& out) {
  Run run;
  run.command = "align";
  const auto config = o.config();
  o.describe(run, config);
  run.parameters["n"] = n;
  const auto data = load_pair(o);
  const AlignmentProblem problem(data.source, data.target, data.schema);
  const auto a = assess_size(problem, n, config);
  json result = to_json(a);
  result["inputs"] = pair_loads(data, problem);
  for (std::size_t r = 0; r < a.replicates.size(); ++r)
    run.seeds["replicate_" + std::to_string(r)] = {{"draw", a.replicates[r].draw_seed},
                                                   {"tests", test_seed_for(config, n, static_cast<int>(r))}};
  if (!o.export_ids.empty()) export_ids(o.export_ids, data.source, a.replicates.front().subsample);
  out.emit(run, result, pair_text(data, problem) + assessment_text(result));
  return a.passed ? kAligned : kNotAligned;
}

int cmd_sweep(const AlignOptions& o, const std::string& schedule_text, const Output& out) {
  Run run;
  run.command = "sweep";
  const auto config = o.config();
  o.describe(run, config);
  const auto schedule = schedule_text.empty() ? default_schedule() : parse_schedule(schedule_text);
  run.parameters["schedule"] = schedule;
  const auto data = load_pair(o);
  const AlignmentProblem problem(data.source, data.target, data.schema);
  const auto sw = sweep(problem, schedule, config);
  json result = to_json(sw);
  result["inputs"] = pair_loads(data, problem);
  // first size at which each variable fails
  json first_fail = json::object();
  for (const auto& a : sw.assessments)
    for (const auto& v : a.failing_variables)
      if (!first_fail.contains(v)) first_fail[v] = a.requested_n;
  result["first_failing_size"] = first_fail;
  if (!o.export_ids.empty() && sw.max_aligned_requested_n)
    for (const auto& a : sw.assessments)
      if (a.requested_n == *sw.max_aligned_requested_n) export_ids(o.export_ids, data.source, a.replicates.front().subsample);

  std::ostringstream text;
  text << pair_text(data, problem);
  render_sweep_text(text, result);
  if (!first_fail.empty()) {
    text << "first failing size:";
    for (const auto& [v, n] : first_fail.items()) text << ' ' << v << '@' << n.get<std::size_t>();
    text << '\n';
  }
  out.emit(run, result, text.str());
  return sw.max_aligned_requested_n ? kAligned : kNotAligned;
}

int cmd_maxsize(const AlignOptions& o, const Output& out) {
  Run run;
  run.command = "maxsize";
  const auto config = o.config();
  o.describe(run, config);
  const auto data = load_pair(o);
  const AlignmentProblem problem(data.source, data.target, data.schema);
  const auto m = max_aligned_size(problem, config);
  json result = to_json(m);
  result["inputs"] = pair_loads(data, problem);
  if (!o.export_ids.empty() && m.best) export_ids(o.export_ids, data.source, m.best->replicates.front().subsample);

  std::ostringstream text;
  text << pair_text(data, problem);
  std::vector<std::vector<std::string>> rows{{"requested", "realized", "verdict"}};
  for (const auto& p : m.probes)
    rows.push_back({std::to_string(p.requested_n), std::to_string(p.realized_n), p.passed ? "pass" : "FAIL"});
  detail::print_table(text, rows);
  if (m.n_star) {
    text << "\nlargest aligned requested size: " << *m.n_star << " (realized " << m.best->realized_n() << ")";
    if (m.availability_capped) text << ", capped by source availability at " << m.saturation_n;
    text << "\n\n" << assessment_text(result.at("best"));
  } else {
    text << "\nno aligned size: the start size " << m.start_n << " already fails\n\n"
         << assessment_text(result.at("diagnostics"));
  }
  out.emit(run, result, text.str());
  return m.n_star ? kAligned : kNotAligned;
}

struct EvaluateOptions {
  std::string cohort, schema, outcome, scores, strata, subset, target, schedule, trajectory_csv;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int replicates = 1;
  std::string id_column = "id";
};

int cmd_evaluate(const EvaluateOptions& o, const Output& out) {
  Run run;
  run.command = "evaluate";
  const auto score_cols = split_list(o.scores);
  const auto group_vars = split_list(o.strata);
  if (score_cols.empty()) throw std::invalid_argument("--scores needs at least one column");
  run.parameters = {{"scores", score_cols}, {"outcome", o.outcome}, {"strata", group_vars}};
  run.input("cohort", o.cohort);
  run.input("schema", o.schema);
  const auto schema = load_schema(o.schema);
  auto cohort = read_cohort(o.cohort, schema, score_cols, o.outcome, o.id_column);

  if (!o.subset.empty()) {
    // restrict to the rows whose ids appear in a subsample-id CSV
    run.input("subset", o.subset);
    const auto ids = csv::read_file(o.subset);
    if (ids.header.empty() || ids.header[0] != "id") throw SchemaError("subset file must have an 'id' column");
    std::set<std::string> keep;
    for (const auto& r : ids.rows) keep.insert(r[0]);
    if (cohort.ids.empty()) throw SchemaError("cohort has no '" + o.id_column + "' column to match the subset against");
    Cohort sub;
    sub.name = cohort.name;
    sub.report = cohort.report;
    for (std::size_t r = 0; r < cohort.size(); ++r) {
      if (!keep.contains(cohort.ids[r])) continue;
      sub.ids.push_back(cohort.ids[r]);
      for (const auto& [k, v] : cohort.continuous) sub.continuous[k].push_back(v[r]);
      for (const auto& [k, v] : cohort.categorical) sub.categorical[k].push_back(v[r]);
      for (const auto& [k, v] : cohort.scores) sub.scores[k].push_back(v[r]);
      for (const auto& [k, v] : cohort.outcomes) sub.outcomes[k].push_back(v[r]);
      ++sub.rows;
    }
    if (sub.rows == 0) throw SchemaError("no cohort rows match the subset ids");
    run.parameters["subset_rows"] = sub.rows;
    cohort = std::move(sub);
  }

  const auto table = stratified_auc(cohort, score_cols, o.outcome, schema, group_vars);
  json result{{"n", cohort.size()}, {"load", to_json(cohort.report)}, {"stratified", to_json(table)}};

  // level-vs-level DeLong comparisons inside each grouping variable
  json comparisons = json::array();
  for (const auto& s : score_cols) {
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      for (std::size_t j = i + 1; j < table.rows.size(); ++j) {
        const auto& a = table.rows[i];
        const auto& b = table.rows[j];
        if (a.group != b.group || a.group == "all") continue;
        json c{{"score", s}, {"group", a.group}, {"level_a", a.level}, {"level_b", b.level}};
        const auto& ra = a.by_score.at(s);
        const auto& rb = b.by_score.at(s);
        if (!ra || !rb) {
          c["z"] = c["p_value"] = nullptr;
          c["note"] = "unavailable: a stratum lacks cases or controls";
        } else {
          try {
            const auto cmp = compare_auc_independent(*ra, *rb);
            c["z"] = cmp.z;
            c["p_value"] = cmp.p_value;
          } catch (const std::invalid_argument& e) {
            c["z"] = c["p_value"] = nullptr;
            c["note"] = e.what();
          }
        }
        comparisons.push_back(std::move(c));
      }
  }
  result["level_comparisons"] = comparisons;

  // paired comparisons between score columns on the full cohort
  json paired = json::array();
  std::vector<std::size_t> all(cohort.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < score_cols.size(); ++i)
    for (std::size_t j = i + 1; j < score_cols.size(); ++j) {
      const auto& y = cohort.outcome_column(o.outcome);
      json c{{"score_a", score_cols[i]}, {"score_b", score_cols[j]}};
      try {
        const auto cmp = compare_auc_paired(cohort.score_column(score_cols[i]), cohort.score_column(score_cols[j]), y);
        c["z"] = cmp.z;
        c["p_value"] = cmp.p_value;
      } catch (const std::invalid_argument& e) {
        c["z"] = c["p_value"] = nullptr;
        c["note"] = e.what();
      }
      paired.push_back(std::move(c));
    }
  result["paired_comparisons"] = paired;

  std::ostringstream text;
  text << load_summary("cohort", cohort) << '\n';
  render_stratified_text(text, result.at("stratified"));
  for (const auto& c : paired)
    if (!c.at("p_value").is_null())
      text << "paired DeLong " << c.at("score_a").get<std::string>() << " vs " << c.at("score_b").get<std::string>()
           << ": z = " << format_fixed(c.at("z").get<double>(), 3) << ", p = " << format_p(c.at("p_value").get<double>())
           << '\n';

  if (!o.schedule.empty()) {
    if (o.target.empty()) throw std::invalid_argument("a trajectory (--schedule) needs --target");
    if (!o.seed_given) throw std::invalid_argument("a trajectory (--schedule) needs --seed");
    if (!o.subset.empty()) throw std::invalid_argument("--subset and --schedule cannot be combined");
    run.input("target", o.target);
    AlignmentConfig config;
    config.seed = o.seed;
    config.replicates = o.replicates;
    config.validate();
    const auto schedule = parse_schedule(o.schedule);
    run.parameters["schedule"] = schedule;
    run.parameters["replicates"] = o.replicates;
    run.seeds["master"] = o.seed;
    const auto target = read_cohort(o.target, schema);
    const AlignmentProblem problem(cohort, target, schema);
    const auto traj = auc_trajectory(problem, schedule, score_cols, o.outcome, config);
    result["trajectory"] = to_json(traj);
    std::ostringstream csv_out;
    render_trajectory_csv(csv_out, result["trajectory"]);
    if (!o.trajectory_csv.empty()) write_file(o.trajectory_csv, csv_out.str());
    if (!out.dir.empty()) out.write("trajectory.csv", csv_out.str());
    text << "\ntrajectory (mean AUC and 95% band over " << o.replicates << " draw(s) per size)\n" << csv_out.str();
  }
  out.emit(run, result, text.str());
  return kAligned;
}

struct SynthOptions {
  std::string spec, schema, csv_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<double> auc;
  double prevalence = 0.04;
  std::optional<std::uint64_t> score_seed;
  std::string score_col = "score", outcome_col = "outcome";
};

int cmd_synth(const SynthOptions& o, const Output& out) {
  Run run;
  run.command = "synth";
  run.input("spec", o.spec);
  run.input("schema", o.schema);
  const auto raw = json::parse(file_bytes(o.spec));
  auto spec = load_population_spec(o.spec);
  if (o.seed)
    spec.seed = *o.seed;
  else if (!raw.contains("seed"))
    throw std::invalid_argument("no seed: give --seed or a \"seed\" field in the spec");
  if (o.n) spec.n = *o.n;
  spec.validate();
  const auto schema = load_schema(o.schema);
  auto cohort = generate_cohort(spec, schema);
  run.seeds["cohort"] = spec.seed;
  run.parameters = {{"name", spec.name}, {"n", spec.n}};
  if (o.auc) {
    if (!o.score_seed) throw std::invalid_argument("--auc needs --score-seed");
    cohort = generate_scores(cohort, *o.auc, o.prevalence, *o.score_seed, o.score_col, o.outcome_col);
    run.seeds["scores"] = *o.score_seed;
    run.parameters.update({{"target_auc", *o.auc}, {"prevalence", o.prevalence}, {"score_column", o.score_col},
                           {"outcome_column", o.outcome_col}});
  }
  std::ostringstream csv_out;
  write_cohort_csv(csv_out, cohort, schema);
  const std::string bytes = csv_out.str();
  write_file(o.csv_path, bytes);

  json marginals = json::object();
  std::ostringstream text;
  text << "wrote " << cohort.size() << " rows to " << o.csv_path << '\n';
  for (const auto& c : spec.continuous) {
    const auto& v = cohort.continuous.at(c.name);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    marginals[c.name] = {{"mean", mean}, {"spec_mean", c.mean}};
    text << "  " << c.name << ": mean " << format_fixed(mean, 2) << " (spec " << c.mean << ")\n";
  }
  const auto counts = [](const std::vector<int>& v, int code) {
    return static_cast<double>(std::count(v.begin(), v.end(), code)) / static_cast<double>(v.size());
  };
  for (const auto& c : spec.categorical) {
    const auto* sc = schema.find_categorical(c.name);
    json levels = json::object();
    text << "  " << c.name << ":";
    for (const auto& [label, p] : c.levels) {
      const double share = counts(cohort.categorical.at(c.name), *sc->code_of(label));
      levels[label] = {{"share", share}, {"spec_p", p}};
      text << ' ' << label << ' ' << format_fixed(share, 3);
    }
    text << '\n';
    marginals[c.name] = levels;
  }
  json result{{"rows", cohort.size()}, {"csv_sha256", sha256(bytes)}, {"marginals", marginals}};
  if (o.auc) {
    std::vector<std::size_t> all(cohort.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto d = scored_rows(cohort, o.score_col, o.outcome_col, all);
    if (d.cases() && d.controls()) {
      result["empirical_auc"] = auc(d);
      text << "  empirical AUC " << format_fixed(auc(d), 4) << " (target " << *o.auc << ")\n";
    }
  }
  out.emit(run, result, text.str());
  return kAligned;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distinct: covariate alignment of a source cohort to a target cohort"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version));
  Output out;
  auto add_output = [&](CLI::App* cmd) {
    cmd->add_option("--out", out.dir, "Directory for the JSON report and extra files");
    cmd->add_flag("--json", out.json_stdout, "Print the JSON report instead of the text rendering");
  };

  std::string v_schema, v_cohort, v_scores, v_outcome;
  auto* validate = app.add_subcommand("validate", "Load a cohort against a schema and report exclusions");
  validate->add_option("--schema", v_schema, "Covariate schema JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--cohort", v_cohort, "Cohort CSV")->required()->check(CLI::ExistingFile);
  validate->add_option("--scores", v_scores, "Comma list of score columns to check");
  validate->add_option("--outcome", v_outcome, "Outcome column to check");
  add_output(validate);

  AlignOptions align_opts;
  std::size_t align_n = 0;
  auto* align = app.add_subcommand("align", "Draw one subsample of size n and test its alignment");
  align_opts.add_to(align);
  align->add_option("--n", align_n, "Requested subsample size")->required()->check(CLI::PositiveNumber);
  add_output(align);

  AlignOptions sweep_opts;
  std::string sweep_schedule;
  auto* sweep_cmd = app.add_subcommand("sweep", "Assess a schedule of increasing subsample sizes");
  sweep_opts.add_to(sweep_cmd);
  sweep_cmd->add_option("--schedule", sweep_schedule, "Comma list of requested sizes (default: 279,...,17958)");
  add_output(sweep_cmd);

  AlignOptions max_opts;
  auto* maxsize = app.add_subcommand("maxsize", "Search for the largest aligned subsample size");
  max_opts.add_to(maxsize);
  add_output(maxsize);

  EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "AUC with DeLong intervals, overall, by stratum and by size");
  evaluate->add_option("--cohort", eval_opts.cohort, "Cohort (or source) CSV with scores")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--schema", eval_opts.schema, "Covariate schema JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--scores", eval_opts.scores, "Comma list of score columns")->required();
  evaluate->add_option("--outcome", eval_opts.outcome, "Binary outcome column")->required();
  evaluate->add_option("--strata", eval_opts.strata, "Comma list of covariates to stratify by");
  evaluate->add_option("--subset", eval_opts.subset, "Restrict to the ids listed in this CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--id-column", eval_opts.id_column, "Cohort id column")->capture_default_str();
  evaluate->add_option("--target", eval_opts.target, "Target cohort CSV (trajectory)")->check(CLI::ExistingFile);
  evaluate->add_option("--schedule", eval_opts.schedule, "Comma list of sizes for an AUC trajectory");
  auto* eval_seed = evaluate->add_option("--seed", eval_opts.seed, "Master seed (trajectory)");
  evaluate->add_option("--replicates", eval_opts.replicates, "Draws per size (trajectory)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate->add_option("--trajectory-csv", eval_opts.trajectory_csv, "Write the trajectory CSV here");
  add_output(evaluate);

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort from a population spec");
  synth->add_option("--spec", synth_opts.spec, "Population spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--schema", synth_opts.schema, "Covariate schema JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--csv", synth_opts.csv_path, "Output cohort CSV")->required();
  synth->add_option("--seed", synth_opts.seed, "Override the spec seed");
  synth->add_option("--n", synth_opts.n, "Override the spec size")->check(CLI::PositiveNumber);
  synth->add_option("--auc", synth_opts.auc, "Add a binormal score with this AUC")->check(CLI::Range(0.5, 1.0));
  synth->add_option("--prevalence", synth_opts.prevalence, "Case prevalence for the outcome")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--score-seed", synth_opts.score_seed, "Seed for outcomes and scores");
  synth->add_option("--score-column", synth_opts.score_col, "Score column name")->capture_default_str();
  synth->add_option("--outcome-column", synth_opts.outcome_col, "Outcome column name")->capture_default_str();
  add_output(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kError;
  }

  try {
    if (*validate) return cmd_validate(v_schema, v_cohort, split_list(v_scores), v_outcome, out);
    if (*align) return cmd_align(align_opts, align_n, out);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, sweep_schedule, out);
    if (*maxsize) return cmd_maxsize(max_opts, out);
    if (*evaluate) {
      eval_opts.seed_given = eval_seed->count() > 0;
      return cmd_evaluate(eval_opts, out);
    }
    if (*synth) return cmd_synth(synth_opts, out);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
  } catch (const BinRangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kError;
}
