#include "polymerlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "polymerlab/disorder.hpp"
#include "polymerlab/hitting.hpp"
#include "polymerlab/intersections.hpp"
#include "polymerlab/parallel.hpp"
#include "polymerlab/rng.hpp"
#include "polymerlab/schedule.hpp"
#include "polymerlab/walk.hpp"

namespace polymerlab {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_parameter: return "invalid_parameter";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::capacity: return "capacity";
    case ErrorCategory::invalid_endpoint: return "invalid_endpoint";
    case ErrorCategory::incomplete_input: return "incomplete_input";
    case ErrorCategory::io: return "io";
    case ErrorCategory::version_mismatch: return "version_mismatch";
  }
  return "unknown";
}

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_parameter: return 4;
    case ErrorCategory::domain: return 5;
    case ErrorCategory::capacity: return 6;
    case ErrorCategory::invalid_endpoint: return 7;
    case ErrorCategory::incomplete_input: return 8;
    case ErrorCategory::io: return 9;
    case ErrorCategory::version_mismatch: return 10;
  }
  return exit_code::internal;
}

namespace {
constexpr int kSchema = 1;
}

std::string version_tag() {
  return std::string("polymerlab-v") + POLYMERLAB_VERSION + "-schema" + std::to_string(kSchema);
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"moments", "second-moment-scan", "schedule",
                                              "poisson", "pair-prob",          "hitting",
                                              "lclt",    "qlarge",             "confinement"};
  return names;
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidParameter("config must be a JSON object");
  static const std::set<std::string> known{"command", "params", "replicates", "seed", "threads", "out"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw InvalidParameter("unknown config field '" + it.key() + "'");
  ExperimentConfig c;
  try {
    if (j.contains("command")) c.command = j.at("command").get<std::string>();
    if (j.contains("params")) {
      if (!j.at("params").is_object()) throw InvalidParameter("params must be an object");
      c.params = j.at("params");
    }
    if (j.contains("replicates")) c.replicates = j.at("replicates").get<std::uint64_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("out")) c.output_path = j.at("out").get<std::string>();
  } catch (const Json::exception& e) {
    throw InvalidParameter(std::string("bad config value: ") + e.what());
  }
  return c;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidParameter("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) v = text;
  cfg.params[key] = v;
}

std::string to_csv(const CsvSeries& s) {
  std::ostringstream out;
  for (std::size_t i = 0; i < s.columns.size(); ++i) out << (i ? "," : "") << s.columns[i];
  out << '\n';
  char buf[64];
  for (const auto& row : s.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

const Metric& ResultRecord::metric(const std::string& name) const {
  for (const auto& [k, m] : metrics)
    if (k == name) return m;
  throw IncompleteInput("record has no metric '" + name + "'");
}

std::string ResultRecord::summary() const {
  std::ostringstream out;
  out << command << " ok";
  char buf[64];
  int shown = 0;
  for (const auto& [k, m] : metrics) {
    if (shown++ == 4) break;
    std::snprintf(buf, sizeof buf, "%.6g", m.value);
    out << ' ' << k << '=' << buf;
    if (m.std_error) {
      std::snprintf(buf, sizeof buf, "%.2g", *m.std_error);
      out << "(" << buf << ")";
    }
  }
  std::snprintf(buf, sizeof buf, "%.3f", wall_time);
  out << " wall=" << buf << "s";
  return out.str();
}

namespace {

// JSON has no infinities; they travel as "inf", "-inf" and "nan".
Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double denum(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw IncompleteInput("bad number '" + s + "'");
}

}  // namespace

Json to_json(const ResultRecord& r) {
  Json j;
  j["version"] = r.version;
  j["command"] = r.command;
  j["config"] = r.config;
  j["fingerprint"] = r.fingerprint;
  Json m = Json::object();
  for (const auto& [k, v] : r.metrics) {
    Json e;
    e["value"] = num(v.value);
    e["std_error"] = v.std_error ? num(*v.std_error) : Json(nullptr);
    e["exact"] = v.exact;
    m[k] = e;
  }
  j["metrics"] = m;
  j["details"] = r.details;
  if (r.series) {
    Json rows = Json::array();
    for (const auto& row : r.series->rows) {
      Json x = Json::array();
      for (double v : row) x.push_back(num(v));
      rows.push_back(x);
    }
    j["series"] = {{"columns", r.series->columns}, {"rows", rows}};
  } else {
    j["series"] = nullptr;
  }
  j["wall_time"] = r.wall_time;
  j["threads"] = r.threads;
  return j;
}

ResultRecord record_from_json(const Json& j) {
  ResultRecord r;
  try {
    r.version = j.at("version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.config = j.at("config");
    r.fingerprint = j.at("fingerprint").get<std::string>();
    for (auto it = j.at("metrics").begin(); it != j.at("metrics").end(); ++it) {
      Metric m;
      m.value = denum(it.value().at("value"));
      if (!it.value().at("std_error").is_null()) m.std_error = denum(it.value().at("std_error"));
      m.exact = it.value().at("exact").get<bool>();
      r.metrics.emplace_back(it.key(), m);
    }
    r.details = j.at("details");
    if (!j.at("series").is_null()) {
      CsvSeries s;
      s.columns = j.at("series").at("columns").get<std::vector<std::string>>();
      for (const auto& row : j.at("series").at("rows")) {
        std::vector<double> x;
        for (const auto& v : row) x.push_back(denum(v));
        s.rows.push_back(x);
      }
      r.series = s;
    }
    r.wall_time = j.at("wall_time").get<double>();
    r.threads = j.at("threads").get<unsigned>();
  } catch (const Json::exception& e) {
    throw IncompleteInput(std::string("malformed record: ") + e.what());
  }
  return r;
}

std::string config_fingerprint(const Json& resolved) {
  // Sorted keys make the dump canonical.
  const std::string text = nlohmann::json(resolved).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Reads parameters with defaults, records the resolved values and rejects
// names no reader asked for.
class Params {
 public:
  explicit Params(const Json& in) : in_(in) {
    if (!in_.is_object()) throw InvalidParameter("params must be an object");
  }

  bool has(const std::string& k) const { return in_.contains(k); }

  double real(const std::string& k, double def) {
    double v = def;
    if (auto j = take(k)) {
      if (!j->is_number()) throw InvalidParameter(k + " must be a number");
      v = j->get<double>();
    }
    out_[k] = v;
    return v;
  }

  std::int64_t integer(const std::string& k, std::int64_t def) {
    std::int64_t v = def;
    if (auto j = take(k)) v = as_int(k, *j);
    out_[k] = v;
    return v;
  }

  bool flag(const std::string& k, bool def) {
    bool v = def;
    if (auto j = take(k)) {
      if (!j->is_boolean()) throw InvalidParameter(k + " must be true or false");
      v = j->get<bool>();
    }
    out_[k] = v;
    return v;
  }

  std::string text(const std::string& k, const std::string& def) {
    std::string v = def;
    if (auto j = take(k)) {
      if (!j->is_string()) throw InvalidParameter(k + " must be a string");
      v = j->get<std::string>();
    }
    out_[k] = v;
    return v;
  }

  std::vector<std::int64_t> int_list(const std::string& k, const std::vector<std::int64_t>& def) {
    std::vector<std::int64_t> v = def;
    if (auto j = take(k)) {
      if (!j->is_array() || j->empty()) throw InvalidParameter(k + " must be a nonempty array");
      v.clear();
      for (const auto& e : *j) v.push_back(as_int(k, e));
    }
    out_[k] = v;
    return v;
  }

  LatticePoint point(const std::string& k, LatticePoint def) {
    LatticePoint p = def;
    if (auto j = take(k)) {
      if (!j->is_array() || j->size() != 2) throw InvalidParameter(k + " must be [x, y]");
      p = {as_int(k, (*j)[0]), as_int(k, (*j)[1])};
    }
    out_[k] = {p.x, p.y};
    return p;
  }

  /// Optional real; absent stays absent in the resolved echo.
  std::optional<double> maybe_real(const std::string& k) {
    auto j = take(k);
    if (!j) return std::nullopt;
    if (!j->is_number()) throw InvalidParameter(k + " must be a number");
    out_[k] = j->get<double>();
    return j->get<double>();
  }

  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!used_.count(it.key())) throw InvalidParameter("unknown parameter '" + it.key() + "'");
  }

  const Json& resolved() const { return out_; }

 private:
  std::optional<Json> take(const std::string& k) {
    used_.insert(k);
    if (!in_.contains(k)) return std::nullopt;
    return in_.at(k);
  }

  static std::int64_t as_int(const std::string& k, const Json& j) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
      const double d = j.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9.2e18) return static_cast<std::int64_t>(d);
    }
    throw InvalidParameter(k + " must be an integer");
  }

  Json in_;
  Json out_ = Json::object();
  std::set<std::string> used_;
};

struct Output {
  std::vector<std::pair<std::string, Metric>> metrics;
  Json details = Json::object();
  std::optional<CsvSeries> series;
  std::uint64_t replicates = 0;  // 0 for deterministic commands

  void put(const std::string& k, double v, bool exact = true) { metrics.emplace_back(k, Metric{v, std::nullopt, exact}); }
  void put(const std::string& k, double v, double se) { metrics.emplace_back(k, Metric{v, se, false}); }
};

std::uint64_t reps(const ExperimentConfig& c, std::uint64_t def) {
  return c.replicates ? c.replicates : def;
}

ParameterTuple tuple_from(Params& p, const std::string& default_preset) {
  const std::string name = p.text("preset", default_preset);
  ParameterTuple t = preset(name);
  t.gamma = p.real("gamma", t.gamma);
  t.epsilon0 = p.real("epsilon0", t.epsilon0);
  t.delta = p.real("delta", t.delta);
  t.M = p.integer("M", t.M);
  t.nu1 = p.integer("nu1", t.nu1);
  t.nu2 = p.integer("nu2", t.nu2);
  t.alpha = p.integer("alpha", t.alpha);
  if (t.log_N || p.has("log_N")) {
    t.log_N = p.real("log_N", t.log_N ? static_cast<double>(*t.log_N) : 0.0);
  } else {
    t.N = p.integer("N", t.N);
  }
  t.q = static_cast<int>(p.integer("q", t.q));
  return t;
}

Json constraint_json(const ConstraintReport& r) {
  Json c = Json::array();
  for (const auto& cl : r.clauses)
    c.push_back({{"name", cl.name},
                 {"lhs", num(static_cast<double>(cl.lhs))},
                 {"relation", cl.relation},
                 {"rhs", num(static_cast<double>(cl.rhs))},
                 {"pass", cl.pass}});
  return {{"clauses", c}, {"strict_sizes", r.strict_sizes}, {"all_pass", r.all_pass()}};
}

Json validation_json(const ValidationReport& v) {
  Json c = Json::array();
  for (const auto& b : v.checks)
    c.push_back({{"name", b.name},
                 {"k", b.k},
                 {"lhs", num(static_cast<double>(b.lhs))},
                 {"rhs", num(static_cast<double>(b.rhs))},
                 {"holds", b.holds}});
  return {{"vacuous", v.vacuous}, {"all_hold", v.all_hold()}, {"checks", c}};
}

Output cmd_moments(Params& p, const ExperimentConfig& c, const ParallelRunner& runner) {
  const double beta_hat = p.real("beta_hat", 0.5);
  const std::int64_t N = p.integer("N", 1000);
  const int q = static_cast<int>(p.integer("q", 2));
  p.finish();
  const auto d = build_disorder(beta_hat, N);
  Output o;
  o.replicates = reps(c, 10000);
  const auto e = mc_moment(d, q, o.replicates, RngStream(c.seed, 0), runner);
  o.put("estimate", e.estimate, e.std_error);
  o.put("R_N", d.R_N);
  o.put("beta_N", d.beta_N);
  if (q == 2 && N <= kExactBudget) {
    const auto x = exact_second_moment(d);
    o.put("exact_second_moment", x.value);
    o.put("exact_error_bound", x.error_bound);
  }
  if (beta_hat < 1.0) o.put("subcritical_prediction", subcritical_prediction(d, q));
  return o;
}

Output cmd_scan(Params& p) {
  const double beta_hat = p.real("beta_hat", 0.5);
  const auto Ns = p.int_list("Ns", {100, 1000, 10000});
  p.finish();
  if (!(beta_hat > 0.0 && beta_hat < 1.0)) throw DomainError("second-moment-scan needs 0 < beta_hat < 1");
  const double limit = 1.0 / (1.0 - beta_hat * beta_hat);
  Output o;
  CsvSeries s{{"N", "exact", "gap", "error_bound"}, {}};
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (auto N : Ns) {
    const auto x = exact_second_moment(build_disorder(beta_hat, N));
    const double gap = std::abs(x.value - limit);
    decreasing = decreasing && gap < prev;
    prev = gap;
    s.rows.push_back({static_cast<double>(N), x.value, gap, x.error_bound});
  }
  o.put("limit", limit);
  o.put("final_gap", prev);
  o.put("gap_strictly_decreasing", decreasing ? 1.0 : 0.0);
  o.series = s;
  return o;
}

Output cmd_schedule(Params& p) {
  const ParameterTuple t = tuple_from(p, "desk-large");
  const ScheduleMode mode = schedule_mode_from_string(p.text("mode", "log_N"));
  const bool big = p.flag("big_float", t.log_N.has_value());
  p.finish();
  Output o;
  const auto cr = check_parameters(t);
  o.details["constraints"] = constraint_json(cr);
  o.put("constraints_pass", cr.all_pass() ? 1.0 : 0.0);
  CsvSeries s;
  if (big) {
    const auto ls = build_log_schedule(t, mode);
    const auto v = validate_schedule_bounds(ls, t);
    o.put("K", ls.K);
    o.put("alpha_bar", static_cast<double>(ls.alpha_bar));
    o.put("bounds_hold", v.all_hold() ? 1.0 : 0.0);
    o.details["validation"] = validation_json(v);
    s.columns = {"k", "f", "log_l", "log_o", "log_L"};
    for (int k = 1; k <= ls.K + 1; ++k)
      s.rows.push_back({static_cast<double>(k), static_cast<double>(ls.f[k]),
                        static_cast<double>(ls.log_l[k]), static_cast<double>(ls.log_o[k]),
                        static_cast<double>(ls.log_L[k])});
  } else {
    const auto sc = build_schedule(t, mode);
    const auto v = validate_schedule_bounds(sc, t);
    o.put("K", sc.K);
    o.put("alpha_bar", static_cast<double>(sc.alpha_bar));
    o.put("l_1", static_cast<double>(sc.l[1]));
    o.put("bounds_hold", v.all_hold() ? 1.0 : 0.0);
    o.details["validation"] = validation_json(v);
    Json blocks = Json::array();
    s.columns = {"k", "l", "o", "L", "t_first", "t_last"};
    for (int k = 1; k <= sc.K + 1; ++k) {
      const auto T = sc.interval(k);
      blocks.push_back({{"k", k}, {"l", sc.l[k]}, {"o", sc.o[k]}, {"L", sc.L[k]},
                        {"window", {T.begin, T.last()}}});
      s.rows.push_back({static_cast<double>(k), static_cast<double>(sc.l[k]),
                        static_cast<double>(sc.o[k]), static_cast<double>(sc.L[k]),
                        static_cast<double>(T.begin), static_cast<double>(T.last())});
    }
    o.details["schedule"] = {{"mode", to_string(mode)}, {"K", sc.K}, {"blocks", blocks}};
  }
  o.series = s;
  return o;
}

PairWindow window_from(Params& p, const ParameterTuple* t, int k) {
  PairWindow w;
  if (t) {
    const auto s = build_schedule(*t);
    w = pair_window_from_schedule(s, *t, k);
  }
  const std::int64_t t1 = p.integer("t1", w.interval.begin);
  const std::int64_t l = p.integer("l", w.interval.size() > 0 ? w.interval.size() - 1 : 0);
  w.interval = {t1, t1 + l + 1};
  w.horizon = p.integer("horizon", t ? w.horizon : 2 * (t1 + l));
  w.ball_radius = p.real("ball_radius", t ? w.ball_radius : 10.0 * std::sqrt(static_cast<double>(l)));
  return w;
}

Output cmd_poisson(Params& p, const ExperimentConfig& c, const ParallelRunner& runner) {
  PoissonConfig pc;
  pc.q0 = static_cast<int>(p.integer("q0", 6));
  const std::int64_t t1 = p.integer("t1", 1000);
  const std::int64_t l = p.integer("l", 10000);
  pc.window.interval = {t1, t1 + l + 1};
  pc.window.horizon = p.integer("horizon", 2 * (t1 + l));
  pc.window.ball_radius = p.real("ball_radius", 10.0 * std::sqrt(static_cast<double>(l)));
  const std::int64_t spacing = p.integer("spacing", 0);
  p.finish();
  if (pc.q0 < 2) throw InvalidParameter("q0 must be >= 2");
  for (int i = 0; i < pc.q0; ++i) {
    pc.starts.push_back({2 * spacing * i, 0});
    pc.ends.push_back({0, 2 * spacing * i});
  }
  Output o;
  o.replicates = reps(c, 1000);
  const auto r = poisson_experiment(pc, o.replicates, RngStream(c.seed, 0), runner);
  o.put("mu", r.mu, r.mu_std_error);
  o.put("e1", r.e1, false);
  o.put("e2", r.e2, false);
  o.put("chen_stein_bound", r.chen_stein_bound, 2 * r.bound_terms_std_error);
  o.put("empirical_tv", r.empirical_tv, r.tv_noise);
  o.put("propagated_error", r.propagated_error, false);
  o.put("tv_within_bound",
        r.empirical_tv <= r.chen_stein_bound + 5 * r.propagated_error ? 1.0 : 0.0, false);
  o.details["pair_probs"] = r.pair_probs;
  o.details["hist_R"] = r.hist_R;
  CsvSeries s{{"k", "count"}, {}};
  for (std::size_t k = 0; k < r.hist_R_tilde.size(); ++k)
    s.rows.push_back({static_cast<double>(k), static_cast<double>(r.hist_R_tilde[k])});
  o.series = s;
  return o;
}

Output cmd_pair(Params& p, const ExperimentConfig& c, const ParallelRunner& runner) {
  const bool from_schedule = !p.has("t1") || p.has("preset");
  std::optional<ParameterTuple> t;
  int k = 0;
  if (from_schedule) {
    t = tuple_from(p, "desk-large");
    k = static_cast<int>(p.integer("k", 3));
  }
  const PairWindow w = window_from(p, t ? &*t : nullptr, k);
  const LatticePoint x1 = p.point("x1", {0, 0}), x2 = p.point("x2", {0, 0});
  const LatticePoint y1 = p.point("y1", {0, 0}), y2 = p.point("y2", {0, 0});
  p.finish();
  Output o;
  o.replicates = reps(c, 4000);
  const RngStream rng(c.seed, 0);
  const std::array<LatticePoint, 2> x{x1, x2}, y{y1, y2};
  const auto pc = estimate_pair_probability(w, x, y, PairVariant::conditioned, o.replicates, rng.substream(0), runner);
  const auto pu = estimate_pair_probability(w, x, y, PairVariant::unconditioned, o.replicates, rng.substream(1), runner);
  const auto pg = estimate_pair_probability(w, x, y, PairVariant::unguarded, o.replicates, rng.substream(2), runner);
  o.put("p_conditioned", pc.estimate, pc.std_error);
  o.put("p_unconditioned", pu.estimate, pu.std_error);
  o.put("p_unguarded", pg.estimate, pg.std_error);
  const double a = effective_radius();
  const double t1 = static_cast<double>(w.interval.begin), t2 = static_cast<double>(w.interval.last());
  if (a * a < t1) o.put("window_formula", window_formula({a, 0.0, t1, t2}).value);
  if (t) {
    const auto s = build_schedule(*t);
    o.put("alpha_bar", static_cast<double>(s.alpha_bar));
  }
  o.details["window"] = {{"t_first", w.interval.begin}, {"t_last", w.interval.last()},
                         {"horizon", w.horizon}, {"ball_radius", w.ball_radius},
                         {"effective_radius", a}};
  return o;
}

Output cmd_hitting(Params& p, const ExperimentConfig& c, const ParallelRunner& runner) {
  HittingQuery q;
  q.a = p.real("a", 0.5);
  q.r = p.real("r", 0.0);
  q.t1 = p.real("t1", 100.0);
  q.t2 = p.real("t2", 1e5);
  BesselConfig b;
  b.step = p.real("step", q.t1 > 0 ? q.t1 / 100 : q.t2 / 1e4);
  b.refinement_radius = p.real("refinement_radius", 6.0 * std::sqrt(b.step));
  b.max_step = p.real("max_step", (q.t2 - q.t1) / 100);
  b.crossing_correction = p.flag("crossing_correction", true);
  p.finish();
  Output o;
  o.replicates = reps(c, 10000);
  const auto e = simulate_disc_hit(q, b, o.replicates, RngStream(c.seed, 0), runner);
  o.put("estimate", e.estimate, e.std_error);
  o.put("bias_flag", e.bias_flag ? 1.0 : 0.0, false);
  o.put("mean_steps", e.mean_steps, false);
  if (q.r == 0.0 && q.a * q.a < q.t1) {
    const auto f = window_formula(q);
    o.put("window_formula", f.value);
    o.put("window_error_budget", f.error_budget);
  }
  if (q.t1 == 0.0 && q.r >= q.a && q.t2 > q.r * q.r) o.put("ratio_formula", ratio_formula(q.a, q.r, q.t2));
  return o;
}

Output cmd_lclt(Params& p) {
  const auto ts = p.int_list("ts", {100, 1000});
  p.finish();
  Output o;
  CsvSeries s{{"t", "max_rel_error", "argmax_x", "argmax_y", "fitted_c"}, {}};
  for (auto t : ts) {
    const auto e = lclt_max_error(t);
    s.rows.push_back({static_cast<double>(t), e.max_rel_error, static_cast<double>(e.argmax.x),
                      static_cast<double>(e.argmax.y), e.fitted_c});
  }
  o.put("decay_factor", s.rows.front()[1] / s.rows.back()[1]);
  o.series = s;
  return o;
}

Output cmd_qlarge(Params& p, const ExperimentConfig& c, const ParallelRunner& runner) {
  const double beta_hat = p.real("beta_hat", 0.5);
  const std::int64_t N = p.integer("N", 2);
  const int q = static_cast<int>(p.integer("q", 3));
  p.finish();
  const auto d = build_disorder(beta_hat, N);
  Output o;
  o.replicates = reps(c, 100000);
  const auto e = mc_moment(d, q, o.replicates, RngStream(c.seed, 0), runner);
  const double bound = std::exp(qlarge_lower_bound_log(d, q));
  o.put("estimate", e.estimate, e.std_error);
  o.put("lower_bound", bound);
  o.put("holds", e.estimate >= bound - 3 * e.std_error ? 1.0 : 0.0, false);
  return o;
}

Output cmd_confinement(Params& p, const ExperimentConfig& c, const ParallelRunner& runner) {
  const ParameterTuple t = tuple_from(p, "desk-small");
  p.finish();
  const auto s = build_schedule(t);
  Output o;
  o.replicates = reps(c, 2000);
  const auto r = confinement_stats(s, t.q, t.delta, t.epsilon0, o.replicates, RngStream(c.seed, 0), runner);
  o.put("D_N", r.D_N_estimate, r.D_N_std_error);
  o.put("K", r.K);
  CsvSeries cs{{"k", "mean_G_size", "frac_A"}, {}};
  for (int k = 0; k < r.K; ++k) cs.rows.push_back({static_cast<double>(k + 1), r.mean_G_size[k], r.frac_A[k]});
  o.series = cs;
  return o;
}

}  // namespace

ResultRecord run(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Params p(cfg.params);
  const ParallelRunner runner(cfg.threads);
  Output o;
  const std::string& c = cfg.command;
  if (c == "moments") o = cmd_moments(p, cfg, runner);
  else if (c == "second-moment-scan") o = cmd_scan(p);
  else if (c == "schedule") o = cmd_schedule(p);
  else if (c == "poisson") o = cmd_poisson(p, cfg, runner);
  else if (c == "pair-prob") o = cmd_pair(p, cfg, runner);
  else if (c == "hitting") o = cmd_hitting(p, cfg, runner);
  else if (c == "lclt") o = cmd_lclt(p);
  else if (c == "qlarge") o = cmd_qlarge(p, cfg, runner);
  else if (c == "confinement") o = cmd_confinement(p, cfg, runner);
  else throw InvalidParameter("unknown command '" + c + "'");

  ResultRecord r;
  r.version = version_tag();
  r.command = c;
  r.config = {{"command", c}, {"params", p.resolved()}, {"replicates", o.replicates}, {"seed", cfg.seed}};
  r.fingerprint = config_fingerprint(r.config);
  r.metrics = std::move(o.metrics);
  r.details = std::move(o.details);
  r.series = std::move(o.series);
  r.threads = runner.threads();
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string to_string(ReplayReport::Status s) {
  switch (s) {
    case ReplayReport::Status::identical: return "identical";
    case ReplayReport::Status::drift: return "drift";
    case ReplayReport::Status::different_config: return "different-config";
  }
  return "unknown";
}

namespace {

bool same(double a, double b, bool exact) {
  if (exact) return a == b || (std::isnan(a) && std::isnan(b));
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
}

}  // namespace

ReplayReport replay(const ResultRecord& rec, const ReplayOptions& opt) {
  if (rec.version != version_tag())
    throw VersionMismatch("record written by " + rec.version + ", this build is " + version_tag() +
                          "; re-run the experiment instead of replaying it");
  ExperimentConfig cfg;
  try {
    cfg.command = rec.config.at("command").get<std::string>();
    cfg.params = rec.config.at("params");
    cfg.replicates = rec.config.at("replicates").get<std::uint64_t>();
    cfg.seed = rec.config.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw IncompleteInput(std::string("record config is incomplete: ") + e.what());
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.replicates) cfg.replicates = *opt.replicates;
  cfg.threads = opt.threads;

  ReplayReport rep;
  rep.fresh = run(cfg);
  if (rep.fresh.fingerprint != rec.fingerprint) {
    rep.status = ReplayReport::Status::different_config;
    return rep;
  }
  char buf[128];
  std::map<std::string, Metric> fresh(rep.fresh.metrics.begin(), rep.fresh.metrics.end());
  for (const auto& [k, m] : rec.metrics) {
    auto it = fresh.find(k);
    if (it == fresh.end()) {
      rep.drifted.push_back(k + ": missing");
      continue;
    }
    if (!same(m.value, it->second.value, m.exact)) {
      std::snprintf(buf, sizeof buf, ": %.17g -> %.17g", m.value, it->second.value);
      rep.drifted.push_back(k + buf);
    }
  }
  if (rec.series.has_value() != rep.fresh.series.has_value()) {
    rep.drifted.push_back("series: presence changed");
  } else if (rec.series) {
    const auto& a = rec.series->rows;
    const auto& b = rep.fresh.series->rows;
    if (a.size() != b.size()) rep.drifted.push_back("series: row count changed");
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      for (std::size_t j = 0; j < std::min(a[i].size(), b[i].size()); ++j)
        if (!same(a[i][j], b[i][j], false)) {
          std::snprintf(buf, sizeof buf, "series[%zu][%zu]: %.17g -> %.17g", i, j, a[i][j], b[i][j]);
          rep.drifted.push_back(buf);
        }
  }
  rep.status = rep.drifted.empty() ? ReplayReport::Status::identical : ReplayReport::Status::drift;
  return rep;
}

}  // namespace polymerlab
