#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace polymerlab {

struct ParameterTuple {
  double gamma = 0.0;
  double epsilon0 = 0.0;
  double delta = 0.0;
  std::int64_t M = 0;
  std::int64_t nu1 = 0;
  std::int64_t nu2 = 0;
  std::int64_t alpha = 0;
  std::int64_t N = 0;
  int q = 0;
  /// log N for horizons beyond 64-bit range; N is ignored when set.
  std::optional<long double> log_N;

  long double log_horizon() const;
  /// floor((1 - epsilon0) q)
  int q0() const;
};

struct ConstraintClause {
  std::string name;
  long double lhs = 0;
  long double rhs = 0;
  bool pass = false;
  std::string relation;  // "<=" or "<"; clause (v) compares logs with ">"
};

struct ConstraintReport {
  std::vector<ConstraintClause> clauses;
  /// All of N, 1/eps0, 1/delta, nu1, nu2, M, alpha are >= 100.
  bool strict_sizes = false;
  bool all_pass() const;
};

ConstraintReport check_parameters(const ParameterTuple& p);

enum class ScheduleMode { log_N, binom_q };

std::string to_string(ScheduleMode m);
ScheduleMode schedule_mode_from_string(const std::string& s);

/// Half-open set of times [begin, end). Block k's window is the closed
/// range nu1 l_{k-1} .. nu1 l_{k-1} + l_k, i.e. end = begin + l_k + 1.
struct IntervalTk {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  /// Number of times in the window.
  std::int64_t size() const { return end > begin ? end - begin : 0; }
  std::int64_t last() const { return end - 1; }
  bool empty() const { return end <= begin; }
  bool contains(std::int64_t n) const { return n >= begin && n < end; }
};

/// Integer schedule. Vectors are indexed by k; l[0] = 0 and L[1] = 0.
/// l, o, f hold k = 0..K+1; L holds k = 0..K+2 (L[0] unused, 0).
struct Schedule {
  ScheduleMode mode = ScheduleMode::log_N;
  long double alpha_bar = 0;
  std::vector<long double> f;
  std::vector<std::int64_t> l;
  std::vector<std::int64_t> o;
  std::vector<std::int64_t> L;
  /// Distance of N^{gamma f_k} to the nearest integer, for ceiling audits.
  std::vector<long double> ceiling_slack;
  int K = 0;
  std::int64_t N = 0;
  std::int64_t nu1 = 0;

  /// T_k; valid for 1 <= k <= K + 1.
  IntervalTk interval(int k) const;
};

/// Throws CapacityError naming k when l_k exceeds 2^63.
Schedule build_schedule(const ParameterTuple& p, ScheduleMode mode = ScheduleMode::log_N);

/// Same construction carried out on logarithms in extended precision, for
/// horizons far beyond 64-bit integers. log_l[0] = -inf, log_L[1] = -inf.
struct LogSchedule {
  ScheduleMode mode = ScheduleMode::log_N;
  long double alpha_bar = 0;
  long double log_N = 0;
  std::vector<long double> f;
  std::vector<long double> log_l;
  std::vector<long double> log_o;
  std::vector<long double> log_L;
  int K = 0;
};

LogSchedule build_log_schedule(const ParameterTuple& p, ScheduleMode mode = ScheduleMode::log_N);

/// Log view of an integer schedule.
LogSchedule to_log_schedule(const Schedule& s, const ParameterTuple& p);

struct BoundCheck {
  std::string name;
  int k = 0;
  long double lhs = 0;
  long double rhs = 0;
  bool holds = false;
};

struct ValidationReport {
  bool vacuous = false;
  std::vector<BoundCheck> checks;
  bool all_hold() const;
};

/// Per-block growth bounds, block-length bounds, window ordering and the
/// bracket on K. All comparisons are made on logarithms.
ValidationReport validate_schedule_bounds(const LogSchedule& s, const ParameterTuple& p);
ValidationReport validate_schedule_bounds(const Schedule& s, const ParameterTuple& p);

/// Named parameter sets: desk-small, desk-large, paper-scale-validate.
ParameterTuple preset(const std::string& name);

}  // namespace polymerlab
