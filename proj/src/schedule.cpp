#include "polymerlab/schedule.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "polymerlab/error.hpp"

namespace polymerlab {

namespace {

constexpr long double kNegInf = -std::numeric_limits<long double>::infinity();
// 2^63 as the largest representable block length.
constexpr long double kLog2Pow63 = 63.0L * 0.693147180559945309417232121458176568L;

long double logsumexp(long double a, long double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const long double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

long double alpha_bar_for(const ParameterTuple& p, ScheduleMode mode) {
  if (mode == ScheduleMode::log_N) return static_cast<long double>(p.alpha) / p.log_horizon();
  if (p.q < 2) throw InvalidParameter("binom_q mode needs q >= 2");
  const long double pairs = 0.5L * p.q * (p.q - 1);
  return static_cast<long double>(p.alpha) / pairs;
}

void check_basic(const ParameterTuple& p) {
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw InvalidParameter("gamma must lie in (0, 1)");
  if (p.alpha < 1) throw InvalidParameter("alpha must be >= 1");
  if (p.nu1 < 1 || p.nu2 < 1) throw InvalidParameter("nu1 and nu2 must be >= 1");
  if (!p.log_N && p.N < 2) throw InvalidParameter("N must be >= 2");
}

std::int64_t checked_add(std::int64_t a, std::int64_t b, int k) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r))
    throw CapacityError("schedule overflows 64-bit integers at k = " + std::to_string(k));
  return r;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b, int k) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r))
    throw CapacityError("schedule overflows 64-bit integers at k = " + std::to_string(k));
  return r;
}

}  // namespace

long double ParameterTuple::log_horizon() const {
  if (log_N) return *log_N;
  return std::log(static_cast<long double>(N));
}

int ParameterTuple::q0() const {
  return static_cast<int>(std::floor((1.0 - epsilon0) * q + 1e-12));
}

bool ConstraintReport::all_pass() const {
  for (const auto& c : clauses)
    if (!c.pass) return false;
  return true;
}

ConstraintReport check_parameters(const ParameterTuple& p) {
  ConstraintReport r;
  const long double g = p.gamma, a = static_cast<long double>(p.alpha);
  const long double d = p.delta;
  const long double nu1 = static_cast<long double>(p.nu1), nu2 = static_cast<long double>(p.nu2);
  const long double M = static_cast<long double>(p.M);
  auto add = [&](std::string name, long double lhs, long double rhs, bool strict) {
    ConstraintClause c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.pass = strict ? lhs < rhs : lhs <= rhs;
    c.relation = strict ? "<" : "<=";
    r.clauses.push_back(c);
  };
  add("i", std::exp(-2 * std::log(d) - g * a / 2), 1.0L, false);
  add("ii", std::log(4 * nu1) / (a * g), 0.25L, true);
  add("iii", nu2 / (nu1 * d * d), 1.0L / 32, false);
  add("iv", nu2 * std::exp(-g * a / 2) / (M * M), 1.0L / 16, false);
  {
    // compared on the log scale: log N > max(log 4 nu2, 2 alpha)
    ConstraintClause c;
    c.name = "v";
    c.lhs = p.log_horizon();
    c.rhs = std::max(std::log(4 * nu2), 2 * a);
    c.pass = c.lhs > c.rhs;
    c.relation = ">";
    r.clauses.push_back(c);
  }
  // 1/0.01 rounds to just below 100 in binary, so allow a relative 1e-12.
  const long double hundred = 100.0L * (1 - 1e-12L);
  r.strict_sizes = p.log_horizon() >= std::log(hundred) && p.epsilon0 > 0 &&
                   1 / static_cast<long double>(p.epsilon0) >= hundred && d > 0 &&
                   1 / d >= hundred && nu1 >= 100 && nu2 >= 100 && M >= 100 && a >= 100;
  return r;
}

std::string to_string(ScheduleMode m) { return m == ScheduleMode::log_N ? "log_N" : "binom_q"; }

ScheduleMode schedule_mode_from_string(const std::string& s) {
  if (s == "log_N") return ScheduleMode::log_N;
  if (s == "binom_q") return ScheduleMode::binom_q;
  throw InvalidParameter("unknown schedule mode '" + s + "' (expected log_N or binom_q)");
}

IntervalTk Schedule::interval(int k) const {
  if (k < 1 || k >= static_cast<int>(l.size()))
    throw InvalidParameter("interval index out of range");
  const std::int64_t t1 = nu1 * l[k - 1];
  return {t1, t1 + l[k] + 1};
}

Schedule build_schedule(const ParameterTuple& p, ScheduleMode mode) {
  check_basic(p);
  if (p.log_N) throw CapacityError("integer schedule needs a 64-bit N; use build_log_schedule");
  Schedule s;
  s.mode = mode;
  s.N = p.N;
  s.nu1 = p.nu1;
  s.alpha_bar = alpha_bar_for(p, mode);
  const long double logN = p.log_horizon();
  s.f = {1.0L};
  s.l = {0};
  s.o = {0};
  s.L = {0, 0};
  s.ceiling_slack = {0.0L};
  const std::int64_t coef = 2 + p.nu2;
  for (int k = 1;; ++k) {
    const long double fk = std::exp(k * s.alpha_bar);
    const long double x = p.gamma * fk * logN;  // log of N^{gamma f_k}
    if (!(x < kLog2Pow63))
      throw CapacityError("l_k exceeds 2^63 at k = " + std::to_string(k));
    const long double v = std::exp(x);
    long double c = std::ceil(v);
    // Guard: c - 1 < N^{gamma f_k} <= c, re-checked on the log scale.
    if (c > 1 && !(std::log(c - 1) < x)) c -= 1;
    if (!(x <= std::log(c))) c += 1;
    s.ceiling_slack.push_back(std::fabs(v - std::nearbyint(v)));
    const auto lk = static_cast<std::int64_t>(c);
    s.f.push_back(fk);
    s.l.push_back(lk);
    const std::int64_t ok =
        checked_add(checked_mul(p.nu1, s.l[k - 1], k), checked_mul(coef, lk, k), k);
    s.o.push_back(ok);
    s.L.push_back(checked_add(s.L[k], ok, k));  // L[k+1]
    if (s.L[k + 1] > p.N) {
      s.K = k - 1;
      break;
    }
  }
  // L currently holds indices 0..K+2.
  return s;
}

LogSchedule build_log_schedule(const ParameterTuple& p, ScheduleMode mode) {
  check_basic(p);
  LogSchedule s;
  s.mode = mode;
  s.alpha_bar = alpha_bar_for(p, mode);
  s.log_N = p.log_horizon();
  s.f = {1.0L};
  s.log_l = {kNegInf};
  s.log_o = {kNegInf};
  s.log_L = {kNegInf, kNegInf};
  const long double lnu1 = std::log(static_cast<long double>(p.nu1));
  const long double lcoef = std::log(static_cast<long double>(2 + p.nu2));
  for (int k = 1;; ++k) {
    if (k > 1000000) throw CapacityError("log schedule did not terminate");
    const long double fk = std::exp(k * s.alpha_bar);
    const long double x = p.gamma * fk * s.log_N;
    // ceiling: exact while representable, otherwise negligible (< 2^-63 relative)
    const long double ll = x < kLog2Pow63 ? std::log(std::ceil(std::exp(x))) : x;
    s.f.push_back(fk);
    s.log_l.push_back(ll);
    const long double lo = logsumexp(lnu1 + s.log_l[k - 1], lcoef + ll);
    s.log_o.push_back(lo);
    s.log_L.push_back(logsumexp(s.log_L[k], lo));
    if (s.log_L[k + 1] > s.log_N) {
      s.K = k - 1;
      break;
    }
  }
  return s;
}

LogSchedule to_log_schedule(const Schedule& s, const ParameterTuple& p) {
  LogSchedule r;
  r.mode = s.mode;
  r.alpha_bar = s.alpha_bar;
  r.log_N = p.log_horizon();
  r.f = s.f;
  r.K = s.K;
  auto lg = [](std::int64_t v) { return v == 0 ? kNegInf : std::log(static_cast<long double>(v)); };
  for (auto v : s.l) r.log_l.push_back(lg(v));
  for (auto v : s.o) r.log_o.push_back(lg(v));
  for (auto v : s.L) r.log_L.push_back(lg(v));
  return r;
}

bool ValidationReport::all_hold() const {
  for (const auto& c : checks)
    if (!c.holds) return false;
  return true;
}

ValidationReport validate_schedule_bounds(const LogSchedule& s, const ParameterTuple& p) {
  ValidationReport r;
  if (s.K < 1) {
    r.vacuous = true;
    return r;
  }
  const long double g = p.gamma, a = static_cast<long double>(p.alpha);
  // Relative slack for comparisons of long double logs.
  const long double eps = 1e-15L;
  auto add = [&](std::string name, int k, long double lhs, long double rhs) {
    const long double tol = eps * std::max<long double>(1, std::fabs(rhs));
    r.checks.push_back({std::move(name), k, lhs, rhs, lhs <= rhs + tol});
  };
  const long double l4nu2 = std::log(4.0L * p.nu2);
  const long double lnu1 = std::log(static_cast<long double>(p.nu1));
  for (int k = 1; k <= s.K; ++k) {
    const long double growth = s.log_l[k + 1] - s.log_l[k];
    add("growth_lower", k, g * a / 2, growth);
    add("growth_upper", k, growth, std::numbers::e_v<long double> * a);
    add("block_length", k, s.log_L[k + 1], l4nu2 + s.log_l[k]);
    add("window_order", k, k == 1 ? kNegInf : lnu1 + s.log_l[k - 1], s.log_l[k]);
  }
  const long double lg = std::log(1.0L / g);
  const long double inner = 1.0L - l4nu2 / s.log_N;
  const long double K = s.K;
  add("K_upper", 0, K, lg / s.alpha_bar);
  if (inner > 0) {
    const long double lower = (lg + std::log(inner)) / s.alpha_bar;
    add("K_lower", 0, lower, K);
    // What L_{K+2} > N together with L_{K+2} <= 4 nu2 l_{K+1} actually gives.
    add("K_lower_shifted", 0, lower - 1, K);
  } else {
    const long double nan = std::numeric_limits<long double>::quiet_NaN();
    r.checks.push_back({"K_lower", 0, nan, K, false});
    r.checks.push_back({"K_lower_shifted", 0, nan, K, false});
  }
  return r;
}

ValidationReport validate_schedule_bounds(const Schedule& s, const ParameterTuple& p) {
  return validate_schedule_bounds(to_log_schedule(s, p), p);
}

ParameterTuple preset(const std::string& name) {
  ParameterTuple p;
  if (name == "desk-small") {
    p.gamma = 0.3;
    p.epsilon0 = 0.1;
    p.delta = 0.1;
    p.M = 10;
    p.nu1 = 4;
    p.nu2 = 4;
    p.alpha = 2;
    p.N = 1000;
    p.q = 10;
  } else if (name == "desk-large") {
    p.gamma = 0.2;
    p.epsilon0 = 0.1;
    p.delta = 0.1;
    p.M = 10;
    p.nu1 = 10;
    p.nu2 = 10;
    p.alpha = 5;
    p.N = 1000000;
    p.q = 10;
  } else if (name == "paper-scale-validate") {
    p.gamma = 0.5;
    p.epsilon0 = 0.01;
    p.delta = 0.01;
    p.M = 100;
    p.nu1 = 100000000;
    p.nu2 = 100;
    p.alpha = 400;
    p.N = 0;
    p.log_N = 4000.0L;
    p.q = 100;
  } else {
    throw InvalidParameter("unknown preset '" + name +
                           "' (expected desk-small, desk-large or paper-scale-validate)");
  }
  return p;
}

}  // namespace polymerlab
