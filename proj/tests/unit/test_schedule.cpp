#include <doctest.h>

#include <cmath>

#include "polymerlab/error.hpp"
#include "polymerlab/schedule.hpp"
#include "strict_tuples.hpp"

using namespace polymerlab;

namespace {

const ConstraintClause& clause(const ConstraintReport& r, const std::string& name) {
  for (const auto& c : r.clauses)
    if (c.name == name) return c;
  throw std::runtime_error("missing clause " + name);
}

const BoundCheck* find_check(const ValidationReport& r, const std::string& name, int k) {
  for (const auto& c : r.checks)
    if (c.name == name && c.k == k) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("constraint clauses") {
  ParameterTuple p = preset("desk-large");
  p.gamma = 0.5;
  p.alpha = 400;
  p.delta = 0.01;
  CHECK(clause(check_parameters(p), "i").pass);
  CHECK(clause(check_parameters(p), "i").lhs == doctest::Approx(1e4 * std::exp(-100.0)));
  ParameterTuple q = preset("desk-large");
  q.nu1 = 100;
  q.nu2 = 100;
  q.delta = 0.1;
  const auto c3 = clause(check_parameters(q), "iii");
  CHECK_FALSE(c3.pass);
  CHECK(c3.lhs == doctest::Approx(100.0));
  ParameterTuple v = preset("desk-large");
  v.alpha = 100;
  CHECK_FALSE(clause(check_parameters(v), "v").pass);
  // reporting never throws, even for silly tuples
  ParameterTuple w;
  w.gamma = 0.5;
  w.delta = 0.5;
  w.nu1 = w.nu2 = w.M = w.alpha = 1;
  w.N = 10;
  CHECK_NOTHROW(check_parameters(w));
  CHECK(check_parameters(preset("paper-scale-validate")).all_pass());
  CHECK(check_parameters(preset("paper-scale-validate")).strict_sizes);
  CHECK_FALSE(check_parameters(preset("desk-large")).strict_sizes);
}

TEST_CASE("desk-large schedule") {
  const auto p = preset("desk-large");
  const auto s = build_schedule(p);
  CHECK(s.alpha_bar == doctest::Approx(5.0 / std::log(1e6)).epsilon(1e-15));
  CHECK(s.alpha_bar == doctest::Approx(0.361915).epsilon(1e-4));
  CHECK(s.l[0] == 0);
  CHECK(s.l[1] == 53);
  CHECK(s.o[1] == 636);
  CHECK(s.L[1] == 0);
  CHECK(s.L[2] == 636);
  CHECK(s.l[2] == 299);
  CHECK(s.l[3] == 3581);
  CHECK(s.K == 3);
  CHECK(s.L[s.K + 1] <= p.N);
  CHECK(s.L[s.K + 2] > p.N);
  for (int k = 1; k + 1 < static_cast<int>(s.l.size()); ++k) CHECK(s.l[k + 1] > s.l[k]);
  for (int k = 1; k < static_cast<int>(s.o.size()); ++k) {
    CHECK(s.o[k] == p.nu1 * s.l[k - 1] + (2 + p.nu2) * s.l[k]);
    CHECK(s.L[k + 1] == s.L[k] + s.o[k]);
    const auto T = s.interval(k);
    CHECK(T.last() - T.begin == s.l[k]);
    CHECK(T.size() == s.l[k] + 1);
    CHECK(T.begin + 2 * s.l[k] + p.nu2 * s.l[k] == s.o[k]);
  }
  const auto T3 = s.interval(3);
  CHECK(T3.begin == 2990);
  CHECK(T3.last() == 6571);
  // K upper bound example
  CHECK(s.K <= std::log(5.0) / s.alpha_bar);
  // ceiling guard: each l_k is the ceiling of N^{gamma f_k}
  for (int k = 1; k < static_cast<int>(s.l.size()); ++k) {
    const long double x = p.gamma * s.f[k] * std::log(static_cast<long double>(p.N));
    CHECK(std::log(static_cast<long double>(s.l[k] - 1)) < x);
    CHECK(x <= std::log(static_cast<long double>(s.l[k])));
  }
}

TEST_CASE("schedule purity and modes") {
  const auto p = preset("desk-small");
  const auto a = build_schedule(p), b = build_schedule(p);
  CHECK(a.l == b.l);
  CHECK(a.L == b.L);
  CHECK(a.K == b.K);
  CHECK(a.L[1] == 0);
  // With C(q,2) below log N the alternate scale is coarser: fewer blocks.
  ParameterTuple q = preset("desk-large");
  q.q = 5;
  const auto bq = build_schedule(q, ScheduleMode::binom_q);
  CHECK(bq.alpha_bar == doctest::Approx(0.5));
  CHECK(bq.K == 2);
  q.q = 3;
  CHECK(build_schedule(q, ScheduleMode::binom_q).K == 0);
  CHECK(bq.K < build_schedule(q, ScheduleMode::log_N).K);
  CHECK(schedule_mode_from_string("binom_q") == ScheduleMode::binom_q);
  CHECK_THROWS_AS(schedule_mode_from_string("x"), InvalidParameter);
  ParameterTuple bad = p;
  bad.q = 1;
  CHECK_THROWS_AS(build_schedule(bad, ScheduleMode::binom_q), InvalidParameter);
}

TEST_CASE("empty schedule and overflow") {
  ParameterTuple p = preset("desk-large");
  p.N = 30;  // l_1 = 19, L_2 = 228 > N
  const auto s = build_schedule(p);
  CHECK(s.K == 0);
  CHECK(validate_schedule_bounds(s, p).vacuous);
  ParameterTuple big = preset("desk-large");
  big.N = std::int64_t{4000000000000000000};
  big.gamma = 0.9;
  big.alpha = 30;
  try {
    build_schedule(big);
    FAIL("expected a capacity error");
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("k = ") != std::string::npos);
  }
  CHECK_THROWS_AS(build_schedule(preset("paper-scale-validate")), CapacityError);
}

TEST_CASE("log schedule agrees with the integer schedule") {
  for (const char* name : {"desk-small", "desk-large"}) {
    const auto p = preset(name);
    const auto s = build_schedule(p);
    const auto ls = build_log_schedule(p);
    CHECK(ls.K == s.K);
    for (std::size_t k = 1; k < s.l.size(); ++k)
      CHECK(static_cast<double>(ls.log_l[k]) == doctest::Approx(std::log(static_cast<double>(s.l[k]))).epsilon(1e-15));
    for (std::size_t k = 2; k < s.L.size(); ++k)
      CHECK(static_cast<double>(ls.log_L[k]) == doctest::Approx(std::log(static_cast<double>(s.L[k]))).epsilon(1e-14));
  }
}

TEST_CASE("desk-scale validation reports violations without throwing") {
  const auto p = preset("desk-large");
  const auto v = validate_schedule_bounds(build_schedule(p), p);
  CHECK_FALSE(v.vacuous);
  // desk-large breaks clause (ii), so the window ordering fails at k = 2
  const auto* w2 = find_check(v, "window_order", 2);
  REQUIRE(w2);
  CHECK_FALSE(w2->holds);
  for (int k = 1; k <= 3; ++k) {
    CHECK(find_check(v, "growth_lower", k)->holds);
    CHECK(find_check(v, "growth_upper", k)->holds);
    CHECK(find_check(v, "block_length", k)->holds);
  }
  CHECK(find_check(v, "K_upper", 0)->holds);
}

TEST_CASE("randomized strict tuples satisfy the block bounds") {
  RngStream rng(2026, 0);
  int literal_k_lower_fail = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = testutil::sample_strict_tuple(rng);
    const auto s = build_log_schedule(p);
    const auto v = validate_schedule_bounds(s, p);
    REQUIRE_FALSE(v.vacuous);
    for (const auto& c : v.checks) {
      if (c.name == "K_lower") {
        literal_k_lower_fail += !c.holds;
        continue;
      }
      CHECK_MESSAGE(c.holds, c.name << " k=" << c.k << " lhs=" << static_cast<double>(c.lhs)
                                    << " rhs=" << static_cast<double>(c.rhs));
    }
  }
  // The literal lower bracket is usually narrower than one and misses K.
  MESSAGE("literal K lower bound failed on " << literal_k_lower_fail << " of 100 tuples");
}

TEST_CASE("paper-scale preset validates in log space") {
  const auto p = preset("paper-scale-validate");
  const auto s = build_log_schedule(p);
  CHECK(s.K == 6);
  CHECK(s.alpha_bar == doctest::Approx(0.1));
  const auto v = validate_schedule_bounds(s, p);
  for (const auto& c : v.checks)
    if (c.name != "K_lower") CHECK_MESSAGE(c.holds, c.name << " k=" << c.k);
  CHECK_FALSE(find_check(v, "K_lower", 0)->holds);  // bracket [6.916, 6.931] holds no integer
}

TEST_CASE("presets") {
  CHECK(preset("desk-small").N == 1000);
  CHECK(preset("desk-large").N == 1000000);
  CHECK(preset("paper-scale-validate").log_N.has_value());
  CHECK_THROWS_AS(preset("nope"), InvalidParameter);
  CHECK(preset("desk-large").q0() == 9);
}
