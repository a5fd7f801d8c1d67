#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "polymerlab/error.hpp"
#include "polymerlab/intersections.hpp"

using namespace polymerlab;

namespace {

WalkPath path(LatticePoint start, const std::string& moves) {
  WalkPath p{start, {}};
  for (char c : moves) {
    switch (c) {
      case 'E': p.steps.push_back(Move::east); break;
      case 'W': p.steps.push_back(Move::west); break;
      case 'N': p.steps.push_back(Move::north); break;
      default: p.steps.push_back(Move::south); break;
    }
  }
  return p;
}

EnsembleWindow window(std::vector<WalkPath> paths, std::int64_t begin, std::int64_t end,
                      double radius = 100.0) {
  return {std::move(paths), {begin, end}, radius};
}

// Every n-step path from `start` ending at `end`.
std::vector<WalkPath> all_bridges(int n, LatticePoint start, LatticePoint end) {
  std::vector<WalkPath> out;
  const char* m = "EWNS";
  std::string s(n, 'E');
  std::function<void(int)> rec = [&](int d) {
    if (d == n) {
      auto p = path(start, s);
      if (p.position(n) == end) out.push_back(p);
      return;
    }
    for (int c = 0; c < 4; ++c) {
      s[d] = m[c];
      rec(d + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace

TEST_CASE("pair indexing is lexicographic") {
  const auto pl = pair_list(5);
  REQUIRE(pl.size() == 10);
  for (int a = 0; a < 10; ++a) CHECK(pair_index(pl[a].first, pl[a].second, 5) == a);
}

TEST_CASE("analyze_window on hand-built paths") {
  SUBCASE("two disjoint meetings") {
    // 0,1 meet at n = 1; 2,3 meet at n = 2.
    auto w = window({path({0, 0}, "EE"), path({2, 0}, "WN"), path({0, 10}, "EE"),
                     path({4, 10}, "WW")},
                    0, 3);
    const auto r = analyze_window(w);
    CHECK(r.R_k == 2);
    CHECK(r.R_tilde_k == 2);
    REQUIRE(r.greedy.size() == 2);
    CHECK(r.greedy[0] == GreedyStep{1, 0, 1});
    CHECK(r.greedy[1] == GreedyStep{2, 2, 3});
    CHECK(max_disjoint_oracle(w) == 2);
  }
  SUBCASE("second pair shares an index") {
    // 0,1 meet at n = 1; 1,2 meet at n = 2.
    auto w = window({path({0, 0}, "EN"), path({2, 0}, "WE"), path({2, 2}, "SS")}, 0, 3);
    const auto r = analyze_window(w);
    CHECK(r.R_k == 1);
    CHECK(r.R_tilde_k == 2);
    CHECK(r.tau_pairs[pair_index(0, 1, 3)] == 1);
    CHECK(r.tau_pairs[pair_index(1, 2, 3)] == 2);
    CHECK_FALSE(r.tau_pairs[pair_index(0, 2, 3)].has_value());
    CHECK(max_disjoint_oracle(w) == 1);
  }
  SUBCASE("meeting after an exit does not count") {
    // Walk 0 leaves the radius-2 ball at n = 3; the pair meets at n = 4.
    auto w = window({path({0, 0}, "EEEW"), path({1, 1}, "WSEE")}, 0, 5, 2.0);
    const auto r = analyze_window(w);
    CHECK(r.sigma[0] == 3);
    CHECK_FALSE(r.sigma[1].has_value());
    CHECK_FALSE(r.tau_pairs[0].has_value());
    CHECK(r.R_k == 0);
    CHECK(r.R_tilde_k == 0);
  }
  SUBCASE("closed ball keeps the boundary") {
    auto w = window({path({0, 0}, "E"), path({0, 0}, "E")}, 0, 2, 1.0);
    const auto r = analyze_window(w);
    CHECK_FALSE(r.sigma[0].has_value());
    CHECK(r.tau_pairs[0] == 0);
  }
  SUBCASE("times outside the interval are ignored") {
    auto w = window({path({0, 0}, "EE"), path({2, 0}, "WN")}, 2, 3);
    CHECK(analyze_window(w).R_tilde_k == 0);
  }
  SUBCASE("no intersections") {
    auto w = window({path({0, 0}, "EE"), path({0, 5}, "EE")}, 0, 3);
    CHECK(analyze_window(w).R_k == 0);
    CHECK(max_disjoint_oracle(w) == 0);
  }
  SUBCASE("one greedy pick per time") {
    // Pairs (0,1) and (2,3) both meet first at n = 1.
    auto w = window({path({0, 0}, "E"), path({2, 0}, "W"), path({0, 9}, "E"),
                     path({2, 9}, "W")},
                    0, 2);
    const auto r = analyze_window(w);
    CHECK(r.R_k == 1);
    CHECK(r.R_tilde_k == 2);
    CHECK(max_disjoint_oracle(w) == 1);
  }
}

TEST_CASE("oracle respects distinct meeting times") {
  // (0,1) meet at 1, then (1,2) and (0,3) meet only at n = 2.
  auto a = window({path({0, 0}, "EW"), path({2, 0}, "WN"), path({2, 2}, "SW"),
                   path({-2, 0}, "EE")},
                  0, 3);
  const auto ra = analyze_window(a);
  CHECK(ra.tau_pairs[pair_index(0, 1, 4)] == 1);
  CHECK(ra.tau_pairs[pair_index(1, 2, 4)] == 2);
  CHECK(ra.tau_pairs[pair_index(0, 3, 4)] == 2);
  CHECK(ra.R_k == 1);
  CHECK(max_disjoint_oracle(a) == 1);
  // Move the (0,3) meeting to n = 3. {(1,2), (0,3)} is then disjoint and
  // time-ordered, but greedy already spent walks 0 and 1 at n = 1.
  auto b = window({path({0, 0}, "EWS"), path({2, 0}, "WNN"), path({2, 2}, "SWN"),
                   path({-2, 0}, "SEE")},
                  0, 4);
  const auto rb = analyze_window(b);
  CHECK(rb.tau_pairs[pair_index(0, 1, 4)] == 1);
  CHECK(rb.tau_pairs[pair_index(1, 2, 4)] == 2);
  CHECK(rb.tau_pairs[pair_index(0, 3, 4)] == 3);
  CHECK(rb.R_k == 1);
  CHECK(rb.R_tilde_k == 3);
  CHECK(max_disjoint_oracle(b) == 2);
}

TEST_CASE("oracle capacity") {
  std::vector<WalkPath> p(13, path({0, 0}, "E"));
  CHECK_THROWS_AS(max_disjoint_oracle(window(p, 0, 2)), CapacityError);
}

TEST_CASE("report invariants on random windows") {
  RngStream rng(404, 0);
  int below = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int q0 = 2 + static_cast<int>(rng.next_u32() % 7);
    std::vector<WalkPath> p;
    for (int i = 0; i < q0; ++i) {
      LatticePoint s{static_cast<std::int64_t>(rng.next_u32() % 5) - 2,
                     static_cast<std::int64_t>(rng.next_u32() % 5) - 2};
      if ((s.x + s.y) % 2 != 0) s.x += 1;
      p.push_back(sample_path(12, s, rng));
    }
    auto w = window(p, 1 + rng.next_u32() % 3, 13, 3.0 + rng.next_u32() % 4);
    const auto r = analyze_window(w);
    CHECK(r.R_k == static_cast<int>(r.greedy.size()));
    CHECK(r.R_k <= q0 / 2);
    CHECK(r.R_k <= r.R_tilde_k);
    CHECK(r.R_tilde_k <= q0 * (q0 - 1) / 2);
    std::vector<int> seen(q0, 0);
    for (std::size_t g = 0; g < r.greedy.size(); ++g) {
      if (g > 0) CHECK(r.greedy[g].tau > r.greedy[g - 1].tau);
      CHECK(seen[r.greedy[g].i]++ == 0);
      CHECK(seen[r.greedy[g].j]++ == 0);
    }
    // No two finite-tau pairs share an index or a first meeting time
    // => R_k = R~_k. Simultaneous disjoint meetings are taken one at a time.
    bool overlap = false;
    const auto pl = pair_list(q0);
    for (std::size_t a = 0; a < pl.size(); ++a)
      for (std::size_t b = a + 1; b < pl.size(); ++b)
        if (r.tau_pairs[a] && r.tau_pairs[b] &&
            (pl[a].first == pl[b].first || pl[a].first == pl[b].second ||
             pl[a].second == pl[b].first || pl[a].second == pl[b].second ||
             *r.tau_pairs[a] == *r.tau_pairs[b]))
          overlap = true;
    if (!overlap) CHECK(r.R_k == r.R_tilde_k);
    const int best = max_disjoint_oracle(w);
    CHECK(best >= r.R_k);
    if (best > r.R_k) ++below;
  }
  MESSAGE("greedy below oracle in " << below << " of 1000 windows");
}

TEST_CASE("tracker matches analyze_window") {
  RngStream rng(5, 0);
  std::vector<WalkPath> p;
  for (int i = 0; i < 5; ++i) p.push_back(sample_path(40, {0, 0}, rng));
  auto w = window(p, 3, 30, 4.0);
  WindowTracker t(5, w.interval, w.ball_radius);
  std::vector<std::vector<LatticePoint>> pos;
  for (auto& x : p) pos.push_back(x.positions());
  for (std::int64_t n = 0; n <= 40; ++n) {
    std::vector<LatticePoint> now;
    for (auto& x : pos) now.push_back(x[n]);
    t.observe(n, now);
  }
  const auto a = analyze_window(w);
  CHECK(t.report().tau_pairs == a.tau_pairs);
  CHECK(t.report().sigma == a.sigma);
  CHECK(t.report().greedy == a.greedy);
}

TEST_CASE("pair probability: empty window and endpoint checks") {
  RngStream rng(1, 0);
  PairWindow w{{5, 5}, 10, 10.0};
  const auto e = estimate_pair_probability(w, {{{0, 0}, {2, 0}}}, {{{0, 0}, {2, 0}}},
                                           PairVariant::conditioned, 50, rng);
  CHECK(e.estimate == 0.0);
  CHECK_THROWS_AS(estimate_pair_probability(w, {{{0, 0}, {2, 0}}}, {{{1, 0}, {2, 0}}},
                                            PairVariant::conditioned, 50, rng),
                  InvalidEndpoint);
  CHECK_THROWS_AS(estimate_triple_probability(w, {{{0, 0}, {0, 0}, {0, 0}}},
                                              {{{0, 0}, {0, 0}, {13, 0}}}, 50, rng),
                  InvalidEndpoint);
}

namespace {

// Exact probabilities over all bridge pairs/triples of a short horizon.
struct Exact {
  double p12 = 0, p13 = 0, triple = 0;
};

Exact enumerate(int n, IntervalTk T, double radius, const std::vector<LatticePoint>& x,
                const std::vector<LatticePoint>& y, bool guarded = true) {
  std::vector<std::vector<WalkPath>> b;
  for (std::size_t i = 0; i < x.size(); ++i) b.push_back(all_bridges(n, x[i], y[i]));
  Exact e;
  double total = 0;
  const int q = static_cast<int>(x.size());
  std::vector<std::size_t> idx(q, 0);
  std::function<void(int)> rec = [&](int d) {
    if (d == q) {
      std::vector<WalkPath> p;
      for (int i = 0; i < q; ++i) p.push_back(b[i][idx[i]]);
      WindowTracker t(q, T, radius, guarded);
      std::vector<std::vector<LatticePoint>> pos;
      for (auto& w : p) pos.push_back(w.positions());
      for (std::int64_t s = 0; s <= n; ++s) {
        std::vector<LatticePoint> now;
        for (auto& w : pos) now.push_back(w[s]);
        t.observe(s, now);
      }
      const auto& tau = t.report().tau_pairs;
      const bool a = tau[0].has_value();
      const bool c = q > 2 && tau[pair_index(0, 2, q)].has_value();
      total += 1;
      e.p12 += a;
      e.p13 += c;
      e.triple += a && c;
      return;
    }
    for (idx[d] = 0; idx[d] < b[d].size(); ++idx[d]) rec(d + 1);
  };
  rec(0);
  e.p12 /= total;
  e.p13 /= total;
  e.triple /= total;
  return e;
}

}  // namespace

TEST_CASE("pair probability: o_k = 2 loops at the origin") {
  // Both walks go out and back; they share the midpoint with probability 1/4.
  const auto ex = enumerate(2, {1, 2}, 10.0, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}});
  CHECK(ex.p12 == doctest::Approx(0.25).epsilon(1e-15));
  RngStream rng(77, 0);
  PairWindow w{{1, 2}, 2, 10.0};
  const auto e = estimate_pair_probability(w, {{{0, 0}, {0, 0}}}, {{{0, 0}, {0, 0}}},
                                           PairVariant::conditioned, 40000, rng);
  CHECK(std::abs(e.estimate - 0.25) < 4 * e.std_error);
}

TEST_CASE("pair and triple probabilities against enumeration") {
  const PairWindow w{{1, 4}, 4, 1.5};
  const std::vector<LatticePoint> x{{0, 0}, {2, 0}, {0, 2}}, y{{0, 0}, {0, 0}, {0, 0}};
  const auto ex = enumerate(4, w.interval, w.ball_radius, x, y);
  RngStream rng(31, 0);
  const auto tr = estimate_triple_probability(w, {{x[0], x[1], x[2]}}, {{y[0], y[1], y[2]}},
                                              60000, rng);
  CHECK(std::abs(tr.triple.estimate - ex.triple) < 4 * tr.triple.std_error);
  CHECK(std::abs(tr.p12.estimate - ex.p12) < 4 * tr.p12.std_error);
  CHECK(std::abs(tr.p13.estimate - ex.p13) < 4 * tr.p13.std_error);
  CHECK(tr.triple.estimate <= tr.p12.estimate + 3 * tr.se_diff12);
  CHECK(tr.triple.estimate <= tr.p13.estimate + 3 * tr.se_diff13);

  const auto pe = estimate_pair_probability(w, {{x[0], x[1]}}, {{y[0], y[1]}},
                                            PairVariant::conditioned, 60000, rng.substream(1));
  CHECK(std::abs(pe.estimate - ex.p12) < 4 * pe.std_error);
  const auto unguarded = enumerate(4, w.interval, w.ball_radius, {x[0], x[1]}, {y[0], y[1]}, false);
  const auto pu = estimate_pair_probability(w, {{x[0], x[1]}}, {{y[0], y[1]}},
                                            PairVariant::unguarded, 60000, rng.substream(2));
  CHECK(unguarded.p12 >= ex.p12);
  CHECK(std::abs(pu.estimate - unguarded.p12) < 4 * pu.std_error);
}

TEST_CASE("pair estimator is thread-count invariant") {
  const PairWindow w{{2, 30}, 40, 6.0};
  RngStream rng(9, 0);
  const auto a = estimate_pair_probability(w, {{{0, 0}, {2, 0}}}, {{{0, 0}, {2, 0}}},
                                           PairVariant::conditioned, 1000, rng, ParallelRunner(1));
  const auto b = estimate_pair_probability(w, {{{0, 0}, {2, 0}}}, {{{0, 0}, {2, 0}}},
                                           PairVariant::conditioned, 1000, rng, ParallelRunner(3));
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("chen_stein_bound examples") {
  SUBCASE("homogeneous q0 = 3") {
    std::map<std::pair<int, int>, double> joint{{{0, 1}, 0.0}, {{0, 2}, 0.0}, {{1, 2}, 0.0}};
    const auto c = chen_stein_bound(3, {0.1, 0.1, 0.1}, joint);
    CHECK(c.mu == doctest::Approx(0.3));
    CHECK(c.e1 == doctest::Approx(0.09));
    CHECK(c.e2 == 0.0);
    CHECK(c.bound == doctest::Approx(0.18));
  }
  SUBCASE("q0 = 2") {
    const auto c = chen_stein_bound(2, {0.3}, {});
    CHECK(c.e1 == doctest::Approx(0.09));
    CHECK(c.e2 == 0.0);
  }
  SUBCASE("all zero") {
    std::map<std::pair<int, int>, double> joint;
    for (int a = 0; a < 6; ++a)
      for (int b = a + 1; b < 6; ++b) joint[{a, b}] = 0.0;
    const auto c = chen_stein_bound(4, std::vector<double>(6, 0.0), joint);
    CHECK(c.mu == 0.0);
    CHECK(c.e1 == 0.0);
    CHECK(c.e2 == 0.0);
  }
  SUBCASE("missing joint entry") {
    std::map<std::pair<int, int>, double> joint{{{0, 1}, 0.0}, {{0, 2}, 0.0}};
    CHECK_THROWS_AS(chen_stein_bound(3, {0.1, 0.1, 0.1}, joint), IncompleteInput);
  }
  SUBCASE("disjoint pairs need no joint entry") {
    // q0 = 4: pairs (0,1) and (2,3) are indices 0 and 5.
    std::map<std::pair<int, int>, double> joint;
    for (int a = 0; a < 6; ++a)
      for (int b = a + 1; b < 6; ++b)
        if (!(a == 0 && b == 5) && !(a == 1 && b == 4) && !(a == 2 && b == 3)) joint[{a, b}] = 0.01;
    const auto c = chen_stein_bound(4, std::vector<double>(6, 0.1), joint);
    // |B| = 2(q0 - 2) + 1 = 5 per pair.
    CHECK(c.e1 == doctest::Approx(6 * 5 * 0.01));
    CHECK(c.e2 == doctest::Approx(6 * 4 * 0.01));
  }
}

TEST_CASE("tv_to_poisson examples") {
  CHECK(tv_to_poisson({100}, 0.0) == 0.0);
  CHECK(tv_to_poisson({100}, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-12));
  // Exact Poisson(1) pmf scaled to integer counts over a long support.
  std::vector<std::uint64_t> c;
  double pk = std::exp(-1.0);
  for (int k = 0; k < 25; ++k) {
    if (k > 0) pk /= k;
    c.push_back(static_cast<std::uint64_t>(std::llround(pk * 1e15)));
  }
  CHECK(tv_to_poisson(c, 1.0) < 1e-12);
  CHECK_THROWS_AS(tv_to_poisson({}, 1.0), InvalidParameter);
}

TEST_CASE("poisson report from indicators") {
  // Two replicates over q0 = 3: {(0,1)} and {(0,1), (1,2)}.
  const std::vector<std::uint8_t> ind{1, 0, 0, 1, 0, 1};
  const auto r = poisson_report_from_indicators(3, ind, {1, 1});
  CHECK(r.pair_probs == std::vector<double>{1.0, 0.0, 0.5});
  CHECK(r.mu == doctest::Approx(1.5));
  CHECK(r.e1 == doctest::Approx(1.5 * 1.5));  // complete neighbourhoods when q0 = 3
  CHECK(r.e2 == doctest::Approx(2 * 0.5));
  CHECK(r.hist_R_tilde == std::vector<std::uint64_t>{0, 1, 1});
  CHECK(r.hist_R == std::vector<std::uint64_t>{0, 2});
  CHECK(r.chen_stein_bound == doctest::Approx(2 * (r.e1 + r.e2)));
  CHECK(r.empirical_tv >= 0.0);
  CHECK(r.empirical_tv <= 1.0);
}

TEST_CASE("poisson experiment on a small window") {
  PoissonConfig cfg;
  cfg.q0 = 4;
  cfg.window = {{5, 40}, 60, 8.0};
  for (int i = 0; i < 4; ++i) {
    cfg.starts.push_back({2 * i, 0});
    cfg.ends.push_back({0, 2 * i});
  }
  const auto r = poisson_experiment(cfg, 2000, RngStream(12, 0));
  CHECK(r.replicates == 2000);
  CHECK(r.mu > 0.0);
  CHECK(r.e1 >= 0.0);
  CHECK(r.e2 >= 0.0);
  double s = 0;
  for (double p : r.pair_probs) s += p;
  CHECK(r.mu == doctest::Approx(s));
  CHECK(r.propagated_error > 0.0);
  CHECK(r.empirical_tv <= r.chen_stein_bound + 5 * r.propagated_error);
  const auto again = poisson_experiment(cfg, 2000, RngStream(12, 0), ParallelRunner(2));
  CHECK(again.mu == r.mu);
  CHECK(again.hist_R_tilde == r.hist_R_tilde);
}

TEST_CASE("rotated displacement law") {
  RngStream rng(3, 0);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_rotated_displacement(101, rng);
    CHECK((d + 101) % 2 == 0);
    sum += d;
    sq += static_cast<double>(d) * d;
  }
  CHECK(std::abs(sum / n) < 4 * std::sqrt(101.0 / n));
  CHECK(sq / n == doctest::Approx(101.0).epsilon(0.05));
  CHECK(sample_rotated_displacement(0, rng) == 0);
}

namespace {

Schedule tiny_schedule(std::int64_t L2) {
  Schedule s;
  s.K = 1;
  s.L = {0, 0, L2, L2};
  s.l = {0, L2, L2};
  s.o = {0, L2, L2};
  return s;
}

}  // namespace

TEST_CASE("confinement: huge ball forces every A_k") {
  auto s = build_schedule(preset("desk-large"));
  const auto c = confinement_stats(s, 5, 1e-6, 0.1, 200, RngStream(8, 0));
  CHECK(c.D_N_estimate == 1.0);
  for (double a : c.frac_A) CHECK(a == 1.0);
  for (double g : c.mean_G_size) CHECK(g == 5.0);
}

TEST_CASE("confinement: q = 1 against the exact kernel") {
  // delta = 1.5, L_2 = 6: inside iff |S_6|^2 <= 6 / 2.25.
  const auto s = tiny_schedule(6);
  double exact = 0;
  for (std::int64_t x = -6; x <= 6; ++x)
    for (std::int64_t y = -6; y <= 6; ++y)
      if (static_cast<double>(x * x + y * y) <= 6 / 2.25)
        exact += exact_transition(6, {x, y}).probability;
  CHECK(exact == doctest::Approx(0.390625));  // (20^2 + 4 * 15 * 20) / 4^6
  const auto c = confinement_stats(s, 1, 1.5, 0.0, 40000, RngStream(21, 0));
  CHECK(std::abs(c.D_N_estimate - exact) < 4 * c.D_N_std_error);
}

TEST_CASE("confinement: D_N nonincreasing in q at eps0 = 0") {
  auto s = build_schedule(preset("desk-small"));
  REQUIRE(s.K >= 1);
  double prev = 1.0;
  for (int q = 1; q <= 6; ++q) {
    const auto c = confinement_stats(s, q, 0.6, 0.0, 500, RngStream(99, 0));
    CHECK(c.D_N_estimate <= prev);
    prev = c.D_N_estimate;
  }
  CHECK_THROWS_AS(confinement_stats(tiny_schedule(6), 0, 1.0, 0.0, 10, RngStream(1, 0)),
                  InvalidParameter);
}

TEST_CASE("pair window from a schedule") {
  const auto p = preset("desk-large");
  const auto s = build_schedule(p);
  const auto w = pair_window_from_schedule(s, p, 3);
  CHECK(w.interval.begin == 2990);
  CHECK(w.interval.last() == 6571);
  CHECK(w.horizon == s.o[3]);
  CHECK(w.ball_radius == doctest::Approx(10 * std::sqrt(3581.0)));
  CHECK_THROWS_AS(pair_window_from_schedule(s, p, 0), InvalidParameter);
}
