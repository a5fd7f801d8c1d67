#include "polymerlab/intersections.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <string>

#include "polymerlab/error.hpp"
#include "polymerlab/stats.hpp"

namespace polymerlab {

std::vector<std::pair<int, int>> pair_list(int q) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) out.emplace_back(i, j);
  return out;
}

WindowTracker::WindowTracker(int q0, IntervalTk interval, double ball_radius, bool guarded,
                             bool record_meetings)
    : interval_(interval),
      r2_(ball_radius * ball_radius),
      guarded_(guarded),
      record_(record_meetings) {
  if (q0 < 1) throw InvalidParameter("window needs at least one walk");
  if (guarded && !(ball_radius > 0.0)) throw InvalidParameter("ball_radius must be positive");
  rep_.q0 = q0;
  rep_.sigma.assign(q0, std::nullopt);
  rep_.tau_pairs.assign(q0 * (q0 - 1) / 2, std::nullopt);
  used_.assign(q0, 0);
  if (record_) meet_.assign(rep_.tau_pairs.size(), {});
}

void WindowTracker::observe(std::int64_t n, const std::vector<LatticePoint>& pos) {
  if (!interval_.contains(n)) return;
  const int q = rep_.q0;
  if (guarded_) {
    for (int i = 0; i < q; ++i) {
      if (rep_.sigma[i]) continue;
      const double d2 = static_cast<double>(pos[i].x) * pos[i].x +
                        static_cast<double>(pos[i].y) * pos[i].y;
      if (d2 > r2_) rep_.sigma[i] = n;
    }
  }
  bool picked = false;
  for (int i = 0; i < q; ++i) {
    if (rep_.sigma[i]) continue;
    for (int j = i + 1; j < q; ++j) {
      if (rep_.sigma[j] || !(pos[i] == pos[j])) continue;
      const int a = pair_index(i, j, q);
      if (!rep_.tau_pairs[a]) {
        rep_.tau_pairs[a] = n;
        ++rep_.R_tilde_k;
      }
      if (record_) meet_[a].push_back(n);
      if (!picked && !used_[i] && !used_[j]) {
        rep_.greedy.push_back({n, i, j});
        used_[i] = used_[j] = 1;
        ++rep_.R_k;
        picked = true;
      }
    }
  }
}

namespace {

WindowTracker track(const EnsembleWindow& w, bool record) {
  const int q = static_cast<int>(w.paths.size());
  if (q < 1) throw InvalidParameter("window has no paths");
  const std::size_t len = w.paths.front().length();
  for (const auto& p : w.paths)
    if (p.length() != len) throw InvalidParameter("window paths must share one length");
  if (!(w.ball_radius > 0.0)) throw InvalidParameter("ball_radius must be positive");
  if (!w.interval.empty() && (w.interval.begin < 0 || w.interval.last() > static_cast<std::int64_t>(len)))
    throw InvalidParameter("interval lies outside the paths");
  WindowTracker t(q, w.interval, w.ball_radius, true, record);
  if (w.interval.empty()) return t;
  std::vector<std::vector<LatticePoint>> all;
  all.reserve(q);
  for (const auto& p : w.paths) all.push_back(p.positions());
  std::vector<LatticePoint> pos(q);
  for (std::int64_t n = w.interval.begin; n < w.interval.end; ++n) {
    for (int i = 0; i < q; ++i) pos[i] = all[i][static_cast<std::size_t>(n)];
    t.observe(n, pos);
  }
  return t;
}

// Can each chosen pair be given one of its meeting times, all distinct?
bool has_distinct_times(const std::vector<int>& chosen,
                        const std::vector<std::vector<std::int64_t>>& times) {
  std::map<std::int64_t, int> owner;
  std::function<bool(int, std::map<std::int64_t, bool>&)> augment =
      [&](int c, std::map<std::int64_t, bool>& seen) {
        for (std::int64_t t : times[chosen[c]]) {
          if (seen[t]) continue;
          seen[t] = true;
          auto it = owner.find(t);
          if (it == owner.end() || augment(it->second, seen)) {
            owner[t] = c;
            return true;
          }
        }
        return false;
      };
  for (int c = 0; c < static_cast<int>(chosen.size()); ++c) {
    std::map<std::int64_t, bool> seen;
    if (!augment(c, seen)) return false;
  }
  return true;
}

}  // namespace

IntersectionReport analyze_window(const EnsembleWindow& w) { return track(w, false).report(); }

int max_disjoint_oracle(const EnsembleWindow& w) {
  const int q = static_cast<int>(w.paths.size());
  if (q > 12)
    throw CapacityError("max_disjoint_oracle: q0 = " + std::to_string(q) + " exceeds the budget of 12");
  const auto t = track(w, true);
  const auto& times = t.meetings();
  const auto pairs = pair_list(q);
  std::vector<int> cand;
  for (int a = 0; a < static_cast<int>(pairs.size()); ++a)
    if (!times[a].empty()) cand.push_back(a);
  int best = 0;
  std::vector<int> chosen;
  // Enumerate matchings over candidate pairs in index order.
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t from, std::uint32_t mask) {
    if (static_cast<int>(chosen.size()) > best && has_distinct_times(chosen, times))
      best = static_cast<int>(chosen.size());
    if (static_cast<int>(chosen.size()) + (q - std::popcount(mask)) / 2 <= best) return;
    for (std::size_t c = from; c < cand.size(); ++c) {
      const auto [i, j] = pairs[cand[c]];
      if ((mask >> i & 1u) || (mask >> j & 1u)) continue;
      chosen.push_back(cand[c]);
      rec(c + 1, mask | (1u << i) | (1u << j));
      chosen.pop_back();
    }
  };
  rec(0, 0);
  return best;
}

PairWindow pair_window_from_schedule(const Schedule& s, const ParameterTuple& p, int k) {
  if (k < 1 || k > s.K + 1) throw InvalidParameter("block index out of range");
  PairWindow w;
  w.interval = s.interval(k);
  w.horizon = s.o[k];
  w.ball_radius = static_cast<double>(p.M) * std::sqrt(static_cast<double>(s.l[k]));
  return w;
}

namespace {

void check_endpoints(const PairWindow& w, const std::vector<LatticePoint>& x,
                     const std::vector<LatticePoint>& y) {
  if (w.horizon < 0) throw InvalidParameter("negative horizon");
  if (!w.interval.empty() && (w.interval.begin < 0 || w.interval.last() > w.horizon))
    throw InvalidParameter("interval lies outside the horizon");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!reachable(w.horizon, y[i] - x[i]))
      throw InvalidEndpoint("endpoint " + std::to_string(i) + " not reachable in o_k steps");
}

// Runs one replicate of m walks (bridges when `bridged`) through the window.
void run_window(const PairWindow& w, const std::vector<LatticePoint>& x,
                const std::vector<LatticePoint>& y, bool bridged, RngStream& rng,
                WindowTracker& tracker) {
  const std::size_t m = x.size();
  std::vector<WalkStepper> walkers;
  walkers.reserve(m);
  for (std::size_t i = 0; i < m; ++i)
    walkers.push_back(bridged ? WalkStepper(x[i], y[i], w.horizon) : WalkStepper(x[i]));
  std::vector<LatticePoint> pos(x.begin(), x.end());
  if (w.interval.empty()) return;
  tracker.observe(0, pos);
  for (std::int64_t n = 1; n <= w.interval.last(); ++n) {
    for (std::size_t i = 0; i < m; ++i) {
      walkers[i].step(rng);
      pos[i] = walkers[i].position();
    }
    tracker.observe(n, pos);
  }
}

ProbabilityEstimate from_moments(const RunningMoments& m) {
  return {m.mean, m.std_error(), m.count};
}

}  // namespace

ProbabilityEstimate estimate_pair_probability(const PairWindow& w,
                                              const std::array<LatticePoint, 2>& x,
                                              const std::array<LatticePoint, 2>& y,
                                              PairVariant variant, std::uint64_t replicates,
                                              const RngStream& rng, const ParallelRunner& runner) {
  const std::vector<LatticePoint> xs(x.begin(), x.end()), ys(y.begin(), y.end());
  const bool bridged = variant != PairVariant::unconditioned;
  if (bridged) check_endpoints(w, xs, ys);
  if (replicates < 2) throw InvalidParameter("need at least 2 replicates");
  const bool guarded = variant != PairVariant::unguarded;
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    RunningMoments acc;
    for (std::uint64_t r = begin; r < end; ++r) {
      RngStream s = rng.substream(r);
      WindowTracker t(2, w.interval, w.ball_radius, guarded);
      run_window(w, xs, ys, bridged, s, t);
      acc.push(t.report().tau_pairs[0] ? 1.0 : 0.0);
    }
    return acc;
  };
  return from_moments(
      map_reduce_replicates<RunningMoments>(runner, replicates, block, RunningMoments::merge));
}

TripleEstimate estimate_triple_probability(const PairWindow& w,
                                           const std::array<LatticePoint, 3>& x,
                                           const std::array<LatticePoint, 3>& y,
                                           std::uint64_t replicates, const RngStream& rng,
                                           const ParallelRunner& runner) {
  const std::vector<LatticePoint> xs(x.begin(), x.end()), ys(y.begin(), y.end());
  check_endpoints(w, xs, ys);
  if (replicates < 2) throw InvalidParameter("need at least 2 replicates");
  struct Acc {
    RunningMoments t, a, b, da, db;
    static Acc merge(const Acc& u, const Acc& v) {
      return {RunningMoments::merge(u.t, v.t), RunningMoments::merge(u.a, v.a),
              RunningMoments::merge(u.b, v.b), RunningMoments::merge(u.da, v.da),
              RunningMoments::merge(u.db, v.db)};
    }
  };
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    Acc acc;
    for (std::uint64_t r = begin; r < end; ++r) {
      RngStream s = rng.substream(r);
      WindowTracker t(3, w.interval, w.ball_radius);
      run_window(w, xs, ys, true, s, t);
      const auto& tau = t.report().tau_pairs;
      const double i12 = tau[pair_index(0, 1, 3)] ? 1.0 : 0.0;
      const double i13 = tau[pair_index(0, 2, 3)] ? 1.0 : 0.0;
      acc.t.push(i12 * i13);
      acc.a.push(i12);
      acc.b.push(i13);
      acc.da.push(i12 - i12 * i13);
      acc.db.push(i13 - i12 * i13);
    }
    return acc;
  };
  const Acc m = map_reduce_replicates<Acc>(runner, replicates, block, Acc::merge);
  TripleEstimate e;
  e.triple = from_moments(m.t);
  e.p12 = from_moments(m.a);
  e.p13 = from_moments(m.b);
  e.se_diff12 = m.da.std_error();
  e.se_diff13 = m.db.std_error();
  return e;
}

namespace {

// B(a): pairs sharing an index with pair a, a itself included.
std::vector<std::vector<int>> neighbourhoods(int q0) {
  const auto pairs = pair_list(q0);
  std::vector<std::vector<int>> nb(pairs.size());
  for (std::size_t a = 0; a < pairs.size(); ++a)
    for (std::size_t b = 0; b < pairs.size(); ++b) {
      const auto [i, j] = pairs[a];
      const auto [k, l] = pairs[b];
      if (i == k || i == l || j == k || j == l) nb[a].push_back(static_cast<int>(b));
    }
  return nb;
}

}  // namespace

ChenStein chen_stein_bound(int q0, const std::vector<double>& p,
                           const std::map<std::pair<int, int>, double>& joint) {
  if (q0 < 2) throw InvalidParameter("chen_stein_bound: q0 must be >= 2");
  const std::size_t P = static_cast<std::size_t>(q0) * (q0 - 1) / 2;
  if (p.size() != P) throw IncompleteInput("chen_stein_bound: need one probability per pair");
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter("chen_stein_bound: probability outside [0, 1]");
  const auto nb = neighbourhoods(q0);
  ChenStein c;
  KahanSum mu, e1, e2;
  for (std::size_t a = 0; a < P; ++a) {
    mu.add(p[a]);
    for (int b : nb[a]) {
      e1.add(p[a] * p[b]);
      if (b == static_cast<int>(a)) continue;
      const std::pair<int, int> key{std::min(static_cast<int>(a), b), std::max(static_cast<int>(a), b)};
      auto it = joint.find(key);
      if (it == joint.end())
        throw IncompleteInput("chen_stein_bound: missing joint probability for pairs " +
                              std::to_string(key.first) + " and " + std::to_string(key.second));
      e2.add(it->second);
    }
  }
  c.mu = mu.value();
  c.e1 = e1.value();
  c.e2 = e2.value();
  c.bound = 2.0 * (c.e1 + c.e2);
  return c;
}

double tv_to_poisson(const std::vector<std::uint64_t>& counts, double mu) {
  if (!(mu >= 0.0)) throw InvalidParameter("tv_to_poisson: mu must be >= 0");
  double n = 0;
  for (auto c : counts) n += static_cast<double>(c);
  if (n <= 0) throw InvalidParameter("tv_to_poisson: empty histogram");
  KahanSum l1, covered;
  double pk = std::exp(-mu);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (k > 0) pk *= mu / static_cast<double>(k);
    covered.add(pk);
    l1.add(std::abs(static_cast<double>(counts[k]) / n - pk));
  }
  const double tail = std::max(0.0, 1.0 - covered.value());
  return std::clamp(0.5 * (l1.value() + tail), 0.0, 1.0);
}

PoissonReport poisson_report_from_indicators(int q0, const std::vector<std::uint8_t>& ind,
                                             const std::vector<int>& r_greedy) {
  const int P = q0 * (q0 - 1) / 2;
  const std::size_t n = r_greedy.size();
  if (n < 2 || ind.size() != n * P) throw IncompleteInput("indicator table has the wrong shape");
  const double dn = static_cast<double>(n);
  const auto nb = neighbourhoods(q0);
  PoissonReport rep;
  rep.replicates = n;
  rep.pair_probs.assign(P, 0.0);
  std::map<std::pair<int, int>, double> joint;
  for (int a = 0; a < P; ++a)
    for (int b : nb[a])
      if (b > a) joint[{a, b}] = 0.0;
  RunningMoments rt;
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* row = &ind[r * P];
    int count = 0;
    for (int a = 0; a < P; ++a) {
      rep.pair_probs[a] += row[a];
      count += row[a];
    }
    for (auto& [key, v] : joint) v += row[key.first] & row[key.second];
    if (static_cast<std::size_t>(count) >= rep.hist_R_tilde.size()) rep.hist_R_tilde.resize(count + 1, 0);
    ++rep.hist_R_tilde[count];
    const int g = r_greedy[r];
    if (static_cast<std::size_t>(g) >= rep.hist_R.size()) rep.hist_R.resize(g + 1, 0);
    ++rep.hist_R[g];
    rt.push(count);
  }
  for (auto& v : rep.pair_probs) v /= dn;
  for (auto& [key, v] : joint) v /= dn;
  const ChenStein cs = chen_stein_bound(q0, rep.pair_probs, joint);
  rep.mu = cs.mu;
  rep.e1 = cs.e1;
  rep.e2 = cs.e2;
  rep.chen_stein_bound = cs.bound;
  rep.mu_std_error = rt.std_error();
  rep.empirical_tv = tv_to_poisson(rep.hist_R_tilde, rep.mu);

  // Linearised replicate contribution to e1 + e2.
  std::vector<double> grad(P, 0.0);
  for (int c = 0; c < P; ++c)
    for (int b : nb[c]) grad[c] += 2.0 * rep.pair_probs[b];
  RunningMoments lin;
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* row = &ind[r * P];
    double y = 0.0, z = 0.0;
    for (int a = 0; a < P; ++a) {
      if (!row[a]) continue;
      y += grad[a];
      for (int b : nb[a])
        if (b != a) z += row[b];
    }
    lin.push(y + z);
  }
  rep.bound_terms_std_error = lin.std_error();
  KahanSum noise;
  for (auto c : rep.hist_R_tilde) {
    const double pk = static_cast<double>(c) / dn;
    noise.add(std::sqrt(pk * (1.0 - pk) / dn));
  }
  rep.tv_noise = 0.5 * noise.value();
  rep.propagated_error =
      std::sqrt(4.0 * rep.bound_terms_std_error * rep.bound_terms_std_error +
                rep.tv_noise * rep.tv_noise + rep.mu_std_error * rep.mu_std_error);
  return rep;
}

PoissonReport poisson_experiment(const PoissonConfig& cfg, std::uint64_t replicates,
                                 const RngStream& rng, const ParallelRunner& runner) {
  if (cfg.q0 < 2) throw InvalidParameter("poisson_experiment: q0 must be >= 2");
  if (static_cast<int>(cfg.starts.size()) != cfg.q0 || static_cast<int>(cfg.ends.size()) != cfg.q0)
    throw IncompleteInput("poisson_experiment: need q0 starts and q0 ends");
  if (replicates < 2) throw InvalidParameter("need at least 2 replicates");
  check_endpoints(cfg.window, cfg.starts, cfg.ends);
  const int P = cfg.q0 * (cfg.q0 - 1) / 2;
  std::vector<std::uint8_t> ind(replicates * P, 0);
  std::vector<int> greedy(replicates, 0);
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t r = begin; r < end; ++r) {
      RngStream s = rng.substream(r);
      WindowTracker t(cfg.q0, cfg.window.interval, cfg.window.ball_radius);
      run_window(cfg.window, cfg.starts, cfg.ends, true, s, t);
      const auto& rep = t.report();
      for (int a = 0; a < P; ++a) ind[r * P + a] = rep.tau_pairs[a] ? 1 : 0;
      greedy[r] = rep.R_k;
    }
    return 0;
  };
  map_reduce_replicates<int>(runner, replicates, block, [](int, int) { return 0; });
  return poisson_report_from_indicators(cfg.q0, ind, greedy);
}

std::int64_t sample_rotated_displacement(std::int64_t m, RngStream& rng) {
  std::int64_t ones = 0;
  std::int64_t left = m;
  while (left >= 64) {
    ones += std::popcount(rng.next_u64());
    left -= 64;
  }
  if (left > 0) ones += std::popcount(rng.next_u64() & ((std::uint64_t{1} << left) - 1));
  return 2 * ones - m;
}

ConfinementStats confinement_stats(const Schedule& s, int q, double delta, double eps0,
                                   std::uint64_t replicates, const RngStream& rng,
                                   const ParallelRunner& runner) {
  if (s.K < 1) throw InvalidParameter("confinement_stats: schedule has K = 0");
  if (q < 1) throw InvalidParameter("confinement_stats: q must be >= 1");
  if (!(delta > 0.0)) throw InvalidParameter("confinement_stats: delta must be positive");
  if (replicates < 2) throw InvalidParameter("need at least 2 replicates");
  const int K = s.K;
  const double need = (1.0 - eps0) * q;
  std::vector<double> radius2(K + 2, 0.0);
  for (int k = 1; k <= K + 1; ++k) radius2[k] = static_cast<double>(s.L[k]) / (delta * delta);

  struct Acc {
    RunningMoments d;
    std::vector<RunningMoments> g, a;
    static Acc merge(const Acc& u, const Acc& v) {
      if (u.g.empty()) return v;
      if (v.g.empty()) return u;
      Acc r;
      r.d = RunningMoments::merge(u.d, v.d);
      for (std::size_t k = 0; k < u.g.size(); ++k) {
        r.g.push_back(RunningMoments::merge(u.g[k], v.g[k]));
        r.a.push_back(RunningMoments::merge(u.a[k], v.a[k]));
      }
      return r;
    }
  };
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    Acc acc;
    acc.g.assign(K, {});
    acc.a.assign(K, {});
    std::vector<int> inside(static_cast<std::size_t>(K + 2) * q);
    for (std::uint64_t r = begin; r < end; ++r) {
      const RngStream rep = rng.substream(r);
      for (int i = 0; i < q; ++i) {
        RngStream w = rep.substream(static_cast<std::uint64_t>(i));
        std::int64_t u = 0, v = 0;
        // L_1 = 0, so the walk sits at the origin at k = 1.
        for (int k = 1; k <= K + 1; ++k) {
          if (k > 1) {
            const std::int64_t m = s.L[k] - s.L[k - 1];
            u += sample_rotated_displacement(m, w);
            v += sample_rotated_displacement(m, w);
          }
          const double x = static_cast<double>(u + v) / 2, y = static_cast<double>(u - v) / 2;
          inside[static_cast<std::size_t>(k) * q + i] = (x * x + y * y <= radius2[k]);
        }
      }
      bool all = true;
      for (int k = 1; k <= K; ++k) {
        int g = 0;
        for (int i = 0; i < q; ++i)
          g += inside[static_cast<std::size_t>(k) * q + i] && inside[static_cast<std::size_t>(k + 1) * q + i];
        const bool ak = g >= need - 1e-12;
        acc.g[k - 1].push(g);
        acc.a[k - 1].push(ak);
        all = all && ak;
      }
      acc.d.push(all);
    }
    return acc;
  };
  const Acc m = map_reduce_replicates<Acc>(runner, replicates, block, Acc::merge);
  ConfinementStats out;
  out.q = q;
  out.K = K;
  out.replicates = replicates;
  for (int k = 0; k < K; ++k) {
    out.mean_G_size.push_back(m.g[k].mean);
    out.frac_A.push_back(m.a[k].mean);
  }
  out.D_N_estimate = m.d.mean;
  out.D_N_std_error = m.d.std_error();
  return out;
}

}  // namespace polymerlab
