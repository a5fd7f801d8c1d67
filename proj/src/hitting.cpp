#include "polymerlab/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "polymerlab/error.hpp"
#include "polymerlab/series.hpp"

namespace polymerlab {

double ratio_formula(double a, double r, double t) {
  if (!(a > 0.0) || !(r >= a)) throw DomainError("ratio_formula needs 0 < a <= r");
  if (!(t > r * r)) throw DomainError("ratio_formula needs t > r^2");
  return std::log(t / (r * r)) / std::log(t / (a * a));
}

FormulaValue window_formula(const HittingQuery& q) {
  if (!(q.a > 0.0)) throw DomainError("window_formula needs a > 0");
  if (!(q.a * q.a < q.t1)) throw DomainError("window_formula needs a^2 < t1");
  if (!(q.t2 >= q.t1)) throw InvalidParameter("window_formula needs t1 <= t2");
  return {std::log(q.t2 / q.t1) / std::log(q.t2 / (q.a * q.a)), q.a * q.a / q.t1};
}

double bessel_k0_series(double u) {
  if (!(u > 0.0)) throw DomainError("bessel_k0 needs u > 0");
  const long double x = u;
  const long double y = x * x / 4;
  long double term = 1, i0 = 1, s = 0, h = 0;
  for (int k = 1; k < 500; ++k) {
    term *= y / (static_cast<long double>(k) * k);
    h += 1.0L / k;
    i0 += term;
    s += term * h;
    if (term * (h + 1) < 1e-21L * (i0 + s)) break;
  }
  return static_cast<double>(-(std::log(x / 2) + std::numbers::egamma_v<long double>) * i0 + s);
}

// Temme's form of Steed's CF2 for K_nu at nu = 0.
double bessel_k0_cf(double u) {
  if (!(u > 0.0)) throw DomainError("bessel_k0 needs u > 0");
  const long double x = u;
  long double b = 2 * (1 + x), d = 1 / b, h = d, delh = d;
  long double q1 = 0, q2 = 1;
  const long double a1 = 0.25L;
  long double q = a1, c = a1, a = -a1;
  long double s = 1 + q * delh;
  for (int i = 1; i < 100000; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0L);
    const long double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2;
    d = 1 / (b + a * d);
    delh = (b * d - 1) * delh;
    h += delh;
    const long double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < 1e-19L) break;
  }
  return static_cast<double>(std::sqrt(std::numbers::pi_v<long double> / (2 * x)) * std::exp(-x) / s);
}

double bessel_k0(double u) { return u <= 2.0 ? bessel_k0_series(u) : bessel_k0_cf(u); }

double laplace_hitting(double a, double r, double lambda) {
  if (!(a > 0.0) || !(r >= a)) throw DomainError("laplace_hitting needs 0 < a <= r");
  if (!(lambda > 0.0)) throw DomainError("laplace_hitting needs lambda > 0");
  if (a == r) return 1.0 / lambda;
  const double s = std::sqrt(2.0 * lambda);
  return bessel_k0(r * s) / (lambda * bessel_k0(a * s));
}

DiscHitEstimate simulate_disc_hit(const HittingQuery& q, const BesselConfig& cfg,
                                  std::uint64_t replicates, const RngStream& rng,
                                  const ParallelRunner& runner) {
  if (!(q.a > 0.0)) throw InvalidParameter("disc radius must be positive");
  if (!(q.r >= 0.0)) throw InvalidParameter("start radius must be >= 0");
  if (!(q.t1 >= 0.0) || !(q.t2 >= q.t1)) throw InvalidParameter("need 0 <= t1 <= t2");
  if (!(cfg.step > 0.0) || !(cfg.refinement_radius > 0.0))
    throw InvalidParameter("step and refinement_radius must be positive");
  if (replicates < 2) throw InvalidParameter("need at least 2 replicates");
  const double floor_step = cfg.min_step > 0.0 ? cfg.min_step : 0.0025 * q.a * q.a;
  const double scale = q.t1 > 0.0 ? q.t1 : q.t2;
  const double cap = cfg.max_step > 0.0 ? std::max(cfg.max_step, cfg.step) : cfg.step;

  struct Acc {
    RunningMoments hit, steps;
    static Acc merge(const Acc& x, const Acc& y) {
      return {RunningMoments::merge(x.hit, y.hit), RunningMoments::merge(x.steps, y.steps)};
    }
  };
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    Acc acc;
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream s = rng.substream(i);
      double x = q.r, y = 0.0;
      if (q.t1 > 0.0) {
        const double sd = std::sqrt(q.t1);
        x += sd * s.normal();
        y += sd * s.normal();
      }
      double t = q.t1;
      double d = std::hypot(x, y) - q.a;
      bool hit = d <= 0.0;
      std::uint64_t n = 0;
      while (!hit && t < q.t2) {
        const double left = q.t2 - t;
        if (d > 8.0 * std::sqrt(left)) break;
        const double f = d / cfg.refinement_radius;
        const double dt = std::min({std::max(floor_step, cfg.step * f * f), cap, left});
        const double sd = std::sqrt(dt);
        x += sd * s.normal();
        y += sd * s.normal();
        const double d1 = std::hypot(x, y) - q.a;
        ++n;
        t += dt;
        if (d1 <= 0.0) {
          hit = true;
        } else if (cfg.crossing_correction) {
          // Bridge minimum against the tangent line at the nearest point.
          hit = s.uniform() < std::exp(-2.0 * d * d1 / dt);
        }
        d = d1;
      }
      acc.hit.push(hit ? 1.0 : 0.0);
      acc.steps.push(static_cast<double>(n));
    }
    return acc;
  };
  const Acc m = map_reduce_replicates<Acc>(runner, replicates, block, Acc::merge);
  DiscHitEstimate e;
  e.estimate = m.hit.mean;
  e.std_error = m.hit.std_error();
  e.replicates = replicates;
  e.mean_steps = m.steps.mean;
  e.bias_flag = cfg.step > scale / 100.0 ||
                cfg.refinement_radius * cfg.refinement_radius < 16.0 * cfg.step ||
                floor_step > 0.0025 * q.a * q.a * (1 + 1e-12) || !cfg.crossing_correction;
  return e;
}

ProbabilityEstimate discrete_hit_estimate(const LatticePoint& x, const IntervalTk& interval,
                                          std::uint64_t replicates, const RngStream& rng,
                                          const ParallelRunner& runner) {
  if (interval.empty() || interval.begin < 0) throw InvalidParameter("interval must be nonempty and start at n >= 0");
  if (replicates < 2) throw InvalidParameter("need at least 2 replicates");
  const LatticePoint origin{0, 0};
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    RunningMoments acc;
    for (std::uint64_t i = begin; i < end; ++i) {
      RngStream s = rng.substream(i);
      WalkStepper w(x);
      bool hit = interval.contains(0) && x == origin;
      for (std::int64_t n = 1; !hit && n <= interval.last(); ++n) {
        w.step(s);
        if (n < interval.begin) continue;
        const auto p = w.position();
        if (p == origin) hit = true;
        // Too far to come back before the window closes.
        else if (p.l1() > interval.last() - n) break;
      }
      acc.push(hit ? 1.0 : 0.0);
    }
    return acc;
  };
  const auto m = map_reduce_replicates<RunningMoments>(runner, replicates, block, RunningMoments::merge);
  return {m.mean, m.std_error(), m.count};
}

double exact_window_hit(const LatticePoint& x, const IntervalTk& interval) {
  if (interval.empty() || interval.begin < 0) throw InvalidParameter("interval must be nonempty and start at n >= 0");
  const auto W = static_cast<std::size_t>(interval.size());
  const LatticePoint origin{0, 0};
  std::vector<double> p(W), u(W);
  for (std::size_t i = 0; i < W; ++i) {
    p[i] = exact_transition(interval.begin + static_cast<std::int64_t>(i), x).probability;
    u[i] = exact_transition(static_cast<std::int64_t>(i), origin).probability;
  }
  // p = F * u, F the law of the first visit inside the window.
  const auto F = convolve_truncated(p, series_inverse(u, W), W);
  KahanSum total;
  for (double f : F) total.add(f);
  return std::clamp(total.value(), 0.0, 1.0);
}

LeGallCheck legall_check(const LatticePoint& z, std::int64_t l, double C, double h) {
  if (l < 2) throw InvalidParameter("legall_check needs l >= 2");
  const double z2 = static_cast<double>(z.x) * z.x + static_cast<double>(z.y) * z.y;
  LeGallCheck c;
  c.lhs = std::log(static_cast<double>(l)) * h;
  const double lg = z2 > 0.0 ? std::log(static_cast<double>(l) / z2)
                             : std::numeric_limits<double>::infinity();
  c.rhs = C * std::max(0.0, lg) + (z2 >= static_cast<double>(l) ? C : 0.0);
  c.holds = c.lhs <= c.rhs;
  return c;
}

double effective_radius() {
  return std::exp(-(std::numbers::egamma + std::log(16.0)) / 2.0);
}

}  // namespace polymerlab
