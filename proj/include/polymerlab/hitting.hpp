#pragma once

#include <cstdint>

#include "polymerlab/parallel.hpp"
#include "polymerlab/rng.hpp"
#include "polymerlab/schedule.hpp"
#include "polymerlab/stats.hpp"
#include "polymerlab/walk.hpp"

namespace polymerlab {

struct FormulaValue {
  double value = 0.0;
  /// Additive error budget where one is known, else 0.
  double error_budget = 0.0;
};

/// log(t / r^2) / log(t / a^2). Needs 0 < a <= r and t > r^2.
double ratio_formula(double a, double r, double t);

/// Planar Brownian motion started at radius r, disc of radius a, window
/// [t1, t2].
struct HittingQuery {
  double a = 1.0;
  double r = 0.0;
  double t1 = 0.0;
  double t2 = 1.0;
};

/// log(t2 / t1) / log(t2 / a^2) for a start at the origin, with budget
/// a^2 / t1. Needs a^2 < t1 <= t2.
FormulaValue window_formula(const HittingQuery& q);

/// Modified Bessel function K_0: power series up to u = 2, Steed's
/// continued fraction above.
double bessel_k0(double u);
double bessel_k0_series(double u);
double bessel_k0_cf(double u);

/// Laplace transform in t of P_r(T_a <= t):
/// K_0(r sqrt(2 lambda)) / (lambda K_0(a sqrt(2 lambda))).
double laplace_hitting(double a, double r, double lambda);

struct BesselConfig {
  /// Time step at distance refinement_radius from the disc.
  double step = 1e-2;
  /// The step scales as step * (dist / refinement_radius)^2: it shrinks
  /// near the disc and grows up to max_step away from it.
  double refinement_radius = 0.6;
  /// Cap on the step; 0 means step (no growth).
  double max_step = 0.0;
  /// Floor on the shrunken step; 0 means (0.05 a)^2.
  double min_step = 0.0;
  bool crossing_correction = true;
};

struct DiscHitEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t replicates = 0;
  /// Steps per replicate after the jump to t1.
  double mean_steps = 0.0;
  /// Set when step exceeds t1 / 100, a step's spread exceeds a quarter of
  /// the distance to the disc, the floor step is not small against a^2, or
  /// the crossing test is off. The estimate then carries visible
  /// discretization bias.
  bool bias_flag = false;
};

/// P(inf over [t1, t2] of |B_t| <= a) for B started at (r, 0). The position
/// at t1 is drawn exactly; after that Gaussian steps with adaptive size and,
/// optionally, a Brownian-bridge crossing test against the tangent line of
/// the disc. Replicate i uses rng.substream(i).
DiscHitEstimate simulate_disc_hit(const HittingQuery& q, const BesselConfig& cfg,
                                  std::uint64_t replicates, const RngStream& rng,
                                  const ParallelRunner& runner = ParallelRunner(1));

/// MC estimate of P_x(S_n = 0 for some n in the interval).
ProbabilityEstimate discrete_hit_estimate(const LatticePoint& x, const IntervalTk& interval,
                                          std::uint64_t replicates, const RngStream& rng,
                                          const ParallelRunner& runner = ParallelRunner(1));

/// Same probability computed exactly by first-visit renewal.
double exact_window_hit(const LatticePoint& x, const IntervalTk& interval);

struct LeGallCheck {
  double lhs = 0.0;  // (log l) h
  double rhs = 0.0;  // C (log(l / |z|^2))_+ + C 1{|z|^2 >= l}
  bool holds = false;
};

/// Checks an estimate h of P_z(T_0 <= l) against the logarithmic bound with
/// constant C.
LeGallCheck legall_check(const LatticePoint& z, std::int64_t l, double C, double h);

/// Disc radius exp(-(gamma + log 16) / 2) at which the window formula
/// reproduces the lattice return asymptotics, in standard Brownian
/// coordinates: S_n ~ B_{n/2} for one walk, D_n ~ B_n for the difference of
/// two independent walks.
double effective_radius();

}  // namespace polymerlab
