#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "polymerlab/rng.hpp"

namespace polymerlab {

struct LatticePoint {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
  LatticePoint operator+(const LatticePoint& o) const { return {x + o.x, y + o.y}; }
  LatticePoint operator-(const LatticePoint& o) const { return {x - o.x, y - o.y}; }
  double norm() const;
  std::int64_t l1() const;
};

/// True iff p can be occupied at time n by a walk started at the origin.
bool reachable(std::int64_t n, const LatticePoint& p);

enum class Move : std::uint8_t { east, west, north, south };

LatticePoint move_vector(Move m);

struct WalkPath {
  LatticePoint start;
  std::vector<Move> steps;

  std::size_t length() const { return steps.size(); }
  /// Position after n steps, O(n).
  LatticePoint position(std::size_t n) const;
  /// All positions 0..length.
  std::vector<LatticePoint> positions() const;
};

struct KernelValue {
  double probability = 0.0;
  double log_probability = 0.0;
};

/// log of the 1D simple walk mass C(n, (n+k)/2) / 2^n; -inf off support.
double log_binomial_half(std::int64_t n, std::int64_t k);

/// p_n(x) = P_0(S_n = x) for the planar simple random walk.
KernelValue exact_transition(std::int64_t n, const LatticePoint& x);

/// Leading local-limit term (2 / (pi t)) exp(-|x|^2 / t).
double lclt_approx(std::int64_t t, const LatticePoint& x);

struct SupBound {
  double observed_max;
  double bound_ratio;
};

SupBound kernel_sup_bound_check(std::int64_t n);

struct LcltError {
  std::int64_t t;
  double max_rel_error;
  LatticePoint argmax;
  /// max_rel_error * t, the empirical constant in |ratio - 1| <= c / t.
  double fitted_c;
};

/// Max of |p_t(x) / lclt_approx(t, x) - 1| over parity-matching |x| <= 3 sqrt(t).
LcltError lclt_max_error(std::int64_t t);

WalkPath sample_path(std::int64_t n, const LatticePoint& start, RngStream& rng);

/// Walk conditioned on position(n) == end. Throws InvalidEndpoint if end is
/// not reachable from start in n steps.
WalkPath sample_bridge(std::int64_t n, const LatticePoint& start,
                       const LatticePoint& end, RngStream& rng);

/// Incremental sampler for a free walk or a bridge.
///
/// Works in rotated coordinates u = x + y, v = x - y, which move as two
/// independent +-1 walks. A planar bridge is a pair of 1D bridges.
class WalkStepper {
 public:
  /// Free walk.
  explicit WalkStepper(const LatticePoint& start);
  /// Bridge of n steps from start to end.
  WalkStepper(const LatticePoint& start, const LatticePoint& end, std::int64_t n);

  LatticePoint position() const;
  std::int64_t u() const { return u_; }
  std::int64_t v() const { return v_; }
  std::int64_t time() const { return time_; }

  Move step(RngStream& rng);

 private:
  bool bridge_ = false;
  std::int64_t u_ = 0, v_ = 0;
  std::int64_t tu_ = 0, tv_ = 0;
  std::int64_t remaining_ = 0;
  std::int64_t time_ = 0;
};

/// Probability that a 1D bridge with m steps left and remaining
/// displacement d takes a +1 step: (m + d) / (2m).
inline double bridge_up_probability(std::int64_t m, std::int64_t d) {
  return static_cast<double>(m + d) / static_cast<double>(2 * m);
}

}  // namespace polymerlab
