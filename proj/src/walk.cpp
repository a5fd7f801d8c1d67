#include "polymerlab/walk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polymerlab/error.hpp"

namespace polymerlab {

double LatticePoint::norm() const {
  return std::hypot(static_cast<double>(x), static_cast<double>(y));
}

std::int64_t LatticePoint::l1() const { return std::abs(x) + std::abs(y); }

bool reachable(std::int64_t n, const LatticePoint& p) {
  if (n < 0) return false;
  if (p.l1() > n) return false;
  return ((p.x + p.y - n) % 2 + 2) % 2 == 0;
}

LatticePoint move_vector(Move m) {
  switch (m) {
    case Move::east: return {1, 0};
    case Move::west: return {-1, 0};
    case Move::north: return {0, 1};
    case Move::south: return {0, -1};
  }
  return {0, 0};
}

LatticePoint WalkPath::position(std::size_t n) const {
  LatticePoint p = start;
  for (std::size_t i = 0; i < n && i < steps.size(); ++i) p = p + move_vector(steps[i]);
  return p;
}

std::vector<LatticePoint> WalkPath::positions() const {
  std::vector<LatticePoint> out;
  out.reserve(steps.size() + 1);
  LatticePoint p = start;
  out.push_back(p);
  for (Move m : steps) {
    p = p + move_vector(m);
    out.push_back(p);
  }
  return out;
}

// Binomial masses via Loader's saddle-point expansion:
// log C(n,x) p^x q^(n-x) = -stirlerr terms - bd0 terms - log(2 pi x (n-x)/n)/2.

namespace {

constexpr double kStirlerrTable[16] = {
    0.0,
    0.08106146679532725821967026,
    0.04134069595540929409382208,
    0.02767792568499833914878929,
    0.02079067210376509311152277,
    0.01664469118982119216319487,
    0.01387612882307074799874573,
    0.01189670994589177009505572,
    0.01041126526197209649747857,
    0.009255462182712732917728637,
    0.008330563433362871256469319,
    0.007573675487951840794972024,
    0.006942840107209529865664153,
    0.006408994188004207068439631,
    0.005951370112758847735624416,
    0.00555473355196280137103869,
};

// log(n!) - (n + 1/2) log n + n - log(2 pi)/2
double stirlerr(std::int64_t n) {
  if (n <= 15) return kStirlerrTable[n];
  constexpr double S0 = 1.0 / 12, S1 = 1.0 / 360, S2 = 1.0 / 1260, S3 = 1.0 / 1680,
                   S4 = 1.0 / 1188;
  const double d = static_cast<double>(n);
  const double nn = d * d;
  if (n > 500) return (S0 - S1 / nn) / d;
  if (n > 80) return (S0 - (S1 - S2 / nn) / nn) / d;
  if (n > 35) return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / d;
  return (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / d;
}

// x log(x/np) + np - x, without cancellation near x = np.
double bd0(double x, double np) {
  if (std::abs(x - np) < 0.1 * (x + np)) {
    double v = (x - np) / (x + np);
    double s = (x - np) * v;
    double ej = 2 * x * v;
    v = v * v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / np) + np - x;
}

}  // namespace

double log_binomial_half(std::int64_t n, std::int64_t k) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (n < 0 || std::abs(k) > n || ((n + k) % 2 + 2) % 2 != 0) return ninf;
  if (n == 0) return 0.0;
  const std::int64_t x = (n + k) / 2;
  if (x == 0 || x == n) return -static_cast<double>(n) * std::numbers::ln2;
  const double dn = static_cast<double>(n);
  const double dx = static_cast<double>(x);
  const double half = dn / 2;
  const double lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(dx, half) -
                    bd0(dn - dx, half);
  const double lf = std::log(2 * std::numbers::pi) + std::log(dx) + std::log1p(-dx / dn);
  return lc - 0.5 * lf;
}

KernelValue exact_transition(std::int64_t n, const LatticePoint& x) {
  if (!reachable(n, x)) return {0.0, -std::numeric_limits<double>::infinity()};
  const double lp = log_binomial_half(n, x.x + x.y) + log_binomial_half(n, x.x - x.y);
  return {std::exp(lp), lp};
}

double lclt_approx(std::int64_t t, const LatticePoint& x) {
  const double dt = static_cast<double>(t);
  const double r2 = static_cast<double>(x.x) * x.x + static_cast<double>(x.y) * x.y;
  return 2.0 / (std::numbers::pi * dt) * std::exp(-r2 / dt);
}

SupBound kernel_sup_bound_check(std::int64_t n) {
  if (n < 1) throw InvalidParameter("kernel_sup_bound_check: n must be >= 1");
  // Unimodal product of two centred binomials: the max sits at the origin
  // for even n and at a neighbour for odd n.
  const LatticePoint at = (n % 2 == 0) ? LatticePoint{0, 0} : LatticePoint{1, 0};
  const double m = exact_transition(n, at).probability;
  return {m, m * static_cast<double>(n)};
}

LcltError lclt_max_error(std::int64_t t) {
  LcltError out{t, 0.0, {0, 0}, 0.0};
  const double lim = 3.0 * std::sqrt(static_cast<double>(t));
  const std::int64_t r = static_cast<std::int64_t>(std::floor(lim));
  for (std::int64_t x = -r; x <= r; ++x) {
    for (std::int64_t y = -r; y <= r; ++y) {
      const LatticePoint p{x, y};
      if (!reachable(t, p) || p.norm() > lim) continue;
      const double e = std::abs(exact_transition(t, p).probability / lclt_approx(t, p) - 1.0);
      if (e > out.max_rel_error) {
        out.max_rel_error = e;
        out.argmax = p;
      }
    }
  }
  out.fitted_c = out.max_rel_error * static_cast<double>(t);
  return out;
}

// Rotated coordinates: east (+1,+1), west (-1,-1), north (+1,-1), south (-1,+1).
namespace {

inline Move move_from(bool up_u, bool up_v) {
  if (up_u) return up_v ? Move::east : Move::north;
  return up_v ? Move::south : Move::west;
}

// Uniform integer in [0, range) without bias (Lemire's multiply-shift with
// rejection).
inline std::uint64_t bounded(RngStream& rng, std::uint64_t range) {
  if (range <= (std::uint64_t{1} << 32)) {
    const std::uint64_t r32 = range;
    std::uint64_t m = std::uint64_t{rng.next_u32()} * r32;
    std::uint32_t low = static_cast<std::uint32_t>(m);
    if (low < r32) {
      const std::uint32_t thresh = static_cast<std::uint32_t>((std::uint64_t{1} << 32) % r32);
      while (low < thresh) {
        m = std::uint64_t{rng.next_u32()} * r32;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return m >> 32;
  }
  unsigned __int128 m = static_cast<unsigned __int128>(rng.next_u64()) * range;
  std::uint64_t low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t thresh = (0 - range) % range;
    while (low < thresh) {
      m = static_cast<unsigned __int128>(rng.next_u64()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// Exact Bernoulli((m + d) / (2m)).
inline bool bridge_coin(RngStream& rng, std::int64_t m, std::int64_t d) {
  if (d >= m) return true;
  if (d <= -m) return false;
  return bounded(rng, static_cast<std::uint64_t>(2 * m)) <
         static_cast<std::uint64_t>(m + d);
}

}  // namespace

WalkStepper::WalkStepper(const LatticePoint& start)
    : bridge_(false), u_(start.x + start.y), v_(start.x - start.y) {}

WalkStepper::WalkStepper(const LatticePoint& start, const LatticePoint& end,
                         std::int64_t n)
    : bridge_(true),
      u_(start.x + start.y),
      v_(start.x - start.y),
      tu_(end.x + end.y),
      tv_(end.x - end.y),
      remaining_(n) {
  if (!reachable(n, end - start))
    throw InvalidEndpoint("bridge endpoint not reachable in the given number of steps");
}

LatticePoint WalkStepper::position() const { return {(u_ + v_) / 2, (u_ - v_) / 2}; }

Move WalkStepper::step(RngStream& rng) {
  bool up_u, up_v;
  if (!bridge_) {
    const std::uint32_t w = rng.next_u32();
    up_u = (w & 1u) != 0;
    up_v = (w & 2u) != 0;
  } else {
    if (remaining_ <= 0) throw DomainError("bridge already complete");
    up_u = bridge_coin(rng, remaining_, tu_ - u_);
    up_v = bridge_coin(rng, remaining_, tv_ - v_);
    --remaining_;
  }
  u_ += up_u ? 1 : -1;
  v_ += up_v ? 1 : -1;
  ++time_;
  return move_from(up_u, up_v);
}

WalkPath sample_path(std::int64_t n, const LatticePoint& start, RngStream& rng) {
  if (n < 0) throw InvalidParameter("sample_path: negative length");
  WalkPath p{start, {}};
  p.steps.reserve(static_cast<std::size_t>(n));
  WalkStepper s(start);
  for (std::int64_t i = 0; i < n; ++i) p.steps.push_back(s.step(rng));
  return p;
}

WalkPath sample_bridge(std::int64_t n, const LatticePoint& start,
                       const LatticePoint& end, RngStream& rng) {
  if (n < 0) throw InvalidParameter("sample_bridge: negative length");
  WalkStepper s(start, end, n);
  WalkPath p{start, {}};
  p.steps.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) p.steps.push_back(s.step(rng));
  return p;
}

}  // namespace polymerlab
