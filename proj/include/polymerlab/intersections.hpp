#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "polymerlab/parallel.hpp"
#include "polymerlab/rng.hpp"
#include "polymerlab/schedule.hpp"
#include "polymerlab/stats.hpp"
#include "polymerlab/walk.hpp"

namespace polymerlab {

/// Index of pair (i, j), i < j, in lexicographic order over q walks.
inline int pair_index(int i, int j, int q) { return i * q - i * (i + 1) / 2 + (j - i - 1); }
std::vector<std::pair<int, int>> pair_list(int q);

struct EnsembleWindow {
  std::vector<WalkPath> paths;
  IntervalTk interval;
  /// Closed ball: a walk exits when |S_n| > ball_radius.
  double ball_radius = 0.0;
};

struct GreedyStep {
  std::int64_t tau = 0;
  int i = 0;
  int j = 0;
  friend bool operator==(const GreedyStep&, const GreedyStep&) = default;
};

struct IntersectionReport {
  int q0 = 0;
  /// Exit time per walk; empty means infinity.
  std::vector<std::optional<std::int64_t>> sigma;
  /// First guarded meeting time per pair (pair_index order); empty means infinity.
  std::vector<std::optional<std::int64_t>> tau_pairs;
  std::vector<GreedyStep> greedy;
  int R_k = 0;
  int R_tilde_k = 0;
};

/// Online version of analyze_window: feed the positions at every time of
/// the interval in increasing order.
class WindowTracker {
 public:
  WindowTracker(int q0, IntervalTk interval, double ball_radius, bool guarded = true,
                bool record_meetings = false);

  /// Positions at time n. Times outside the interval are ignored.
  void observe(std::int64_t n, const std::vector<LatticePoint>& pos);

  const IntersectionReport& report() const { return rep_; }
  /// All guarded meeting times per pair (only with record_meetings).
  const std::vector<std::vector<std::int64_t>>& meetings() const { return meet_; }

 private:
  IntervalTk interval_;
  double r2_;
  bool guarded_;
  bool record_;
  IntersectionReport rep_;
  std::vector<char> used_;
  std::vector<std::vector<std::int64_t>> meet_;
};

IntersectionReport analyze_window(const EnsembleWindow& w);

/// Largest family of index-disjoint pairs that can be met at distinct times
/// of the window (each pair at one of its own guarded meeting times).
/// Exhaustive; q0 above 12 raises CapacityError.
int max_disjoint_oracle(const EnsembleWindow& w);

/// Geometry of one block: times T_k inside a bridge of o_k steps, and the
/// guard ball.
struct PairWindow {
  IntervalTk interval;
  std::int64_t horizon = 0;
  double ball_radius = 0.0;
};

/// T_k, o_k and M l_k^{1/2} of block k.
PairWindow pair_window_from_schedule(const Schedule& s, const ParameterTuple& p, int k);

enum class PairVariant {
  conditioned,    // bridges to the endpoints, ball guard
  unconditioned,  // free walks, ball guard
  unguarded,      // bridges, no ball guard
};

/// P(tau^{(1,2)} < infinity) for two walks started at x[0], x[1].
ProbabilityEstimate estimate_pair_probability(const PairWindow& w,
                                              const std::array<LatticePoint, 2>& x,
                                              const std::array<LatticePoint, 2>& y,
                                              PairVariant variant, std::uint64_t replicates,
                                              const RngStream& rng,
                                              const ParallelRunner& runner = ParallelRunner(1));

struct TripleEstimate {
  ProbabilityEstimate triple;  // P(tau^{(1,2)} < inf, tau^{(1,3)} < inf)
  ProbabilityEstimate p12;
  ProbabilityEstimate p13;
  /// Standard errors of p12 - triple and p13 - triple (same replicates).
  double se_diff12 = 0.0;
  double se_diff13 = 0.0;
};

TripleEstimate estimate_triple_probability(const PairWindow& w,
                                           const std::array<LatticePoint, 3>& x,
                                           const std::array<LatticePoint, 3>& y,
                                           std::uint64_t replicates, const RngStream& rng,
                                           const ParallelRunner& runner = ParallelRunner(1));

struct ChenStein {
  double mu = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double bound = 0.0;  // 2 (e1 + e2)
};

/// Neighbourhood of a pair: every pair sharing an index, itself included.
/// joint is keyed by (pair index a, pair index b) with a < b and must cover
/// all neighbouring pairs; a missing entry raises IncompleteInput.
ChenStein chen_stein_bound(int q0, const std::vector<double>& pair_probs,
                           const std::map<std::pair<int, int>, double>& joint);

/// Half the L1 distance between the empirical law in counts and
/// Poisson(mu), including the Poisson mass beyond the histogram.
double tv_to_poisson(const std::vector<std::uint64_t>& counts, double mu);

struct PoissonConfig {
  int q0 = 0;
  PairWindow window;
  std::vector<LatticePoint> starts;
  std::vector<LatticePoint> ends;
};

struct PoissonReport {
  double mu = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double chen_stein_bound = 0.0;
  double empirical_tv = 0.0;
  std::uint64_t replicates = 0;
  std::vector<double> pair_probs;
  std::vector<std::uint64_t> hist_R_tilde;
  std::vector<std::uint64_t> hist_R;
  double mu_std_error = 0.0;
  /// Standard error of e1 + e2 by linearisation over replicates.
  double bound_terms_std_error = 0.0;
  /// Sampling noise of the empirical TV, (1/2) sum_k sqrt(p_k (1 - p_k) / n).
  double tv_noise = 0.0;
  /// Combined MC error of (TV - bound): 2 se(e1 + e2), tv_noise and se(mu)
  /// in quadrature.
  double propagated_error = 0.0;
};

PoissonReport poisson_experiment(const PoissonConfig& cfg, std::uint64_t replicates,
                                 const RngStream& rng,
                                 const ParallelRunner& runner = ParallelRunner(1));

/// Poisson report from stored replicate indicators: ind[r * P + a] is pair
/// a's indicator in replicate r; r_greedy holds R_k per replicate.
PoissonReport poisson_report_from_indicators(int q0, const std::vector<std::uint8_t>& ind,
                                             const std::vector<int>& r_greedy);

struct ConfinementStats {
  int q = 0;
  int K = 0;
  /// Mean |G_k| and frequency of A_k, k = 1..K (index k - 1).
  std::vector<double> mean_G_size;
  std::vector<double> frac_A;
  double D_N_estimate = 0.0;
  double D_N_std_error = 0.0;
  std::uint64_t replicates = 0;
};

/// Free walks from the origin observed at L_1..L_{K+1}. G_k holds the walks
/// with |S_{L_k}| <= delta^{-1} L_k^{1/2} and |S_{L_{k+1}}| <= delta^{-1}
/// L_{k+1}^{1/2}; A_k requires |G_k| >= (1 - eps0) q. Walk i of replicate r
/// uses rng.substream(r).substream(i).
ConfinementStats confinement_stats(const Schedule& s, int q, double delta, double eps0,
                                   std::uint64_t replicates, const RngStream& rng,
                                   const ParallelRunner& runner = ParallelRunner(1));

/// Displacement of an m-step walk in one rotated coordinate: 2 Bin(m, 1/2) - m.
std::int64_t sample_rotated_displacement(std::int64_t m, RngStream& rng);

}  // namespace polymerlab
