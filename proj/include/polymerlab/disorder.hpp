#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "polymerlab/parallel.hpp"
#include "polymerlab/rng.hpp"
#include "polymerlab/walk.hpp"

namespace polymerlab {

struct DisorderParams {
  double beta_hat = 0.0;
  std::int64_t N = 0;
  double R_N = 0.0;
  double beta_N = 0.0;
  /// -log(1 - beta_hat^2); empty when beta_hat >= 1.
  std::optional<double> lambda_sq;

  double beta_N_sq() const { return beta_N * beta_N; }
};

/// R_N = sum_{n=1}^N p_{2n}(0) with compensated summation.
double replica_overlap(std::int64_t N);

DisorderParams build_disorder(double beta_hat, std::int64_t N);

/// -log(1 - beta_hat^2 log(l_k) / log N). Throws DomainError when the
/// argument of the log is not positive.
double lambda_k_sq(const DisorderParams& params, std::int64_t l_k);

struct LocalTimePMF {
  std::int64_t horizon = 0;
  /// masses[k] = P(L_N = k) for k = 0..k_max.
  std::vector<double> masses;
  double truncation_tail = 0.0;
  /// P(first return to the origin of the doubled walk happens by time N).
  double return_probability = 0.0;

  std::int64_t k_max() const { return static_cast<std::int64_t>(masses.size()) - 1; }
  double mean() const;
  double total() const;
};

inline constexpr std::int64_t kExactBudget = 100000;

/// r_n = p_{2n}(0) for n = 0..N (r_0 = 1).
std::vector<double> return_masses(std::int64_t N);

/// First-return masses f_n, n = 0..N (f_0 = 0), from F = 1 - 1/U.
std::vector<double> first_return_masses(std::int64_t N);

/// Law of L_N = sum_{n=1}^N 1{S_{2n} = 0}, truncated once the remaining mass
/// drops below tail_cut.
LocalTimePMF local_time_pmf(std::int64_t N, double tail_cut = 1e-12);

struct ExactMoment {
  double value = 0.0;
  /// Upper bound on the mass dropped by truncation, after the e^{beta_N^2 k}
  /// tilt. Infinite when the geometric tail bound does not converge.
  double error_bound = 0.0;
  std::int64_t k_max = 0;
};

/// E[W_N^2] = E exp(beta_N^2 L_N). N above kExactBudget raises CapacityError.
ExactMoment exact_second_moment(const DisorderParams& params, double tail_cut = 1e-12);

struct MomentEstimate {
  int q = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t replicates = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

/// Monte Carlo E[W_N^q] = E exp(beta_N^2 sum_{i<j} sum_{n<=N} 1{S^i_n = S^j_n}).
/// Replicate r draws from rng.substream(r).
MomentEstimate mc_moment(const DisorderParams& params, int q, std::uint64_t replicates,
                         const RngStream& rng, const ParallelRunner& runner = ParallelRunner(1));

struct MomentLadder {
  int q = 0;
  double beta_hat = 0.0;
  std::vector<std::int64_t> horizons;
  std::vector<MomentEstimate> estimates;
  /// Covariance of the estimators, estimates[i] vs estimates[j].
  std::vector<std::vector<double>> covariance;
  bool control_variate = false;
  /// Variance reduction factor per horizon (1 without control variate).
  std::vector<double> variance_ratio;
};

/// E[W_N^q] at several horizons from one set of walks: replicate r runs to
/// the largest horizon and its count up to each N_i is weighted with that
/// N_i's beta_N. Paired estimates make differences across N resolvable.
///
/// With control_variate, the mean pair weight exp(beta_N^2 c_ij), whose
/// expectation is the exact E[W_N^2], is used as a regression control
/// (requires every horizon within kExactBudget).
MomentLadder mc_moment_ladder(double beta_hat, std::vector<std::int64_t> horizons, int q,
                              std::uint64_t replicates, const RngStream& rng,
                              const ParallelRunner& runner = ParallelRunner(1),
                              bool control_variate = false);

/// exp(lambda^2 C(q, 2)). Throws DomainError when beta_hat >= 1.
double subcritical_prediction(const DisorderParams& params, int q);

/// beta_N^2 (N/2) C(q,2) - q floor(N/2) log 4.
double qlarge_lower_bound_log(const DisorderParams& params, int q);

/// Two bridges of `horizon` steps from meet_point to end1 / end2;
/// E exp(beta_sq sum_{n=1}^l 1{S^1_n = S^2_n}).
MomentEstimate estimate_pair_exp_moment(std::int64_t l, std::int64_t horizon,
                                        const LatticePoint& meet_point,
                                        const LatticePoint& end1, const LatticePoint& end2,
                                        double beta_sq, std::uint64_t replicates,
                                        const RngStream& rng,
                                        const ParallelRunner& runner = ParallelRunner(1));

/// Number of coincidences among q sites: sum over equal groups of m(m-1)/2.
/// keys is reordered.
std::int64_t count_coincidences(std::vector<std::uint64_t>& keys);

/// Packs rotated coordinates into a sortable key.
inline std::uint64_t site_key(std::int64_t u, std::int64_t v) {
  return (static_cast<std::uint64_t>(u + (std::int64_t{1} << 31)) << 32) ^
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(v + (std::int64_t{1} << 31)));
}

}  // namespace polymerlab
