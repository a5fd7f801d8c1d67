#include "polymerlab/disorder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "polymerlab/error.hpp"
#include "polymerlab/series.hpp"
#include "polymerlab/stats.hpp"

namespace polymerlab {

double replica_overlap(std::int64_t N) {
  KahanSum s;
  for (std::int64_t n = 1; n <= N; ++n) s.add(std::exp(2.0 * log_binomial_half(2 * n, 0)));
  return s.value();
}

DisorderParams build_disorder(double beta_hat, std::int64_t N) {
  if (!(beta_hat > 0.0) || !std::isfinite(beta_hat))
    throw InvalidParameter("beta_hat must be positive");
  if (N < 1) throw InvalidParameter("N must be >= 1");
  DisorderParams p;
  p.beta_hat = beta_hat;
  p.N = N;
  p.R_N = replica_overlap(N);
  p.beta_N = beta_hat / std::sqrt(p.R_N);
  if (beta_hat < 1.0) p.lambda_sq = -std::log1p(-beta_hat * beta_hat);
  return p;
}

double lambda_k_sq(const DisorderParams& params, std::int64_t l_k) {
  if (l_k < 1 || l_k > params.N) throw DomainError("lambda_k_sq: need 1 <= l_k <= N");
  if (params.N < 2) throw DomainError("lambda_k_sq: need N >= 2");
  const double x = params.beta_hat * params.beta_hat * std::log(static_cast<double>(l_k)) /
                   std::log(static_cast<double>(params.N));
  if (x >= 1.0) throw DomainError("lambda_k_sq: beta_hat too large for this scale");
  return -std::log1p(-x);
}

double LocalTimePMF::mean() const {
  KahanSum s;
  for (std::size_t k = 1; k < masses.size(); ++k) s.add(static_cast<double>(k) * masses[k]);
  return s.value();
}

double LocalTimePMF::total() const {
  KahanSum s;
  for (double m : masses) s.add(m);
  return s.value();
}

std::vector<double> return_masses(std::int64_t N) {
  std::vector<double> r(static_cast<std::size_t>(N) + 1);
  r[0] = 1.0;
  for (std::int64_t n = 1; n <= N; ++n)
    r[static_cast<std::size_t>(n)] = std::exp(2.0 * log_binomial_half(2 * n, 0));
  return r;
}

std::vector<double> first_return_masses(std::int64_t N) {
  const auto r = return_masses(N);
  auto g = series_inverse(r, r.size());
  std::vector<double> f(g.size());
  f[0] = 0.0;
  for (std::size_t n = 1; n < g.size(); ++n) f[n] = -g[n];
  return f;
}

namespace {

// Truncation stops once the dropped tail, tilted by e^{theta k}, is below
// tail_cut. theta = 0 gives the plain mass criterion.
LocalTimePMF compute_pmf(std::int64_t N, double tail_cut, double theta) {
  if (N < 1) throw InvalidParameter("local_time_pmf: N must be >= 1");
  if (!(tail_cut > 0.0) || tail_cut > 1e-6)
    throw InvalidParameter("local_time_pmf: tail_cut must lie in (0, 1e-6]");
  if (N > kExactBudget)
    throw CapacityError("local_time_pmf: N = " + std::to_string(N) + " exceeds the exact budget " +
                        std::to_string(kExactBudget) + "; use Monte Carlo");
  const auto f = first_return_masses(N);
  const std::size_t len = static_cast<std::size_t>(N) + 1;

  auto mass = [](const std::vector<double>& c) {
    KahanSum s;
    for (double x : c) s.add(x);
    return std::clamp(s.value(), 0.0, 1.0);
  };

  LocalTimePMF pmf;
  pmf.horizon = N;
  // at_least[k] = P(L_N >= k) = P(k-th return by time N) = sum_n f^{*k}(n).
  std::vector<double> at_least{1.0};
  std::vector<double> c = f;
  pmf.return_probability = mass(c);
  const double ratio = pmf.return_probability * std::exp(theta);
  const double geom = (theta == 0.0) ? 1.0 : (ratio < 1.0 ? 1.0 / (1.0 - ratio) : HUGE_VAL);
  TruncatedConvolver conv(f, len);
  for (std::int64_t k = 1;; ++k) {
    const double p = std::min(mass(c), at_least.back());
    at_least.push_back(p);
    if (k == N || p == 0.0) break;
    if (p * std::exp(theta * static_cast<double>(k)) * geom < tail_cut) break;
    c = conv.apply(c);
  }
  // P(L >= k_last) is either negligible or k_last = N, the maximal count.
  const std::size_t kl = at_least.size() - 1;
  const bool complete = static_cast<std::int64_t>(kl) == N || at_least[kl] == 0.0;
  const std::size_t kmax = (complete && at_least[kl] > 0.0) ? kl : kl - 1;
  pmf.masses.resize(kmax + 1);
  for (std::size_t k = 0; k <= kmax; ++k) {
    const double next = (k + 1 < at_least.size()) ? at_least[k + 1] : 0.0;
    pmf.masses[k] = std::max(0.0, at_least[k] - next);
  }
  pmf.truncation_tail = complete ? 0.0 : at_least[kl];
  return pmf;
}

}  // namespace

LocalTimePMF local_time_pmf(std::int64_t N, double tail_cut) {
  return compute_pmf(N, tail_cut, 0.0);
}

ExactMoment exact_second_moment(const DisorderParams& params, double tail_cut) {
  if (params.N > kExactBudget)
    throw CapacityError("exact_second_moment: N = " + std::to_string(params.N) +
                        " exceeds the exact budget " + std::to_string(kExactBudget) +
                        "; use mc_moment");
  const double theta = params.beta_N_sq();
  const auto pmf = compute_pmf(params.N, tail_cut, theta);
  KahanSum s;
  for (std::size_t k = 0; k < pmf.masses.size(); ++k)
    s.add(pmf.masses[k] * std::exp(theta * static_cast<double>(k)));
  ExactMoment out;
  out.value = s.value();
  out.k_max = pmf.k_max();
  if (pmf.truncation_tail == 0.0) {
    out.error_bound = 0.0;
  } else {
    // P(L >= k + j) <= P(L >= k) rho^j by the strong Markov property.
    const double ratio = pmf.return_probability * std::exp(theta);
    out.error_bound = ratio < 1.0
                          ? pmf.truncation_tail * std::exp(theta * (out.k_max + 1)) / (1.0 - ratio)
                          : std::numeric_limits<double>::infinity();
  }
  return out;
}

std::int64_t count_coincidences(std::vector<std::uint64_t>& keys) {
  const std::size_t q = keys.size();
  std::int64_t c = 0;
  if (q <= 8) {
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = i + 1; j < q; ++j) c += keys[i] == keys[j];
    return c;
  }
  std::sort(keys.begin(), keys.end());
  std::size_t i = 0;
  while (i < q) {
    std::size_t j = i + 1;
    while (j < q && keys[j] == keys[i]) ++j;
    const auto m = static_cast<std::int64_t>(j - i);
    c += m * (m - 1) / 2;
    i = j;
  }
  return c;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Total pairwise coincidence count of q free walks from the origin over
// times 1..N. Two random bits per walk step.
std::int64_t q_walk_coincidences(std::int64_t N, int q, RngStream& rng,
                                 std::vector<std::int64_t>& u, std::vector<std::int64_t>& v,
                                 std::vector<std::uint64_t>& keys) {
  std::fill(u.begin(), u.end(), 0);
  std::fill(v.begin(), v.end(), 0);
  std::uint64_t bits = 0;
  int left = 0;
  std::int64_t total = 0;
  for (std::int64_t n = 1; n <= N; ++n) {
    for (int i = 0; i < q; ++i) {
      if (left == 0) {
        bits = rng.next_u64();
        left = 32;
      }
      u[i] += (bits & 1u) ? 1 : -1;
      v[i] += (bits & 2u) ? 1 : -1;
      bits >>= 2;
      --left;
    }
    if (q == 2) {
      total += (u[0] == u[1] && v[0] == v[1]);
    } else {
      for (int i = 0; i < q; ++i) keys[i] = site_key(u[i], v[i]);
      total += count_coincidences(keys);
    }
  }
  return total;
}

}  // namespace

MomentEstimate mc_moment(const DisorderParams& params, int q, std::uint64_t replicates,
                         const RngStream& rng, const ParallelRunner& runner) {
  if (q < 1) throw InvalidParameter("mc_moment: q must be >= 1");
  if (replicates < 2) throw InvalidParameter("mc_moment: need at least 2 replicates");
  const auto t0 = std::chrono::steady_clock::now();
  const double theta = params.beta_N_sq();
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    RunningMoments acc;
    std::vector<std::int64_t> u(q), v(q);
    std::vector<std::uint64_t> keys(q);
    for (std::uint64_t r = begin; r < end; ++r) {
      if (q == 1) {
        acc.push(1.0);
        continue;
      }
      RngStream s = rng.substream(r);
      const std::int64_t c = q_walk_coincidences(params.N, q, s, u, v, keys);
      acc.push(std::exp(theta * static_cast<double>(c)));
    }
    return acc;
  };
  const RunningMoments m =
      map_reduce_replicates<RunningMoments>(runner, replicates, block, RunningMoments::merge);
  MomentEstimate e;
  e.q = q;
  e.estimate = m.mean;
  e.std_error = m.std_error();
  e.replicates = replicates;
  e.seed = rng.seed();
  e.wall_time = seconds_since(t0);
  return e;
}

namespace {

// Sums of x_i and of x_i x_j over a block, merged pairwise.
struct CrossMoments {
  std::uint64_t count = 0;
  std::vector<double> mean;
  std::vector<double> co;  // k x k co-moment, row major

  void push(const std::vector<double>& x) {
    const std::size_t k = x.size();
    if (mean.empty()) {
      mean.assign(k, 0.0);
      co.assign(k * k, 0.0);
    }
    ++count;
    const double n = static_cast<double>(count);
    std::vector<double> d(k);
    for (std::size_t i = 0; i < k; ++i) d[i] = x[i] - mean[i];
    for (std::size_t i = 0; i < k; ++i) mean[i] += d[i] / n;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) co[i * k + j] += d[i] * (x[j] - mean[j]);
  }

  static CrossMoments merge(const CrossMoments& a, const CrossMoments& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    const std::size_t k = a.mean.size();
    CrossMoments r;
    r.count = a.count + b.count;
    const double na = static_cast<double>(a.count), nb = static_cast<double>(b.count);
    const double n = static_cast<double>(r.count);
    r.mean.resize(k);
    r.co.resize(k * k);
    for (std::size_t i = 0; i < k; ++i) r.mean[i] = a.mean[i] + (b.mean[i] - a.mean[i]) * nb / n;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        r.co[i * k + j] = a.co[i * k + j] + b.co[i * k + j] +
                          (b.mean[i] - a.mean[i]) * (b.mean[j] - a.mean[j]) * na * nb / n;
    return r;
  }
};

}  // namespace

MomentLadder mc_moment_ladder(double beta_hat, std::vector<std::int64_t> horizons, int q,
                              std::uint64_t replicates, const RngStream& rng,
                              const ParallelRunner& runner, bool control_variate) {
  if (horizons.empty()) throw InvalidParameter("mc_moment_ladder: no horizons");
  if (q < 2) throw InvalidParameter("mc_moment_ladder: q must be >= 2");
  if (replicates < 2) throw InvalidParameter("mc_moment_ladder: need at least 2 replicates");
  std::sort(horizons.begin(), horizons.end());
  horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
  if (horizons.front() < 1) throw InvalidParameter("mc_moment_ladder: horizons must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t k = horizons.size();
  std::vector<double> theta(k);
  for (std::size_t i = 0; i < k; ++i) theta[i] = build_disorder(beta_hat, horizons[i]).beta_N_sq();
  const std::int64_t nmax = horizons.back();

  const int pairs = q * (q - 1) / 2;
  std::vector<double> exact2(k, 0.0);
  if (control_variate)
    for (std::size_t i = 0; i < k; ++i)
      exact2[i] = exact_second_moment(build_disorder(beta_hat, horizons[i])).value;
  const std::size_t width = control_variate ? 2 * k : k;

  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    CrossMoments acc;
    std::vector<std::int64_t> u(q), v(q);
    std::vector<std::uint64_t> keys(q);
    std::vector<std::int64_t> per_pair(pairs);
    std::vector<double> w(width);
    for (std::uint64_t r = begin; r < end; ++r) {
      RngStream s = rng.substream(r);
      std::fill(u.begin(), u.end(), 0);
      std::fill(v.begin(), v.end(), 0);
      std::fill(per_pair.begin(), per_pair.end(), 0);
      std::uint64_t bits = 0;
      int left = 0;
      std::int64_t total = 0;
      std::size_t next = 0;
      for (std::int64_t n = 1; n <= nmax; ++n) {
        for (int i = 0; i < q; ++i) {
          if (left == 0) {
            bits = s.next_u64();
            left = 32;
          }
          u[i] += (bits & 1u) ? 1 : -1;
          v[i] += (bits & 2u) ? 1 : -1;
          bits >>= 2;
          --left;
        }
        if (control_variate) {
          int idx = 0;
          for (int i = 0; i < q; ++i)
            for (int j = i + 1; j < q; ++j, ++idx) {
              const bool hit = u[i] == u[j] && v[i] == v[j];
              per_pair[idx] += hit;
              total += hit;
            }
        } else {
          for (int i = 0; i < q; ++i) keys[i] = site_key(u[i], v[i]);
          total += count_coincidences(keys);
        }
        while (next < k && horizons[next] == n) {
          w[next] = std::exp(theta[next] * static_cast<double>(total));
          if (control_variate) {
            double y = 0.0;
            for (int a = 0; a < pairs; ++a) y += std::exp(theta[next] * static_cast<double>(per_pair[a]));
            w[k + next] = y / pairs;
          }
          ++next;
        }
      }
      acc.push(w);
    }
    return acc;
  };
  const CrossMoments m =
      map_reduce_replicates<CrossMoments>(runner, replicates, block, CrossMoments::merge);
  MomentLadder out;
  out.q = q;
  out.beta_hat = beta_hat;
  out.horizons = horizons;
  out.control_variate = control_variate;
  const double n = static_cast<double>(m.count);
  // Covariance of the replicate means.
  auto cov = [&](std::size_t i, std::size_t j) { return m.co[i * width + j] / (n - 1) / n; };
  std::vector<double> b(k, 0.0), mean(k);
  for (std::size_t i = 0; i < k; ++i) {
    mean[i] = m.mean[i];
    if (control_variate && cov(k + i, k + i) > 0.0) {
      b[i] = cov(i, k + i) / cov(k + i, k + i);
      mean[i] -= b[i] * (m.mean[k + i] - exact2[i]);
    }
  }
  out.covariance.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double c = cov(i, j);
      if (control_variate)
        c += -b[j] * cov(i, k + j) - b[i] * cov(k + i, j) + b[i] * b[j] * cov(k + i, k + j);
      out.covariance[i][j] = c;
    }
  const double wall = seconds_since(t0);
  for (std::size_t i = 0; i < k; ++i) {
    MomentEstimate e;
    e.q = q;
    e.estimate = mean[i];
    e.std_error = std::sqrt(std::max(0.0, out.covariance[i][i]));
    e.replicates = replicates;
    e.seed = rng.seed();
    e.wall_time = wall;
    out.estimates.push_back(e);
    out.variance_ratio.push_back(cov(i, i) > 0 ? out.covariance[i][i] / cov(i, i) : 1.0);
  }
  return out;
}

double subcritical_prediction(const DisorderParams& params, int q) {
  if (!params.lambda_sq) throw DomainError("subcritical_prediction: needs beta_hat < 1");
  const double pairs = 0.5 * q * (q - 1.0);
  return std::exp(*params.lambda_sq * pairs);
}

double qlarge_lower_bound_log(const DisorderParams& params, int q) {
  if (q < 2) throw InvalidParameter("qlarge_lower_bound_log: q must be >= 2");
  const double half = static_cast<double>(params.N / 2);
  const double pairs = 0.5 * q * (q - 1.0);
  return params.beta_N_sq() * (static_cast<double>(params.N) / 2.0) * pairs -
         q * half * std::log(4.0);
}

MomentEstimate estimate_pair_exp_moment(std::int64_t l, std::int64_t horizon,
                                        const LatticePoint& meet_point,
                                        const LatticePoint& end1, const LatticePoint& end2,
                                        double beta_sq, std::uint64_t replicates,
                                        const RngStream& rng, const ParallelRunner& runner) {
  if (l < 0 || l > horizon) throw InvalidParameter("estimate_pair_exp_moment: need 0 <= l <= horizon");
  if (replicates < 2) throw InvalidParameter("estimate_pair_exp_moment: need at least 2 replicates");
  if (!reachable(horizon, end1 - meet_point) || !reachable(horizon, end2 - meet_point))
    throw InvalidEndpoint("estimate_pair_exp_moment: endpoint not reachable from meet_point");
  const auto t0 = std::chrono::steady_clock::now();
  auto block = [&](std::uint64_t begin, std::uint64_t end) {
    RunningMoments acc;
    for (std::uint64_t r = begin; r < end; ++r) {
      RngStream s = rng.substream(r);
      WalkStepper a(meet_point, end1, horizon);
      WalkStepper b(meet_point, end2, horizon);
      std::int64_t c = 0;
      for (std::int64_t n = 1; n <= l; ++n) {
        a.step(s);
        b.step(s);
        c += (a.u() == b.u() && a.v() == b.v());
      }
      acc.push(beta_sq == 0.0 ? 1.0 : std::exp(beta_sq * static_cast<double>(c)));
    }
    return acc;
  };
  const RunningMoments m =
      map_reduce_replicates<RunningMoments>(runner, replicates, block, RunningMoments::merge);
  MomentEstimate e;
  e.q = 2;
  e.estimate = m.mean;
  e.std_error = m.std_error();
  e.replicates = replicates;
  e.seed = rng.seed();
  e.wall_time = seconds_since(t0);
  return e;
}

}  // namespace polymerlab
