#pragma once

#include <cmath>
#include <cstdint>

namespace polymerlab {

/// Count, mean and sum of squared deviations. merge() is the Chan et al.
/// pairwise update.
struct RunningMoments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  static RunningMoments merge(const RunningMoments& a, const RunningMoments& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    RunningMoments r;
    r.count = a.count + b.count;
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double n = static_cast<double>(r.count);
    const double d = b.mean - a.mean;
    r.mean = a.mean + d * nb / n;
    r.m2 = a.m2 + b.m2 + d * d * na * nb / n;
    return r;
  }

  double variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
  double std_error() const {
    return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

struct ProbabilityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t replicates = 0;
};

/// Compensated (Neumaier) sum.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace polymerlab
