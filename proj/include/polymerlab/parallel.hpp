#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace polymerlab {

/// Fixed-size worker pool used by the Monte Carlo drivers.
///
/// Work is cut into blocks whose size does not depend on the thread count.
/// Block results are stored by index and merged in a fixed tree order, so
/// every reduction is bitwise identical for any number of threads.
class ParallelRunner {
 public:
  /// threads == 0 picks the default (POLYMERLAB_THREADS, else hardware).
  explicit ParallelRunner(unsigned threads = 0);

  unsigned threads() const { return threads_; }

  /// Calls body(b) for every b in [0, n_blocks), spread over the pool.
  /// The first exception thrown by any block is rethrown here.
  void for_each_block(std::size_t n_blocks,
                      const std::function<void(std::size_t)>& body) const;

  static unsigned default_threads();

 private:
  unsigned threads_;
};

inline constexpr std::uint64_t kReplicateBlock = 256;

/// Pairwise merge of block results in a fixed order.
template <class T, class Merge>
T tree_reduce(std::vector<T> parts, Merge merge) {
  if (parts.empty()) return T{};
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
      next.push_back(merge(parts[i], parts[i + 1]));
    if (parts.size() % 2 == 1) next.push_back(parts.back());
    parts = std::move(next);
  }
  return parts.front();
}

/// Runs per_block(begin, end) over replicate ranges of kReplicateBlock and
/// tree-merges the results.
template <class T, class PerBlock, class Merge>
T map_reduce_replicates(const ParallelRunner& runner, std::uint64_t replicates,
                        PerBlock per_block, Merge merge) {
  const std::size_t n_blocks =
      static_cast<std::size_t>((replicates + kReplicateBlock - 1) / kReplicateBlock);
  std::vector<T> parts(n_blocks);
  runner.for_each_block(n_blocks, [&](std::size_t b) {
    const std::uint64_t begin = b * kReplicateBlock;
    const std::uint64_t end = std::min<std::uint64_t>(replicates, begin + kReplicateBlock);
    parts[b] = per_block(begin, end);
  });
  return tree_reduce(std::move(parts), merge);
}

}  // namespace polymerlab
