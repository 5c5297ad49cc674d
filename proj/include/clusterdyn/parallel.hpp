#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace clusterdyn {

// Runs task(shard) for every shard in [0, shards) on at most `threads`
// workers. The first exception thrown by any task is rethrown.
void run_shards(std::size_t shards, int threads, const std::function<void(std::size_t)>& task);

// Shard count depends only on the amount of work, never on the thread count,
// so reductions over shards are bit-identical for any --threads value.
std::size_t shard_count(std::uint64_t work_items, std::uint64_t min_items_per_shard = 256,
                        std::size_t max_shards = 64);

// [begin, end) of shard s when `items` are split into `shards` contiguous pieces.
std::pair<std::uint64_t, std::uint64_t> shard_range(std::uint64_t items, std::size_t shards, std::size_t s);

// Fixed pairwise tree over shard index.
template <class T, class Combine>
T pairwise_reduce(std::vector<T> parts, Combine combine) {
  if (parts.empty()) return T{};
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(combine(std::move(parts[i]), std::move(parts[i + 1])));
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

}  // namespace clusterdyn
