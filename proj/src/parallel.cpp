#include "clusterdyn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace clusterdyn {

void run_shards(std::size_t shards, int threads, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(shards, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t s = 0; s < shards; ++s) task(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t s = next.fetch_add(1);
      if (s >= shards) return;
      try {
        task(s);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(shards);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t shard_count(std::uint64_t work_items, std::uint64_t min_items_per_shard, std::size_t max_shards) {
  if (work_items == 0) return 1;
  const std::uint64_t by_size = (work_items + min_items_per_shard - 1) / min_items_per_shard;
  return static_cast<std::size_t>(std::clamp<std::uint64_t>(by_size, 1, max_shards));
}

std::pair<std::uint64_t, std::uint64_t> shard_range(std::uint64_t items, std::size_t shards, std::size_t s) {
  const std::uint64_t base = items / shards;
  const std::uint64_t extra = items % shards;
  const std::uint64_t begin = s * base + std::min<std::uint64_t>(s, extra);
  return {begin, begin + base + (s < extra ? 1 : 0)};
}

}  // namespace clusterdyn
