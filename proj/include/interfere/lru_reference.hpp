#pragma once

#include <algorithm>
#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "interfere/geometry.hpp"
#include "interfere/patterns.hpp"

namespace interfere {

// Brute-force LRU oracle. Shares nothing with SharedCache: the set is taken as
// line number modulo the total set count, which partitions lines exactly like
// the contiguous bank and set fields do, and each set is a recency list.
inline std::vector<std::uint8_t> lru_reference(std::span<const AccessEvent> trace, const CacheGeometry& g) {
  validate_geometry(g);
  const std::uint64_t n_sets = g.num_banks * g.sets_per_bank;
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>> sets;  // front = most recent
  std::vector<std::uint8_t> hits;
  hits.reserve(trace.size());
  for (const auto& e : trace) {
    const std::uint64_t line = e.address / g.line_size;
    auto& rec = sets[line % n_sets];
    auto it = std::find(rec.begin(), rec.end(), line);
    if (it != rec.end()) {
      rec.splice(rec.begin(), rec, it);
      hits.push_back(1);
    } else {
      rec.push_front(line);
      if (rec.size() > g.associativity) rec.pop_back();
      hits.push_back(0);
    }
  }
  return hits;
}

}  // namespace interfere
