#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "interfere/error.hpp"
#include "interfere/geometry.hpp"

namespace interfere {

enum class Op : std::uint8_t { read, write };
enum class OpMix : std::uint8_t { read_only, write_only, alternating };
enum class StreamKind : std::uint8_t { copy, scale, add, triad };

inline constexpr std::uint64_t kKiB = 1024;
inline constexpr std::uint64_t kMiB = 1024 * kKiB;

// Arenas and the arrays inside them are packed on page boundaries.
inline constexpr std::uint64_t kArenaAlign = 4096;

constexpr std::uint64_t round_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

// Private array of arena_bytes walked with a fixed stride, wrapping at the end.
struct StridedWalk {
  std::uint64_t arena_bytes = 0;
  std::uint64_t stride_bytes = 0;
  OpMix op_mix = OpMix::read_only;
  friend bool operator==(const StridedWalk&, const StridedWalk&) = default;
};

// Walk over an arena shared by several threads of one workload, each
// starting at its own offset.
struct SharedWalk {
  std::string arena;
  std::uint64_t arena_bytes = 0;
  std::uint64_t stride_bytes = 0;
  std::uint64_t start_offset = 0;
  OpMix op_mix = OpMix::read_only;
  friend bool operator==(const SharedWalk&, const SharedWalk&) = default;
};

// One of the four STREAM vector kernels over disjoint arrays a, b, c.
struct StreamKernel {
  StreamKind kind = StreamKind::triad;
  std::uint64_t n_elems = 0;
  std::uint64_t elem_bytes = 8;
  std::uint64_t repetitions = 1;
  friend bool operator==(const StreamKernel&, const StreamKernel&) = default;
};

// Memory model of an integer bucket sort of 32-bit keys.
struct BucketSort {
  std::uint64_t n_keys = 0;
  std::uint64_t n_buckets = 10;
  std::uint64_t iterations = 10;
  std::uint64_t seed = 0;
  friend bool operator==(const BucketSort&, const BucketSort&) = default;
};

using PatternSpec = std::variant<StridedWalk, SharedWalk, StreamKernel, BucketSort>;

struct ThreadSpec {
  PatternSpec pattern;
  addr_t arena_base = 0;
  std::optional<int> cpu_hint;
  friend bool operator==(const ThreadSpec&, const ThreadSpec&) = default;
};

struct WorkloadSpec {
  std::string name;
  std::vector<ThreadSpec> threads;
  std::map<std::string, addr_t> shared_arenas;
  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

struct AccessEvent {
  std::uint32_t thread = 0;
  addr_t address = 0;
  Op op = Op::read;
  std::uint64_t seq = 0;
  friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

inline const char* to_string(Op op) { return op == Op::read ? "read" : "write"; }

inline const char* to_string(OpMix m) {
  switch (m) {
    case OpMix::read_only: return "read-only";
    case OpMix::write_only: return "write-only";
    case OpMix::alternating: return "read-write";
  }
  return "?";
}

inline const char* to_string(StreamKind k) {
  switch (k) {
    case StreamKind::copy: return "copy";
    case StreamKind::scale: return "scale";
    case StreamKind::add: return "add";
    case StreamKind::triad: return "triad";
  }
  return "?";
}

inline OpMix parse_op_mix(std::string_view s) {
  if (s == "read-only") return OpMix::read_only;
  if (s == "write-only") return OpMix::write_only;
  if (s == "read-write") return OpMix::alternating;
  throw ConfigError("unknown op_mix '" + std::string(s) + "'");
}

inline StreamKind parse_stream_kind(std::string_view s) {
  if (s == "copy") return StreamKind::copy;
  if (s == "scale") return StreamKind::scale;
  if (s == "add") return StreamKind::add;
  if (s == "triad") return StreamKind::triad;
  throw ConfigError("unknown stream kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Layout helpers

namespace stream_layout {

inline std::uint64_t array_span(const StreamKernel& k) {
  return round_up(k.n_elems * k.elem_bytes, kArenaAlign);
}
// Arrays a, b, c in this order from the arena base.
inline addr_t offset_a(const StreamKernel&) { return 0; }
inline addr_t offset_b(const StreamKernel& k) { return array_span(k); }
inline addr_t offset_c(const StreamKernel& k) { return 2 * array_span(k); }

struct KernelOp {
  int array;  // 0 = a, 1 = b, 2 = c
  Op op;
};

inline std::vector<KernelOp> ops(StreamKind kind) {
  switch (kind) {
    case StreamKind::copy: return {{0, Op::read}, {2, Op::write}};
    case StreamKind::scale: return {{2, Op::read}, {1, Op::write}};
    case StreamKind::add: return {{0, Op::read}, {1, Op::read}, {2, Op::write}};
    case StreamKind::triad: return {{1, Op::read}, {2, Op::read}, {0, Op::write}};
  }
  return {};
}

// Bytes moved per element by one kernel pass.
inline std::uint64_t bytes_per_elem(StreamKind kind, std::uint64_t elem_bytes = 8) {
  return ops(kind).size() * elem_bytes;
}

}  // namespace stream_layout

namespace sort_layout {

inline constexpr std::uint64_t kKeyBytes = 4;

inline addr_t offset_keys(const BucketSort&) { return 0; }
inline addr_t offset_counters(const BucketSort& s) {
  return round_up(s.n_keys * kKeyBytes, kArenaAlign);
}
inline addr_t offset_output(const BucketSort& s) {
  return offset_counters(s) + round_up(s.n_buckets * kKeyBytes, kArenaAlign);
}

// Counter-based generator so any key can be recomputed without storing the array.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint32_t key_at(std::uint64_t seed, std::uint64_t i) {
  return static_cast<std::uint32_t>(splitmix64(splitmix64(seed) ^ i) >> 32);
}

// Range partition of the 32-bit key space, so buckets are ordered.
inline std::uint64_t bucket_of(std::uint32_t key, std::uint64_t n_buckets) {
  return (static_cast<std::uint64_t>(key) * n_buckets) >> 32;
}

// Exclusive prefix sum of bucket populations.
inline std::vector<std::uint64_t> bucket_starts(const BucketSort& s) {
  std::vector<std::uint64_t> count(s.n_buckets, 0);
  for (std::uint64_t i = 0; i < s.n_keys; ++i) ++count[bucket_of(key_at(s.seed, i), s.n_buckets)];
  std::vector<std::uint64_t> start(s.n_buckets, 0);
  for (std::uint64_t b = 1; b < s.n_buckets; ++b) start[b] = start[b - 1] + count[b - 1];
  return start;
}

// Events in one sort iteration: key read + counter write, prefix, key read + permuted write.
inline std::uint64_t events_per_iteration(const BucketSort& s) {
  return 2 * s.n_keys + s.n_buckets + 2 * s.n_keys;
}

}  // namespace sort_layout

inline std::uint64_t arena_bytes(const PatternSpec& p) {
  return std::visit(
      [](const auto& v) -> std::uint64_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, StridedWalk> || std::is_same_v<T, SharedWalk>) {
          return v.arena_bytes;
        } else if constexpr (std::is_same_v<T, StreamKernel>) {
          return 3 * stream_layout::array_span(v);
        } else {
          return sort_layout::offset_output(v) + round_up(v.n_keys * sort_layout::kKeyBytes, kArenaAlign);
        }
      },
      p);
}

// Events in one full pass: one sweep of a walk, one kernel repetition, one sort iteration.
inline std::uint64_t pass_length(const PatternSpec& p) {
  return std::visit(
      [](const auto& v) -> std::uint64_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, StridedWalk> || std::is_same_v<T, SharedWalk>) {
          return v.stride_bytes ? v.arena_bytes / v.stride_bytes : 0;
        } else if constexpr (std::is_same_v<T, StreamKernel>) {
          return v.n_elems * stream_layout::ops(v.kind).size();
        } else {
          return sort_layout::events_per_iteration(v);
        }
      },
      p);
}

// Total events the pattern produces; walks never end.
inline std::uint64_t natural_length(const PatternSpec& p) {
  constexpr auto kForever = std::numeric_limits<std::uint64_t>::max();
  if (const auto* k = std::get_if<StreamKernel>(&p)) return pass_length(p) * k->repetitions;
  if (const auto* s = std::get_if<BucketSort>(&p)) return pass_length(p) * s->iterations;
  return kForever;
}

struct Interval {
  addr_t base = 0;
  std::uint64_t bytes = 0;
  addr_t end() const { return base + bytes; }
};

inline bool overlaps(const Interval& a, const Interval& b) {
  return a.bytes && b.bytes && a.base < b.end() && b.base < a.end();
}

// Every address range the workload may touch: private arenas, then shared ones.
inline std::vector<Interval> arenas_of(const WorkloadSpec& w) {
  std::vector<Interval> out;
  for (const auto& t : w.threads)
    if (!std::holds_alternative<SharedWalk>(t.pattern))
      out.push_back({t.arena_base, arena_bytes(t.pattern)});
  std::map<std::string, std::uint64_t> shared_size;
  for (const auto& t : w.threads)
    if (const auto* s = std::get_if<SharedWalk>(&t.pattern))
      shared_size[s->arena] = std::max(shared_size[s->arena], s->arena_bytes);
  for (const auto& [id, bytes] : shared_size) {
    auto it = w.shared_arenas.find(id);
    if (it != w.shared_arenas.end()) out.push_back({it->second, bytes});
  }
  return out;
}

inline bool any_overlap(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.base < b.base; });
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i].bytes && v[i - 1].bytes && v[i].base < v[i - 1].end()) return true;
  return false;
}

// Structural checks; line_size is the granularity walks must respect.
inline void validate_workload(const WorkloadSpec& w, std::uint64_t line_size = 64) {
  const std::string who = "workload '" + w.name + "'";
  std::map<std::string, std::uint64_t> shared_size;
  for (std::size_t i = 0; i < w.threads.size(); ++i) {
    const auto& t = w.threads[i];
    const std::string th = who + " thread " + std::to_string(i);
    if (t.arena_base % line_size) throw ConfigError(th + ": arena_base not line-aligned");
    if (t.cpu_hint && *t.cpu_hint < 0) throw ConfigError(th + ": negative cpu_hint");
    if (const auto* s = std::get_if<StridedWalk>(&t.pattern)) {
      if (s->stride_bytes < line_size) throw ConfigError(th + ": stride smaller than a line");
      if (s->arena_bytes == 0 || s->arena_bytes % s->stride_bytes)
        throw ConfigError(th + ": arena_bytes must be a positive multiple of stride_bytes");
    } else if (const auto* s = std::get_if<SharedWalk>(&t.pattern)) {
      if (s->stride_bytes < line_size) throw ConfigError(th + ": stride smaller than a line");
      if (s->arena_bytes == 0 || s->arena_bytes % s->stride_bytes)
        throw ConfigError(th + ": arena_bytes must be a positive multiple of stride_bytes");
      if (s->start_offset >= s->arena_bytes || s->start_offset % line_size)
        throw ConfigError(th + ": start_offset must be line-aligned and inside the arena");
      auto it = w.shared_arenas.find(s->arena);
      if (it == w.shared_arenas.end()) throw ConfigError(th + ": unknown shared arena '" + s->arena + "'");
      if (it->second != t.arena_base)
        throw ConfigError(th + ": arena_base differs from shared arena '" + s->arena + "'");
      auto [pos, fresh] = shared_size.emplace(s->arena, s->arena_bytes);
      if (!fresh && pos->second != s->arena_bytes)
        throw ConfigError(who + ": threads disagree on size of shared arena '" + s->arena + "'");
    } else if (const auto* k = std::get_if<StreamKernel>(&t.pattern)) {
      if (k->elem_bytes == 0) throw ConfigError(th + ": elem_bytes must be positive");
    } else if (const auto* b = std::get_if<BucketSort>(&t.pattern)) {
      if (b->n_buckets < 1) throw ConfigError(th + ": n_buckets must be >= 1");
    }
  }
  for (const auto& [id, base] : w.shared_arenas)
    if (base % line_size) throw ConfigError(who + ": shared arena '" + id + "' not line-aligned");
  if (any_overlap(arenas_of(w))) throw ConfigError(who + ": arenas overlap");
}

// ---------------------------------------------------------------------------
// Generators

struct OffchipOptions {
  std::uint64_t array_bytes = 2 * kMiB;
  std::uint64_t stride_bytes = 0;  // 0 selects conflict_stride(g)
  OpMix op_mix = OpMix::read_only;
  bool strict = true;
  addr_t base = 0;
  std::string name = "harm.off-chip";
};

// Same-set strided walker: every thread hammers one (bank, set) over a private array.
inline WorkloadSpec gen_offchip_antagonist(const CacheGeometry& g, std::uint64_t n_threads,
                                           OffchipOptions opt = {}) {
  validate_geometry(g);
  if (n_threads < 1) throw ConfigError("off-chip antagonist needs at least one thread");
  const std::uint64_t stride = opt.stride_bytes ? opt.stride_bytes : conflict_stride(g);
  if (stride < g.line_size) throw ConfigError("off-chip antagonist stride smaller than a line");
  if (opt.strict && stride % conflict_stride(g))
    throw ConfigError("off-chip antagonist stride " + std::to_string(stride) +
                      " is not a multiple of the conflict stride " + std::to_string(conflict_stride(g)));
  if (opt.array_bytes == 0 || opt.array_bytes % stride)
    throw ConfigError("off-chip antagonist array_bytes must be a multiple of the stride");
  if (opt.base % kArenaAlign) throw ConfigError("workload base must be page-aligned");

  WorkloadSpec w{opt.name, {}, {}};
  const std::uint64_t span = round_up(opt.array_bytes, kArenaAlign);
  for (std::uint64_t t = 0; t < n_threads; ++t)
    w.threads.push_back({StridedWalk{opt.array_bytes, stride, opt.op_mix}, opt.base + t * span, {}});
  return w;
}

// Whole-cache walker: threads sweep one shared capacity-sized array from
// equally spaced line-aligned starting points.
inline WorkloadSpec gen_onchip_antagonist(const CacheGeometry& g, std::uint64_t n_threads,
                                          addr_t base = 0, std::string name = "harm.on-chip",
                                          OpMix op_mix = OpMix::read_only) {
  validate_geometry(g);
  if (n_threads < 1) throw ConfigError("on-chip antagonist needs at least one thread");
  if (base % kArenaAlign) throw ConfigError("workload base must be page-aligned");
  const std::uint64_t cap = g.capacity();
  WorkloadSpec w{std::move(name), {}, {{"shared", base}}};
  for (std::uint64_t t = 0; t < n_threads; ++t) {
    const std::uint64_t offset = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(t) * cap / n_threads) / g.line_size * g.line_size);
    w.threads.push_back({SharedWalk{"shared", cap, g.line_size, offset, op_mix}, base, {}});
  }
  return w;
}

// Cache-polluting sequential sweep of a large private array per thread.
inline WorkloadSpec gen_xeon_samedie_antagonist(const CacheGeometry& g, std::uint64_t n_threads,
                                                addr_t base = 0,
                                                std::string name = "harm.same-die") {
  validate_geometry(g);
  if (n_threads < 1) throw ConfigError("same-die antagonist needs at least one thread");
  if (base % kArenaAlign) throw ConfigError("workload base must be page-aligned");
  constexpr std::uint64_t kArray = 64 * kMiB;
  WorkloadSpec w{std::move(name), {}, {}};
  for (std::uint64_t t = 0; t < n_threads; ++t)
    w.threads.push_back({StridedWalk{kArray, g.line_size, OpMix::read_only}, base + t * kArray, {}});
  return w;
}

inline WorkloadSpec gen_stream(StreamKind kind, std::uint64_t n_elems, std::uint64_t repetitions = 1,
                               addr_t base = 0, std::string name = "stream") {
  if (base % kArenaAlign) throw ConfigError("workload base must be page-aligned");
  WorkloadSpec w{std::move(name), {}, {}};
  w.threads.push_back({StreamKernel{kind, n_elems, 8, repetitions}, base, {}});
  return w;
}

inline WorkloadSpec gen_bucket_sort(std::uint64_t n_keys, std::uint64_t n_buckets = 10,
                                    std::uint64_t iterations = 10, std::uint64_t seed = 0,
                                    addr_t base = 0, std::string name = "is") {
  if (n_buckets < 1) throw ConfigError("bucket sort needs at least one bucket");
  if (base % kArenaAlign) throw ConfigError("workload base must be page-aligned");
  WorkloadSpec w{std::move(name), {}, {}};
  w.threads.push_back({BucketSort{n_keys, n_buckets, iterations, seed}, base, {}});
  return w;
}

// Total bytes spanned by a workload's arenas measured from its lowest base.
inline std::uint64_t workload_extent(const WorkloadSpec& w) {
  auto v = arenas_of(w);
  if (v.empty()) return 0;
  addr_t lo = v.front().base, hi = v.front().end();
  for (const auto& i : v) {
    lo = std::min(lo, i.base);
    hi = std::max(hi, i.end());
  }
  return hi - lo;
}

// Shift every arena of w by delta bytes.
inline WorkloadSpec relocate(WorkloadSpec w, addr_t delta) {
  for (auto& t : w.threads) t.arena_base += delta;
  for (auto& [id, base] : w.shared_arenas) base += delta;
  return w;
}

// ---------------------------------------------------------------------------
// Expansion

// Lazy, deterministic event source for one thread.
class ThreadStream {
 public:
  ThreadStream(const ThreadSpec& spec, std::uint32_t thread_id)
      : spec_(spec), thread_(thread_id), remaining_(natural_length(spec.pattern)) {
    if (const auto* s = std::get_if<SharedWalk>(&spec_.pattern)) pos_ = s->start_offset;
    if (const auto* k = std::get_if<StreamKernel>(&spec_.pattern)) stream_ops_ = stream_layout::ops(k->kind);
    if (const auto* b = std::get_if<BucketSort>(&spec_.pattern); b && b->n_keys == 0) phase_ = 1;
  }

  bool done() const { return remaining_ == 0; }

  std::optional<AccessEvent> next() {
    if (remaining_ == 0) return std::nullopt;
    if (remaining_ != std::numeric_limits<std::uint64_t>::max()) --remaining_;
    AccessEvent e{thread_, 0, Op::read, seq_};
    std::visit([&](const auto& p) { step(p, e); }, spec_.pattern);
    ++seq_;
    return e;
  }

 private:
  static Op mix_op(OpMix m, std::uint64_t seq) {
    switch (m) {
      case OpMix::read_only: return Op::read;
      case OpMix::write_only: return Op::write;
      case OpMix::alternating: return (seq & 1) ? Op::write : Op::read;
    }
    return Op::read;
  }

  void step(const StridedWalk& p, AccessEvent& e) {
    e.address = spec_.arena_base + pos_;
    e.op = mix_op(p.op_mix, seq_);
    pos_ += p.stride_bytes;
    if (pos_ >= p.arena_bytes) pos_ %= p.arena_bytes;
  }

  void step(const SharedWalk& p, AccessEvent& e) {
    e.address = spec_.arena_base + pos_;
    e.op = mix_op(p.op_mix, seq_);
    pos_ += p.stride_bytes;
    if (pos_ >= p.arena_bytes) pos_ %= p.arena_bytes;
  }

  void step(const StreamKernel& p, AccessEvent& e) {
    const auto& op = stream_ops_[sub_];
    const addr_t array_off = static_cast<addr_t>(op.array) * stream_layout::array_span(p);
    e.address = spec_.arena_base + array_off + elem_ * p.elem_bytes;
    e.op = op.op;
    if (++sub_ == stream_ops_.size()) {
      sub_ = 0;
      if (++elem_ == p.n_elems) elem_ = 0;
    }
  }

  void step(const BucketSort& p, AccessEvent& e) {
    using namespace sort_layout;
    const addr_t base = spec_.arena_base;
    switch (phase_) {
      case 0: {  // count: read key, bump its bucket counter
        const std::uint32_t key = key_at(p.seed, elem_);
        if (sub_ == 0) {
          e = {thread_, base + offset_keys(p) + elem_ * kKeyBytes, Op::read, seq_};
          sub_ = 1;
        } else {
          e = {thread_, base + offset_counters(p) + bucket_of(key, p.n_buckets) * kKeyBytes, Op::write, seq_};
          sub_ = 0;
          if (++elem_ == p.n_keys) advance_phase(p);
        }
        break;
      }
      case 1: {  // prefix sum over counters
        e = {thread_, base + offset_counters(p) + elem_ * kKeyBytes, Op::write, seq_};
        if (++elem_ == p.n_buckets) advance_phase(p);
        break;
      }
      default: {  // permute: read key, write it to its bucket slot
        const std::uint32_t key = key_at(p.seed, elem_);
        if (sub_ == 0) {
          e = {thread_, base + offset_keys(p) + elem_ * kKeyBytes, Op::read, seq_};
          sub_ = 1;
        } else {
          const std::uint64_t b = bucket_of(key, p.n_buckets);
          e = {thread_, base + offset_output(p) + cursor_[b]++ * kKeyBytes, Op::write, seq_};
          sub_ = 0;
          if (++elem_ == p.n_keys) advance_phase(p);
        }
        break;
      }
    }
  }

  void advance_phase(const BucketSort& p) {
    elem_ = 0;
    sub_ = 0;
    phase_ = (phase_ + 1) % 3;
    // Skip empty phases so every emitted event is real.
    if (p.n_keys == 0) phase_ = 1;
    if (phase_ == 2) {
      if (starts_.empty()) starts_ = sort_layout::bucket_starts(p);
      cursor_ = starts_;
    }
  }

  ThreadSpec spec_;
  std::uint32_t thread_;
  std::uint64_t remaining_;
  std::uint64_t seq_ = 0;
  std::uint64_t pos_ = 0;
  std::uint64_t elem_ = 0;
  std::size_t sub_ = 0;
  int phase_ = 0;
  std::vector<stream_layout::KernelOp> stream_ops_;
  std::vector<std::uint64_t> starts_;
  std::vector<std::uint64_t> cursor_;
};

inline std::vector<ThreadStream> streams_of(const WorkloadSpec& w) {
  std::vector<ThreadStream> out;
  out.reserve(w.threads.size());
  for (std::size_t i = 0; i < w.threads.size(); ++i)
    out.emplace_back(w.threads[i], static_cast<std::uint32_t>(i));
  return out;
}

// Materializes at most per_thread_limit events of every thread.
inline std::vector<std::vector<AccessEvent>> expand(const WorkloadSpec& w, std::uint64_t per_thread_limit) {
  std::vector<std::vector<AccessEvent>> out;
  for (auto& s : streams_of(w)) {
    auto& v = out.emplace_back();
    for (std::uint64_t i = 0; i < per_thread_limit; ++i) {
      auto e = s.next();
      if (!e) break;
      v.push_back(*e);
    }
  }
  return out;
}

// Distinct (bank, set) pairs touched by one full pass of every thread.
inline std::uint64_t footprint(const WorkloadSpec& w, const CacheGeometry& g) {
  validate_geometry(g);
  const std::uint64_t sets = g.total_sets();
  const bool dense = sets <= (std::uint64_t{1} << 26);
  std::vector<bool> seen(dense ? sets : 0, false);
  std::unordered_set<std::uint64_t> sparse;
  std::uint64_t distinct = 0;
  auto streams = streams_of(w);
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const std::uint64_t n = pass_length(w.threads[i].pattern);
    for (std::uint64_t k = 0; k < n; ++k) {
      auto e = streams[i].next();
      if (!e) break;
      const std::uint64_t s = flat_set_of(e->address, g);
      if (dense) {
        if (!seen[s]) {
          seen[s] = true;
          ++distinct;
        }
      } else if (sparse.insert(s).second) {
        ++distinct;
      }
    }
  }
  return distinct;
}

}  // namespace interfere
