#pragma once

// Runs workloads as real threads on the host and measures achieved bandwidth.
// Linux only: pinning uses pthread affinity, arenas are anonymous mmaps.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <pthread.h>
#include <sched.h>
#include <sys/mman.h>
#include <unistd.h>

#include "interfere/error.hpp"
#include "interfere/patterns.hpp"

namespace interfere {

struct NativeOptions {
  double duration_s = 1.0;
  bool hugepages = false;
  // Bytes accounted per walk event; one cache line.
  std::uint64_t line_bytes = 64;
};

struct HostInfo {
  std::string cpu_model;
  unsigned logical_cpus = 0;
};

struct NativeThreadResult {
  std::uint64_t events = 0;
  std::uint64_t bytes_touched = 0;
  double elapsed_s = 0.0;
  double bandwidth = 0.0;  // bytes per second
  // Checksum of the untimed warm-up pass; reproducible for seeded or read-only patterns.
  std::uint64_t checksum = 0;
  // Running checksum of the timed loop; depends on how far the loop got.
  std::uint64_t timed_checksum = 0;
  std::optional<int> cpu;
};

struct NativeResult {
  std::string workload;
  std::vector<NativeThreadResult> threads;
  double aggregate_bandwidth = 0.0;
  std::uint64_t checksum = 0;
  HostInfo host;
  std::vector<std::string> pinnings;
};

// ---------------------------------------------------------------------------
// Host queries

inline unsigned logical_cpu_count() {
  cpu_set_t set;
  CPU_ZERO(&set);
  if (sched_getaffinity(0, sizeof(set), &set) == 0) return static_cast<unsigned>(CPU_COUNT(&set));
  return std::max(1u, std::thread::hardware_concurrency());
}

inline HostInfo host_info() {
  HostInfo h;
  h.logical_cpus = logical_cpu_count();
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      auto pos = line.find(':');
      if (pos != std::string::npos) h.cpu_model = line.substr(line.find_first_not_of(' ', pos + 1));
      break;
    }
  }
  if (h.cpu_model.empty()) h.cpu_model = "unknown";
  return h;
}

// Parses "0,2,4-7" into a list of CPU ids.
inline std::vector<int> parse_cpu_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    try {
      auto dash = tok.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoi(tok));
      } else {
        const int lo = std::stoi(tok.substr(0, dash)), hi = std::stoi(tok.substr(dash + 1));
        if (hi < lo) throw ConfigError("bad cpu range '" + tok + "'");
        for (int c = lo; c <= hi; ++c) out.push_back(c);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad cpu list '" + s + "'");
    }
  }
  for (int c : out)
    if (c < 0) throw ConfigError("bad cpu list '" + s + "'");
  return out;
}

// CPUs sharing the last-level cache with `cpu`, from sysfs. Empty when unknown.
inline std::vector<int> llc_siblings(int cpu) {
  int best_level = -1;
  std::vector<int> best;
  for (int idx = 0; idx < 16; ++idx) {
    const std::string dir = "/sys/devices/system/cpu/cpu" + std::to_string(cpu) + "/cache/index" + std::to_string(idx);
    std::ifstream lvl(dir + "/level"), shared(dir + "/shared_cpu_list");
    int level = 0;
    std::string list;
    if (!(lvl >> level) || !(shared >> list)) continue;
    if (level > best_level) {
      best_level = level;
      best = parse_cpu_list(list);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Memory

class Arena {
 public:
  Arena() = default;
  Arena(std::uint64_t bytes, bool hugepages) {
    const std::uint64_t align = hugepages ? 2 * kMiB : static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
    size_ = round_up(std::max<std::uint64_t>(bytes, 1), align);
    void* p = mmap(nullptr, size_, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (p == MAP_FAILED) throw HostError("cannot allocate arena of " + std::to_string(size_) + " bytes");
#ifdef MADV_HUGEPAGE
    if (hugepages) madvise(p, size_, MADV_HUGEPAGE);
#endif
    data_ = static_cast<std::byte*>(p);
  }
  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;
  Arena(Arena&& o) noexcept : data_(std::exchange(o.data_, nullptr)), size_(std::exchange(o.size_, 0)) {}
  Arena& operator=(Arena&& o) noexcept {
    if (this != &o) {
      release();
      data_ = std::exchange(o.data_, nullptr);
      size_ = std::exchange(o.size_, 0);
    }
    return *this;
  }
  ~Arena() { release(); }

  std::byte* data() const { return data_; }
  std::uint64_t size() const { return size_; }

 private:
  void release() {
    if (data_) munmap(data_, size_);
    data_ = nullptr;
  }
  std::byte* data_ = nullptr;
  std::uint64_t size_ = 0;
};

// ---------------------------------------------------------------------------
// Kernels

namespace native_detail {

inline std::uint64_t bits(double d) { return std::bit_cast<std::uint64_t>(d); }

constexpr double kStreamScalar = 3.0;

// One STREAM kernel over [lo, hi). Returns the sum of the bit patterns of every value read.
inline std::uint64_t stream_range(StreamKind kind, double* a, double* b, double* c, std::uint64_t lo,
                                  std::uint64_t hi) {
  std::uint64_t sum = 0;
  switch (kind) {
    case StreamKind::copy:
      for (std::uint64_t i = lo; i < hi; ++i) {
        const double x = a[i];
        sum += bits(x);
        c[i] = x;
      }
      break;
    case StreamKind::scale:
      for (std::uint64_t i = lo; i < hi; ++i) {
        const double x = c[i];
        sum += bits(x);
        b[i] = kStreamScalar * x;
      }
      break;
    case StreamKind::add:
      for (std::uint64_t i = lo; i < hi; ++i) {
        const double x = a[i], y = b[i];
        sum += bits(x) + bits(y);
        c[i] = x + y;
      }
      break;
    case StreamKind::triad:
      for (std::uint64_t i = lo; i < hi; ++i) {
        const double x = b[i], y = c[i];
        sum += bits(x) + bits(y);
        a[i] = x + kStreamScalar * y;
      }
      break;
  }
  return sum;
}

inline void stream_init(double* a, double* b, double* c, std::uint64_t n) {
  for (std::uint64_t i = 0; i < n; ++i) {
    a[i] = 1.0 + static_cast<double>(i);
    b[i] = 2.0 + static_cast<double>(i);
    c[i] = 0.5 * static_cast<double>(i);
  }
}

// Resumable executor performing exactly the accesses ThreadStream describes.
class Kernel {
 public:
  Kernel(const PatternSpec& p, std::byte* mem, std::uint64_t line_bytes) : pattern_(p), mem_(mem) {
    if (const auto* s = std::get_if<StridedWalk>(&p)) {
      walk_ = {s->arena_bytes, s->stride_bytes, 0, s->op_mix};
      unit_ = line_bytes;
    } else if (const auto* s = std::get_if<SharedWalk>(&p)) {
      walk_ = {s->arena_bytes, s->stride_bytes, s->start_offset, s->op_mix};
      unit_ = line_bytes;
    } else if (const auto* k = std::get_if<StreamKernel>(&p)) {
      if (k->elem_bytes != sizeof(double)) throw ConfigError("native stream kernels use 8-byte elements");
      a_ = reinterpret_cast<double*>(mem + stream_layout::offset_a(*k));
      b_ = reinterpret_cast<double*>(mem + stream_layout::offset_b(*k));
      c_ = reinterpret_cast<double*>(mem + stream_layout::offset_c(*k));
      stream_init(a_, b_, c_, k->n_elems);
      ops_per_elem_ = stream_layout::ops(k->kind).size();
      unit_ = k->elem_bytes;
    } else if (const auto* s = std::get_if<BucketSort>(&p)) {
      keys_ = reinterpret_cast<std::uint32_t*>(mem + sort_layout::offset_keys(*s));
      counters_ = reinterpret_cast<std::uint32_t*>(mem + sort_layout::offset_counters(*s));
      out_ = reinterpret_cast<std::uint32_t*>(mem + sort_layout::offset_output(*s));
      for (std::uint64_t i = 0; i < s->n_keys; ++i) keys_[i] = sort_layout::key_at(s->seed, i);
      unit_ = sort_layout::kKeyBytes;
      if (s->n_keys == 0) phase_ = 1;
    }
  }

  std::uint64_t unit_bytes() const { return unit_; }
  std::uint64_t pass_events() const { return pass_length(pattern_); }

  // Performs up to max_events accesses (fewer only at a phase boundary); returns the count done.
  std::uint64_t run(std::uint64_t max_events, std::uint64_t& checksum) {
    if (max_events == 0) return 0;
    if (std::holds_alternative<StridedWalk>(pattern_) || std::holds_alternative<SharedWalk>(pattern_))
      return run_walk(max_events, checksum);
    if (const auto* k = std::get_if<StreamKernel>(&pattern_)) return run_stream(*k, max_events, checksum);
    return run_sort(std::get<BucketSort>(pattern_), max_events, checksum);
  }

 private:
  struct Walk {
    std::uint64_t arena = 0, stride = 0, pos = 0;
    OpMix mix = OpMix::read_only;
  };

  std::uint64_t run_walk(std::uint64_t n, std::uint64_t& checksum) {
    std::uint64_t sum = 0;
    for (std::uint64_t k = 0; k < n; ++k, ++seq_) {
      auto* word = reinterpret_cast<std::uint64_t*>(mem_ + walk_.pos);
      const bool write = walk_.mix == OpMix::write_only || (walk_.mix == OpMix::alternating && (seq_ & 1));
      if (write)
        *word = seq_;
      else
        sum += *word;
      walk_.pos += walk_.stride;
      if (walk_.pos >= walk_.arena) walk_.pos -= walk_.arena;
    }
    checksum += sum;
    return n;
  }

  std::uint64_t run_stream(const StreamKernel& k, std::uint64_t n, std::uint64_t& checksum) {
    if (k.n_elems == 0) return 0;
    const std::uint64_t elems = std::min(std::max<std::uint64_t>(n / ops_per_elem_, 1), k.n_elems - elem_);
    checksum += stream_range(k.kind, a_, b_, c_, elem_, elem_ + elems);
    elem_ += elems;
    if (elem_ == k.n_elems) elem_ = 0;
    return elems * ops_per_elem_;
  }

  std::uint64_t run_sort(const BucketSort& s, std::uint64_t n, std::uint64_t& checksum) {
    std::uint64_t sum = 0, done = 0;
    if (phase_ == 0) {
      if (elem_ == 0) std::memset(counters_, 0, s.n_buckets * sizeof(std::uint32_t));
      const std::uint64_t keys = std::min(std::max<std::uint64_t>(n / 2, 1), s.n_keys - elem_);
      for (std::uint64_t i = elem_; i < elem_ + keys; ++i) {
        const std::uint32_t key = keys_[i];
        sum += key;
        ++counters_[sort_layout::bucket_of(key, s.n_buckets)];
      }
      elem_ += keys;
      done = 2 * keys;
      if (elem_ == s.n_keys) next_phase();
    } else if (phase_ == 1) {
      std::uint32_t running = 0;
      for (std::uint64_t b = 0; b < s.n_buckets; ++b) {
        const std::uint32_t count = counters_[b];
        sum += count;
        counters_[b] = running;
        running += count;
      }
      done = s.n_buckets;
      next_phase();
      if (s.n_keys == 0) phase_ = 1;
    } else {
      const std::uint64_t keys = std::min(std::max<std::uint64_t>(n / 2, 1), s.n_keys - elem_);
      for (std::uint64_t i = elem_; i < elem_ + keys; ++i) {
        const std::uint32_t key = keys_[i];
        sum += key;
        out_[counters_[sort_layout::bucket_of(key, s.n_buckets)]++] = key;
      }
      elem_ += keys;
      done = 2 * keys;
      if (elem_ == s.n_keys) next_phase();
    }
    checksum += sum;
    return done;
  }

  void next_phase() {
    elem_ = 0;
    phase_ = (phase_ + 1) % 3;
  }

  PatternSpec pattern_;
  std::byte* mem_;
  std::uint64_t unit_ = 0;
  Walk walk_{};
  std::uint64_t seq_ = 0;
  double *a_ = nullptr, *b_ = nullptr, *c_ = nullptr;
  std::uint64_t ops_per_elem_ = 1;
  std::uint32_t *keys_ = nullptr, *counters_ = nullptr, *out_ = nullptr;
  std::uint64_t elem_ = 0;
  int phase_ = 0;
};

inline void pin(std::thread& t, int cpu) {
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  if (pthread_setaffinity_np(t.native_handle(), sizeof(set), &set) != 0)
    throw HostError("cannot pin thread to cpu " + std::to_string(cpu));
}

inline std::uint64_t mix_checksums(std::uint64_t acc, std::uint64_t v) {
  return sort_layout::splitmix64(acc ^ v);
}

// Runs every thread of every workload concurrently behind one start barrier.
inline std::vector<NativeResult> run_group(const std::vector<const WorkloadSpec*>& group, const NativeOptions& opt) {
  if (!(opt.duration_s > 0.0)) throw ConfigError("duration must be positive");
  const HostInfo host = host_info();
  for (const auto* w : group) {
    validate_workload(*w, opt.line_bytes);
    for (const auto& t : w->threads)
      if (t.cpu_hint && static_cast<unsigned>(*t.cpu_hint) >= host.logical_cpus)
        throw HostError("cpu_hint " + std::to_string(*t.cpu_hint) + " exceeds the " +
                        std::to_string(host.logical_cpus) + " logical CPUs available");
  }

  struct Slot {
    const ThreadSpec* spec = nullptr;
    std::byte* mem = nullptr;
    std::size_t workload = 0;
    NativeThreadResult result;
    std::exception_ptr error;
  };
  std::vector<Arena> arenas;
  std::vector<Slot> slots;
  for (std::size_t wi = 0; wi < group.size(); ++wi) {
    const auto& w = *group[wi];
    std::map<std::string, std::byte*> shared;
    for (const auto& t : w.threads) {
      std::byte* mem = nullptr;
      if (const auto* s = std::get_if<SharedWalk>(&t.pattern)) {
        auto it = shared.find(s->arena);
        if (it == shared.end()) {
          arenas.emplace_back(s->arena_bytes, opt.hugepages);
          it = shared.emplace(s->arena, arenas.back().data()).first;
        }
        mem = it->second;
      } else {
        arenas.emplace_back(arena_bytes(t.pattern), opt.hugepages);
        mem = arenas.back().data();
      }
      slots.push_back({&t, mem, wi, {}, nullptr});
      slots.back().result.cpu = t.cpu_hint;
    }
  }

  std::atomic<std::size_t> ready{0};
  std::atomic<int> go{0};  // 1 = start, -1 = abort
  const auto duration = std::chrono::duration<double>(opt.duration_s);
  std::vector<std::thread> threads;
  threads.reserve(slots.size());
  for (auto& slot : slots) {
    threads.emplace_back([&, s = &slot] {
      try {
        Kernel kernel(s->spec->pattern, s->mem, opt.line_bytes);
        std::uint64_t warm = 0;
        for (std::uint64_t left = kernel.pass_events(); left > 0;) {
          const std::uint64_t did = kernel.run(left, warm);
          if (did == 0) break;
          left -= std::min(left, did);
        }
        s->result.checksum = warm;
        ready.fetch_add(1);
        while (go.load(std::memory_order_acquire) == 0) std::this_thread::yield();
        if (go.load() < 0) return;
        constexpr std::uint64_t kChunk = 4096;
        std::uint64_t events = 0, sum = 0;
        const auto t0 = std::chrono::steady_clock::now();
        auto t1 = t0;
        do {
          events += kernel.run(kChunk, sum);
          t1 = std::chrono::steady_clock::now();
        } while (t1 - t0 < duration);
        auto& r = s->result;
        r.events = events;
        r.bytes_touched = events * kernel.unit_bytes();
        r.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
        r.bandwidth = r.elapsed_s > 0 ? static_cast<double>(r.bytes_touched) / r.elapsed_s : 0.0;
        r.timed_checksum = sum;
      } catch (...) {
        s->error = std::current_exception();
        ready.fetch_add(1);
      }
    });
  }

  std::exception_ptr failure;
  try {
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (slots[i].spec->cpu_hint) pin(threads[i], *slots[i].spec->cpu_hint);
  } catch (...) {
    failure = std::current_exception();
  }
  while (ready.load() < slots.size()) std::this_thread::yield();
  go.store(failure ? -1 : 1, std::memory_order_release);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  for (const auto& s : slots)
    if (s.error) std::rethrow_exception(s.error);

  std::vector<NativeResult> out(group.size());
  for (std::size_t wi = 0; wi < group.size(); ++wi) {
    out[wi].workload = group[wi]->name;
    out[wi].host = host;
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& r = out[slots[i].workload];
    r.pinnings.push_back(r.workload + "/" + std::to_string(r.threads.size()) + ":" +
                         (slots[i].result.cpu ? std::to_string(*slots[i].result.cpu) : std::string("any")));
    r.aggregate_bandwidth += slots[i].result.bandwidth;
    r.checksum = mix_checksums(r.checksum, slots[i].result.checksum);
    r.threads.push_back(slots[i].result);
  }
  return out;
}

}  // namespace native_detail

inline NativeResult run_native(const WorkloadSpec& w, const NativeOptions& opt = {}) {
  return native_detail::run_group({&w}, opt).front();
}

inline std::set<int> pinned_cpus(const WorkloadSpec& w) {
  std::set<int> s;
  for (const auto& t : w.threads)
    if (t.cpu_hint) s.insert(*t.cpu_hint);
  return s;
}

// Runs primary and secondary concurrently for the same duration.
inline std::pair<NativeResult, NativeResult> co_run(const WorkloadSpec& primary, const WorkloadSpec& secondary,
                                                    const NativeOptions& opt = {}) {
  const auto a = pinned_cpus(primary), b = pinned_cpus(secondary);
  for (int c : a)
    if (b.count(c)) throw ConfigError("primary and secondary are both pinned to cpu " + std::to_string(c));
  auto r = native_detail::run_group({&primary, &secondary}, opt);
  return {std::move(r[0]), std::move(r[1])};
}

struct StreamMeasurement {
  StreamKind kind = StreamKind::triad;
  std::uint64_t n_elems = 0;
  std::uint64_t bytes_per_pass = 0;
  std::vector<double> pass_seconds;
  double best_seconds = 0.0;
  double best_bandwidth = 0.0;
};

// Single-threaded STREAM measurement, best of `repetitions` timed passes. The
// three arrays must be at least four times the largest cache declared.
inline StreamMeasurement measure_stream(StreamKind kind, std::uint64_t n_elems, std::uint64_t repetitions,
                                        std::uint64_t declared_cache_bytes, bool hugepages = false) {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (3 * 8 * n_elems < 4 * declared_cache_bytes)
    throw ConfigError("arrays of " + std::to_string(n_elems) + " elements fit in cache; use n_elems >= " +
                      std::to_string((4 * declared_cache_bytes + 23) / 24));
  const StreamKernel k{kind, n_elems, 8, 1};
  Arena arena(3 * stream_layout::array_span(k), hugepages);
  auto* a = reinterpret_cast<double*>(arena.data() + stream_layout::offset_a(k));
  auto* b = reinterpret_cast<double*>(arena.data() + stream_layout::offset_b(k));
  auto* c = reinterpret_cast<double*>(arena.data() + stream_layout::offset_c(k));
  native_detail::stream_init(a, b, c, n_elems);

  StreamMeasurement m{kind, n_elems, stream_layout::bytes_per_elem(kind) * n_elems, {}, 0.0, 0.0};
  std::uint64_t sink = 0;
  for (std::uint64_t r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    sink += native_detail::stream_range(kind, a, b, c, 0, n_elems);
    const auto t1 = std::chrono::steady_clock::now();
    m.pass_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  static volatile std::uint64_t keep;
  keep = sink;
  (void)keep;
  m.best_seconds = *std::min_element(m.pass_seconds.begin(), m.pass_seconds.end());
  m.best_bandwidth = m.best_seconds > 0 ? static_cast<double>(m.bytes_per_pass) / m.best_seconds : 0.0;
  return m;
}

struct NativeReportRow {
  std::string secondary;
  NativeResult primary;  // last of the repeated runs
  NativeResult secondary_result;
  double primary_bandwidth = 0.0;  // median over repeats
  double normalized = 1.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Primary bandwidth under each secondary relative to an idle secondary, each
// row the median of `repeats` co-runs.
inline std::vector<NativeReportRow> native_interference_report(const WorkloadSpec& primary,
                                                               const std::vector<WorkloadSpec>& secondaries,
                                                               const NativeOptions& opt = {},
                                                               unsigned repeats = 1) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  const WorkloadSpec idle{"idle", {}, {}};
  auto row_for = [&](const WorkloadSpec& s) {
    NativeReportRow row;
    row.secondary = s.name;
    std::vector<double> bw;
    for (unsigned r = 0; r < repeats; ++r) {
      auto [p, q] = co_run(primary, s, opt);
      bw.push_back(p.aggregate_bandwidth);
      row.primary = std::move(p);
      row.secondary_result = std::move(q);
    }
    row.primary_bandwidth = median(bw);
    return row;
  };
  std::vector<NativeReportRow> rows;
  rows.push_back(row_for(idle));
  const double base = rows.front().primary_bandwidth;
  for (const auto& s : secondaries) {
    rows.push_back(row_for(s));
    rows.back().normalized = base > 0 ? rows.back().primary_bandwidth / base : 0.0;
  }
  return rows;
}

}  // namespace interfere
