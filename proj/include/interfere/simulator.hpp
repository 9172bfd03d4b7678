#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "interfere/error.hpp"
#include "interfere/geometry.hpp"
#include "interfere/patterns.hpp"

namespace interfere {

struct SimConfig {
  CacheGeometry geometry = preset("t1");
  std::uint64_t hit_latency = 10;
  // Cycles from dequeue at the memory controller until the fill completes.
  std::uint64_t mem_latency = 100;
  // The controller dequeues at most one line every mc_service_interval cycles.
  std::uint64_t mc_service_interval = 10;
  bool writeback_counts_as_slot = true;
  std::uint64_t per_thread_event_budget = 1'000'000;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline const SimConfig& validate_sim_config(const SimConfig& c) {
  validate_geometry(c.geometry);
  if (c.hit_latency < 1) throw ConfigError("hit_latency must be >= 1");
  if (c.mem_latency < c.hit_latency) throw ConfigError("mem_latency must be >= hit_latency");
  if (c.mc_service_interval < 1) throw ConfigError("mc_service_interval must be >= 1");
  if (c.per_thread_event_budget == 0) throw ConfigError("per_thread_event_budget must be positive");
  return c;
}

struct WorkloadMetrics {
  std::string name;
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double mpka = 0.0;  // misses per thousand accesses
  std::uint64_t lines_fetched = 0;
  // Dirty lines owned by this workload sent to the controller.
  std::uint64_t lines_written_back = 0;
  // Dirty lines of this workload evicted, whether or not they occupied a controller slot.
  std::uint64_t dirty_evictions = 0;
  std::uint64_t elapsed_cycles = 0;
  double bandwidth_share = 0.0;
  double normalized_performance = 1.0;

  friend bool operator==(const WorkloadMetrics&, const WorkloadMetrics&) = default;
};

struct SimResult {
  std::vector<WorkloadMetrics> workloads;
  // Last thread completion or last controller dequeue, whichever is later.
  std::uint64_t total_cycles = 0;
  std::uint64_t mc_serviced_lines = 0;

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

// Shared banked set-associative cache with true LRU, write-allocate and write-back.
class SharedCache {
 public:
  struct Outcome {
    bool hit = false;
    bool dirty_eviction = false;
    std::uint32_t evicted_owner = 0;
  };

  explicit SharedCache(const CacheGeometry& g)
      : geom_(validate_geometry(g)), ways_(g.associativity), lines_(g.total_sets() * g.associativity) {}

  Outcome access(addr_t addr, Op op, std::uint32_t owner) {
    const std::uint64_t set = flat_set_of(addr, geom_);
    const addr_t tag = tag_of(addr, geom_);
    Line* first = &lines_[set * ways_];
    Line* victim = nullptr;
    ++clock_;
    for (std::uint64_t w = 0; w < ways_; ++w) {
      Line& l = first[w];
      if (l.valid && l.tag == tag) {
        l.stamp = clock_;
        l.dirty = l.dirty || op == Op::write;
        return {true, false, 0};
      }
      if (!victim || (victim->valid && (!l.valid || l.stamp < victim->stamp))) victim = &l;
    }
    Outcome out{false, victim->valid && victim->dirty, victim->owner};
    *victim = Line{tag, clock_, owner, true, op == Op::write};
    return out;
  }

  const CacheGeometry& geometry() const { return geom_; }

 private:
  struct Line {
    addr_t tag = 0;
    std::uint64_t stamp = 0;
    std::uint32_t owner = 0;
    bool valid = false;
    bool dirty = false;
  };

  CacheGeometry geom_;
  std::uint64_t ways_;
  std::vector<Line> lines_;
  std::uint64_t clock_ = 0;
};

namespace detail {

// Replays a fixed list of events as one thread.
class VectorSource {
 public:
  explicit VectorSource(std::span<const AccessEvent> events) : events_(events) {}
  bool done() const { return pos_ == events_.size(); }
  std::optional<AccessEvent> next() {
    if (done()) return std::nullopt;
    return events_[pos_++];
  }

 private:
  std::span<const AccessEvent> events_;
  std::size_t pos_ = 0;
};

struct RawMetrics {
  std::uint64_t accesses = 0, hits = 0, misses = 0, fetched = 0, written_back = 0, dirty_evictions = 0;
  std::uint64_t elapsed = 0;
};

struct RawRun {
  std::vector<RawMetrics> workloads;
  std::uint64_t total_cycles = 0;
  std::uint64_t serviced = 0;
};

// Event-driven equivalent of cycle stepping: threads issue in order of ready
// cycle, ties broken by (workload, thread) index. Threads block on misses.
template <typename Source>
RawRun run_engine(std::vector<std::vector<Source>> sources, const SimConfig& cfg,
                  std::vector<std::uint8_t>* hit_log = nullptr) {
  struct Thread {
    Source* src;
    std::uint32_t workload;
    std::uint64_t budget;
  };
  std::vector<Thread> threads;
  for (std::size_t w = 0; w < sources.size(); ++w)
    for (auto& s : sources[w]) threads.push_back({&s, static_cast<std::uint32_t>(w), cfg.per_thread_event_budget});

  using Entry = std::tuple<std::uint64_t, std::size_t>;  // (ready cycle, global thread index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  for (std::size_t i = 0; i < threads.size(); ++i)
    if (!threads[i].src->done()) ready.emplace(0, i);

  SharedCache cache(cfg.geometry);
  RawRun run;
  run.workloads.resize(sources.size());
  std::uint64_t mc_free = 0;
  std::optional<std::uint64_t> last_dequeue;

  auto dequeue = [&](std::uint64_t arrival) {
    const std::uint64_t d = std::max(arrival, mc_free);
    mc_free = d + cfg.mc_service_interval;
    last_dequeue = d;
    ++run.serviced;
    return d;
  };

  while (!ready.empty()) {
    const auto [now, idx] = ready.top();
    ready.pop();
    Thread& th = threads[idx];
    const auto ev = th.src->next();
    if (!ev) continue;
    RawMetrics& m = run.workloads[th.workload];
    ++m.accesses;
    const auto out = cache.access(ev->address, ev->op, th.workload);
    if (hit_log) hit_log->push_back(out.hit ? 1 : 0);
    std::uint64_t next;
    if (out.hit) {
      ++m.hits;
      next = now + cfg.hit_latency;
    } else {
      ++m.misses;
      ++m.fetched;
      next = dequeue(now) + cfg.mem_latency;
      if (out.dirty_eviction) {
        RawMetrics& owner = run.workloads[out.evicted_owner];
        ++owner.dirty_evictions;
        if (cfg.writeback_counts_as_slot) {
          dequeue(now);
          ++owner.written_back;
        }
      }
    }
    m.elapsed = std::max(m.elapsed, next);
    run.total_cycles = std::max(run.total_cycles, next);
    if (--th.budget > 0 && !th.src->done()) ready.emplace(next, idx);
  }
  if (last_dequeue) run.total_cycles = std::max(run.total_cycles, *last_dequeue);
  return run;
}

inline RawRun run_workloads(std::span<const WorkloadSpec> ws, const SimConfig& cfg) {
  std::vector<std::vector<ThreadStream>> sources;
  for (const auto& w : ws) sources.push_back(streams_of(w));
  return run_engine(std::move(sources), cfg);
}

inline void check_inputs(std::span<const WorkloadSpec> ws, const SimConfig& cfg) {
  validate_sim_config(cfg);
  std::vector<Interval> all;
  for (const auto& w : ws) {
    validate_workload(w, cfg.geometry.line_size);
    auto a = arenas_of(w);
    all.insert(all.end(), a.begin(), a.end());
  }
  if (any_overlap(std::move(all))) throw ConfigError("arenas of different workloads overlap");
}

inline WorkloadMetrics finish_metrics(const std::string& name, const RawMetrics& m, std::uint64_t serviced,
                                      std::optional<std::uint64_t> solo_cycles) {
  WorkloadMetrics out;
  out.name = name;
  out.accesses = m.accesses;
  out.hits = m.hits;
  out.misses = m.misses;
  out.mpka = m.accesses ? 1000.0 * static_cast<double>(m.misses) / static_cast<double>(m.accesses) : 0.0;
  out.lines_fetched = m.fetched;
  out.lines_written_back = m.written_back;
  out.dirty_evictions = m.dirty_evictions;
  out.elapsed_cycles = m.elapsed;
  out.bandwidth_share =
      serviced ? static_cast<double>(m.fetched + m.written_back) / static_cast<double>(serviced) : 0.0;
  if (solo_cycles && m.elapsed > 0)
    out.normalized_performance = static_cast<double>(*solo_cycles) / static_cast<double>(m.elapsed);
  return out;
}

}  // namespace detail

// Co-runs all workloads on one shared cache and memory controller. Each
// workload's normalized_performance divides its solo cycles by its co-run
// cycles at the same event budget.
inline SimResult simulate(std::span<const WorkloadSpec> workloads, const SimConfig& cfg) {
  detail::check_inputs(workloads, cfg);
  const auto run = detail::run_workloads(workloads, cfg);
  SimResult res;
  res.total_cycles = run.total_cycles;
  res.mc_serviced_lines = run.serviced;
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    std::optional<std::uint64_t> solo;
    if (workloads.size() > 1)
      solo = detail::run_workloads(std::span(&workloads[i], 1), cfg).workloads[0].elapsed;
    res.workloads.push_back(detail::finish_metrics(workloads[i].name, run.workloads[i], run.serviced, solo));
  }
  return res;
}

inline SimResult simulate(std::initializer_list<WorkloadSpec> workloads, const SimConfig& cfg) {
  return simulate(std::span<const WorkloadSpec>(workloads.begin(), workloads.size()), cfg);
}

inline SimResult simulate_solo(const WorkloadSpec& w, const SimConfig& cfg) {
  return simulate(std::span(&w, 1), cfg);
}

struct TraceRun {
  std::vector<std::uint8_t> hits;  // per event in issue order, 1 = hit
  SimResult result;
};

// Runs a flat, already interleaved trace through the timing engine as a
// single in-order thread.
inline TraceRun simulate_trace(std::span<const AccessEvent> trace, const SimConfig& cfg) {
  validate_sim_config(cfg);
  std::vector<std::vector<detail::VectorSource>> src(1);
  src[0].emplace_back(trace);
  SimConfig c = cfg;
  c.per_thread_event_budget = std::max<std::uint64_t>(trace.size(), 1);
  TraceRun out;
  out.hits.reserve(trace.size());
  const auto run = detail::run_engine(std::move(src), c, &out.hits);
  out.result.total_cycles = run.total_cycles;
  out.result.mc_serviced_lines = run.serviced;
  out.result.workloads.push_back(detail::finish_metrics("trace", run.workloads[0], run.serviced, std::nullopt));
  return out;
}

struct ReportRow {
  std::string secondary;
  WorkloadMetrics primary;  // primary's metrics while co-running with `secondary`
};

// One row per secondary plus a leading "idle" row, each giving the primary's
// metrics and its solo/co-run cycle ratio.
inline std::vector<ReportRow> interference_report(const WorkloadSpec& primary,
                                                  std::span<const WorkloadSpec> secondaries,
                                                  const SimConfig& cfg) {
  detail::check_inputs(std::span(&primary, 1), cfg);
  const auto solo = detail::run_workloads(std::span(&primary, 1), cfg);
  const std::uint64_t solo_cycles = solo.workloads[0].elapsed;
  std::vector<ReportRow> rows;
  rows.push_back({"idle", detail::finish_metrics(primary.name, solo.workloads[0], solo.serviced, solo_cycles)});
  rows.back().primary.normalized_performance = 1.0;
  for (const auto& s : secondaries) {
    const std::vector<WorkloadSpec> pair{primary, s};
    detail::check_inputs(pair, cfg);
    const auto run = detail::run_workloads(pair, cfg);
    rows.push_back({s.name, detail::finish_metrics(primary.name, run.workloads[0], run.serviced, solo_cycles)});
  }
  return rows;
}

}  // namespace interfere
