#pragma once

// Declarative experiment files and the CSV/JSON reports produced from them.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "interfere/error.hpp"
#include "interfere/geometry.hpp"
#include "interfere/json_io.hpp"
#include "interfere/native.hpp"
#include "interfere/patterns.hpp"
#include "interfere/simulator.hpp"

namespace interfere {

struct NativeConfig {
  double duration_s = 1.0;
  bool hugepages = false;
  std::uint64_t line_bytes = 64;
  double noise_band_pct = 10.0;
  unsigned repeats = 3;
  // Secondaries whose row must show at least min_degradation_pct loss.
  std::vector<std::string> expect_degradation;
  double min_degradation_pct = 10.0;

  NativeOptions options() const { return {duration_s, hugepages, line_bytes}; }
  friend bool operator==(const NativeConfig&, const NativeConfig&) = default;
};

struct ExperimentConfig {
  CacheGeometry geometry = preset("t1");
  WorkloadSpec primary;
  std::vector<WorkloadSpec> secondaries;
  SimConfig sim;
  NativeConfig native;
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Workloads are placed on boundaries of this size when generated from a config.
inline constexpr std::uint64_t kPlacementAlign = 4 * kMiB;

inline void validate_experiment(const ExperimentConfig& e) {
  validate_sim_config(e.sim);
  if (e.primary.name != "primary") throw ConfigError("the primary workload must be named 'primary'");
  std::set<std::string> names{"primary", "idle"};
  for (const auto& s : e.secondaries)
    if (!names.insert(s.name).second) throw ConfigError("duplicate or reserved secondary name '" + s.name + "'");
  validate_workload(e.primary, e.geometry.line_size);
  for (const auto& s : e.secondaries) {
    validate_workload(s, e.geometry.line_size);
    std::vector<Interval> all = arenas_of(e.primary);
    auto b = arenas_of(s);
    all.insert(all.end(), b.begin(), b.end());
    if (any_overlap(std::move(all)))
      throw ConfigError("secondary '" + s.name + "' overlaps the primary's arenas");
  }
  if (!(e.native.duration_s > 0)) throw ConfigError("native duration must be positive");
  if (e.native.repeats < 1) throw ConfigError("native repeats must be >= 1");
  for (const auto& n : e.native.expect_degradation)
    if (!names.count(n) || n == "primary" || n == "idle")
      throw ConfigError("expect_degradation names unknown secondary '" + n + "'");
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const SimConfig& c) {
  j = json{{"hit_latency", c.hit_latency},
           {"mem_latency", c.mem_latency},
           {"mc_service_interval", c.mc_service_interval},
           {"writeback_counts_as_slot", c.writeback_counts_as_slot},
           {"per_thread_event_budget", c.per_thread_event_budget}};
}

inline void sim_overrides_from_json(const json& j, SimConfig& c) {
  detail::reject_unknown(j,
                         {"hit_latency", "mem_latency", "mc_service_interval", "writeback_counts_as_slot",
                          "per_thread_event_budget"},
                         "sim");
  detail::get_opt(j, "hit_latency", c.hit_latency);
  detail::get_opt(j, "mem_latency", c.mem_latency);
  detail::get_opt(j, "mc_service_interval", c.mc_service_interval);
  detail::get_opt(j, "writeback_counts_as_slot", c.writeback_counts_as_slot);
  detail::get_opt(j, "per_thread_event_budget", c.per_thread_event_budget);
}

inline void to_json(json& j, const NativeConfig& n) {
  j = json{{"duration_s", n.duration_s},         {"hugepages", n.hugepages},
           {"line_bytes", n.line_bytes},         {"noise_band_pct", n.noise_band_pct},
           {"repeats", n.repeats},               {"expect_degradation", n.expect_degradation},
           {"min_degradation_pct", n.min_degradation_pct}};
}

inline void from_json(const json& j, NativeConfig& n) {
  detail::reject_unknown(j,
                         {"duration_s", "hugepages", "line_bytes", "noise_band_pct", "repeats",
                          "expect_degradation", "min_degradation_pct"},
                         "native");
  detail::get_opt(j, "duration_s", n.duration_s);
  detail::get_opt(j, "hugepages", n.hugepages);
  detail::get_opt(j, "line_bytes", n.line_bytes);
  detail::get_opt(j, "noise_band_pct", n.noise_band_pct);
  detail::get_opt(j, "repeats", n.repeats);
  detail::get_opt(j, "expect_degradation", n.expect_degradation);
  detail::get_opt(j, "min_degradation_pct", n.min_degradation_pct);
}

// Expands the generator shorthand {"name", "generator", ...parameters} into a full workload.
inline WorkloadSpec workload_from_generator(const json& j, const CacheGeometry& g, addr_t base,
                                            std::uint64_t seed) {
  const auto gen = j.at("generator").get<std::string>();
  const auto name = j.at("name").get<std::string>();
  const auto threads = j.value("threads", std::uint64_t{1});
  auto op_mix = [&] { return parse_op_mix(j.value("op_mix", std::string("read-only"))); };
  WorkloadSpec w;
  if (gen == "offchip_antagonist") {
    detail::reject_unknown(j, {"name", "generator", "threads", "array_bytes", "stride_bytes", "op_mix", "strict", "cpus"},
                           "offchip_antagonist");
    OffchipOptions o;
    o.array_bytes = j.value("array_bytes", o.array_bytes);
    o.stride_bytes = j.value("stride_bytes", std::uint64_t{0});
    o.op_mix = op_mix();
    o.strict = j.value("strict", true);
    o.base = base;
    o.name = name;
    w = gen_offchip_antagonist(g, threads, o);
  } else if (gen == "onchip_antagonist") {
    detail::reject_unknown(j, {"name", "generator", "threads", "op_mix", "cpus"}, "onchip_antagonist");
    w = gen_onchip_antagonist(g, threads, base, name, op_mix());
  } else if (gen == "xeon_samedie_antagonist") {
    detail::reject_unknown(j, {"name", "generator", "threads", "cpus"}, "xeon_samedie_antagonist");
    w = gen_xeon_samedie_antagonist(g, threads, base, name);
  } else if (gen == "stream") {
    detail::reject_unknown(j, {"name", "generator", "kind", "n_elems", "repetitions", "cpus"}, "stream");
    w = gen_stream(parse_stream_kind(j.value("kind", std::string("triad"))), j.at("n_elems").get<std::uint64_t>(),
                   j.value("repetitions", std::uint64_t{1}), base, name);
  } else if (gen == "bucket_sort") {
    detail::reject_unknown(j, {"name", "generator", "n_keys", "n_buckets", "iterations", "seed", "cpus"},
                           "bucket_sort");
    w = gen_bucket_sort(j.at("n_keys").get<std::uint64_t>(), j.value("n_buckets", std::uint64_t{10}),
                        j.value("iterations", std::uint64_t{10}), j.value("seed", seed), base, name);
  } else if (gen == "idle") {
    detail::reject_unknown(j, {"name", "generator"}, "idle");
    w.name = name;
  } else {
    throw ConfigError("unknown generator '" + gen + "'");
  }
  if (auto it = j.find("cpus"); it != j.end()) {
    const auto cpus = parse_cpu_list(it->get<std::string>());
    if (cpus.empty()) throw ConfigError("empty cpus list for '" + name + "'");
    for (std::size_t i = 0; i < w.threads.size(); ++i) w.threads[i].cpu_hint = cpus[i % cpus.size()];
  }
  return w;
}

inline WorkloadSpec workload_entry(const json& j, const CacheGeometry& g, addr_t base, std::uint64_t seed) {
  if (j.contains("generator")) return workload_from_generator(j, g, base, seed);
  return j.get<WorkloadSpec>();
}

inline json experiment_to_json(const ExperimentConfig& e) {
  return json{{"geometry", e.geometry},   {"primary", e.primary}, {"secondaries", e.secondaries},
              {"sim", e.sim},             {"native", e.native},   {"output", {{"dir", e.out_dir}}},
              {"seed", e.seed}};
}

// Parses and validates an experiment. seed_override, when set, replaces the file's seed.
inline ExperimentConfig experiment_from_json(const json& j, std::optional<std::uint64_t> seed_override = {}) {
  try {
    detail::reject_unknown(j, {"geometry", "primary", "secondaries", "sim", "native", "output", "seed"}, "experiment");
    ExperimentConfig e;
    e.seed = seed_override ? *seed_override : j.value("seed", std::uint64_t{0});
    if (auto it = j.find("geometry"); it != j.end()) {
      e.geometry = it->is_string() ? preset(it->get<std::string>()) : it->get<CacheGeometry>();
    }
    validate_geometry(e.geometry);
    e.sim.geometry = e.geometry;
    if (auto it = j.find("sim"); it != j.end()) sim_overrides_from_json(*it, e.sim);
    if (auto it = j.find("native"); it != j.end()) it->get_to(e.native);
    if (auto it = j.find("output"); it != j.end()) e.out_dir = it->value("dir", e.out_dir);

    e.primary = workload_entry(j.at("primary"), e.geometry, 0, e.seed);
    const addr_t next = round_up(std::max<std::uint64_t>(workload_extent(e.primary), 1), kPlacementAlign);
    std::uint64_t idx = 1;
    for (const auto& s : j.value("secondaries", json::array()))
      e.secondaries.push_back(workload_entry(s, e.geometry, next, e.seed + idx++));
    validate_experiment(e);
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("invalid experiment: ") + ex.what());
  }
}

inline ExperimentConfig load_experiment(const std::string& path, std::optional<std::uint64_t> seed_override = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ConfigError("invalid JSON in '" + path + "': " + ex.what());
  }
  return experiment_from_json(j, seed_override);
}

// Assigns cpus to the primary's threads first; every secondary cycles over the remaining entries.
inline void apply_pins(ExperimentConfig& e, const std::vector<int>& cpus) {
  if (cpus.empty()) return;
  const std::size_t p = e.primary.threads.size();
  if (cpus.size() < p) throw ConfigError("--pin lists fewer cpus than the primary has threads");
  for (std::size_t i = 0; i < p; ++i) e.primary.threads[i].cpu_hint = cpus[i];
  const std::size_t rest = cpus.size() - p;
  for (auto& s : e.secondaries) {
    if (s.threads.empty()) continue;
    if (rest == 0) throw ConfigError("--pin leaves no cpus for secondary '" + s.name + "'");
    for (std::size_t i = 0; i < s.threads.size(); ++i) s.threads[i].cpu_hint = cpus[p + i % rest];
  }
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* kSimCsvHeader =
    "workload,accesses,hits,misses,mpka,lines_fetched,elapsed_cycles,bandwidth_share,normalized_performance";
inline constexpr const char* kNativeCsvHeader =
    "workload,accesses,hits,misses,mpka,lines_fetched,elapsed_cycles,bandwidth_share,normalized_performance,"
    "bandwidth_bytes_per_s";
inline constexpr const char* kTraceCsvHeader = "thread,seq,op,address";

inline std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string csv_row(const std::string& label, const WorkloadMetrics& m) {
  std::ostringstream os;
  os << label << ',' << m.accesses << ',' << m.hits << ',' << m.misses << ',' << fmt_fixed(m.mpka, 3) << ','
     << m.lines_fetched << ',' << m.elapsed_cycles << ',' << fmt_fixed(m.bandwidth_share, 6) << ','
     << fmt_fixed(m.normalized_performance, 6);
  return os.str();
}

inline std::string sim_result_csv(const SimResult& r) {
  std::string out = std::string(kSimCsvHeader) + "\n";
  for (const auto& m : r.workloads) out += csv_row(m.name, m) + "\n";
  return out;
}

inline std::string sim_report_csv(const std::vector<ReportRow>& rows) {
  std::string out = std::string(kSimCsvHeader) + "\n";
  for (const auto& r : rows) out += csv_row(r.secondary, r.primary) + "\n";
  return out;
}

inline json metrics_json(const std::string& label, const WorkloadMetrics& m) {
  return json{{"workload", label},
              {"accesses", m.accesses},
              {"hits", m.hits},
              {"misses", m.misses},
              {"mpka", m.mpka},
              {"lines_fetched", m.lines_fetched},
              {"elapsed_cycles", m.elapsed_cycles},
              {"bandwidth_share", m.bandwidth_share},
              {"normalized_performance", m.normalized_performance}};
}

inline std::string sim_report_json(const std::vector<ReportRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back(metrics_json(r.secondary, r.primary));
  return a.dump(2) + "\n";
}

inline std::string sim_result_json(const SimResult& r) {
  json a = json::array();
  for (const auto& m : r.workloads) a.push_back(metrics_json(m.name, m));
  return a.dump(2) + "\n";
}

// Native rows: counters the host cannot observe (hits, misses, cycles) stay empty.
inline std::string native_report_csv(const std::vector<NativeReportRow>& rows) {
  std::ostringstream os;
  if (!rows.empty()) {
    const auto& h = rows.front().primary.host;
    os << "# host_cpu: " << h.cpu_model << "\n# logical_cpus: " << h.logical_cpus << "\n";
    for (const auto& r : rows) {
      os << "# pinning " << r.secondary << ":";
      for (const auto& p : r.primary.pinnings) os << ' ' << p;
      for (const auto& p : r.secondary_result.pinnings) os << ' ' << p;
      os << "\n";
    }
  }
  os << kNativeCsvHeader << "\n";
  for (const auto& r : rows) {
    std::uint64_t events = 0;
    for (const auto& t : r.primary.threads) events += t.events;
    const double total = r.primary.aggregate_bandwidth + r.secondary_result.aggregate_bandwidth;
    const double share = total > 0 ? r.primary.aggregate_bandwidth / total : 0.0;
    os << r.secondary << ',' << events << ",,,,,," << fmt_fixed(share, 6) << ',' << fmt_fixed(r.normalized, 6) << ','
       << fmt_fixed(r.primary_bandwidth, 1) << "\n";
  }
  return os.str();
}

inline std::string native_report_json(const std::vector<NativeReportRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) {
    std::uint64_t events = 0;
    for (const auto& t : r.primary.threads) events += t.events;
    a.push_back({{"workload", r.secondary},
                 {"accesses", events},
                 {"normalized_performance", r.normalized},
                 {"bandwidth_bytes_per_s", r.primary_bandwidth},
                 {"checksum", r.primary.checksum},
                 {"pinnings", r.primary.pinnings}});
  }
  return a.dump(2) + "\n";
}

inline void write_trace_csv(std::ostream& os, const std::vector<std::vector<AccessEvent>>& per_thread) {
  os << kTraceCsvHeader << "\n";
  for (const auto& thread : per_thread)
    for (const auto& e : thread)
      os << e.thread << ',' << e.seq << ',' << to_string(e.op) << ",0x" << std::hex << e.address << std::dec << "\n";
}

inline std::string summary_table(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "secondary" << std::right << std::setw(12) << "norm_perf" << std::setw(12)
     << "misses" << std::setw(12) << "mpka" << "\n";
  for (const auto& r : rows)
    os << std::left << std::setw(24) << r.secondary << std::right << std::setw(12)
       << fmt_fixed(r.primary.normalized_performance, 3) << std::setw(12) << r.primary.misses << std::setw(12)
       << fmt_fixed(r.primary.mpka, 2) << "\n";
  return os.str();
}

inline std::string summary_table(const std::vector<NativeReportRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "secondary" << std::right << std::setw(12) << "norm_perf" << std::setw(16)
     << "GB/s" << "\n";
  for (const auto& r : rows)
    os << std::left << std::setw(24) << r.secondary << std::right << std::setw(12) << fmt_fixed(r.normalized, 3)
       << std::setw(16) << fmt_fixed(r.primary_bandwidth / 1e9, 3) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Native hardware checks

struct HwCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Idle baseline: co-running with an empty workload stays within the noise band of a solo run.
inline HwCheck check_idle_baseline(const WorkloadSpec& primary, const NativeOptions& opt, double noise_band_pct,
                                   unsigned runs = 3) {
  std::vector<double> solo, idle;
  const WorkloadSpec empty{"idle", {}, {}};
  for (unsigned r = 0; r < runs; ++r) {
    solo.push_back(run_native(primary, opt).aggregate_bandwidth);
    idle.push_back(co_run(primary, empty, opt).first.aggregate_bandwidth);
  }
  const double s = median(solo), i = median(idle);
  const double dev = s > 0 ? 100.0 * std::abs(i - s) / s : 100.0;
  return {"idle-baseline", dev <= noise_band_pct,
          "solo " + fmt_fixed(s / 1e9, 3) + " GB/s, idle co-run " + fmt_fixed(i / 1e9, 3) + " GB/s, deviation " +
              fmt_fixed(dev, 1) + "% (band " + fmt_fixed(noise_band_pct, 1) + "%)"};
}

// Whether primary and secondary are pinned to disjoint CPUs that share one last-level cache.
inline HwCheck check_shared_llc_host(const WorkloadSpec& primary, const WorkloadSpec& secondary) {
  const auto info = host_info();
  if (info.logical_cpus < 2)
    return {"shared-llc-host", false, "host has " + std::to_string(info.logical_cpus) + " logical CPU"};
  if (primary.threads.empty() || secondary.threads.empty())
    return {"shared-llc-host", false, "both workloads need at least one thread"};
  for (const auto* w : {&primary, &secondary})
    for (const auto& t : w->threads)
      if (!t.cpu_hint) return {"shared-llc-host", false, "thread of '" + w->name + "' has no cpu_hint"};
  const auto p = pinned_cpus(primary), s = pinned_cpus(secondary);
  for (int c : p)
    if (s.count(c)) return {"shared-llc-host", false, "pinnings overlap on cpu " + std::to_string(c)};
  const auto sib = llc_siblings(*p.begin());
  if (sib.empty()) return {"shared-llc-host", false, "last-level cache topology unavailable"};
  const std::set<int> llc(sib.begin(), sib.end());
  for (int c : p)
    if (!llc.count(c)) return {"shared-llc-host", false, "primary cpus span several last-level caches"};
  for (int c : s)
    if (!llc.count(c)) return {"shared-llc-host", false, "cpu " + std::to_string(c) + " does not share the LLC"};
  return {"shared-llc-host", true, "pinned groups share one last-level cache"};
}

}  // namespace interfere
