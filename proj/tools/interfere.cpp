// interfere: build antagonist workloads, simulate shared-cache interference,
// and measure it natively.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "interfere/experiment.hpp"
#include "interfere/geometry.hpp"
#include "interfere/json_io.hpp"
#include "interfere/native.hpp"
#include "interfere/patterns.hpp"
#include "interfere/simulator.hpp"

namespace fs = std::filesystem;
using namespace interfere;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitHwCheck = 3;

struct Globals {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

struct NativeFlags {
  std::optional<double> duration;
  std::string pin;
  bool hugepages = false;
  std::optional<double> noise_band;
  bool skip_hw_checks = false;
};

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

void print_geometry(const CacheGeometry& g) {
  std::cout << "name:           " << g.name << "\n"
            << "line_size:      " << g.line_size << " B\n"
            << "num_banks:      " << g.num_banks << "\n"
            << "sets_per_bank:  " << g.sets_per_bank << "\n"
            << "associativity:  " << g.associativity << "-way\n";
  if (g.num_banks > 1) std::cout << "bank_bits:      " << g.bank_bits.hi << ":" << g.bank_bits.lo << "\n";
  std::cout << "set_bits:       " << g.set_bits.hi << ":" << g.set_bits.lo << "\n"
            << "capacity:       " << g.capacity() << " B (" << fmt_fixed(double(g.capacity()) / kMiB, 2) << " MiB)\n"
            << "conflict_stride: " << conflict_stride(g) << " B\n";
}

int cmd_preset(const std::string& name, const Globals& gl) {
  if (name == "list") {
    for (const auto& n : preset_names()) std::cout << n << "\n";
    return kExitOk;
  }
  const auto g = validate_geometry(preset(name));
  if (gl.format == "json")
    std::cout << json(g).dump(2) << "\n";
  else
    print_geometry(g);
  return kExitOk;
}

struct GenFlags {
  std::string generator;
  std::string geometry = "t1";
  std::string from;
  std::uint64_t threads = 1;
  std::uint64_t limit = 64;
  std::string kind = "triad";
  std::uint64_t n_elems = 1024;
  std::uint64_t repetitions = 1;
  std::uint64_t n_keys = 1024;
  std::uint64_t n_buckets = 10;
  std::uint64_t iterations = 10;
  std::uint64_t array_bytes = 2 * kMiB;
  std::uint64_t stride_bytes = 0;
  std::string op_mix = "read-only";
};

int cmd_gen(const GenFlags& f, const Globals& gl, bool out_given) {
  WorkloadSpec w;
  if (!f.from.empty()) {
    std::ifstream in(f.from);
    if (!in) throw ConfigError("cannot open " + f.from);
    std::stringstream ss;
    ss << in.rdbuf();
    w = parse_json_as<WorkloadSpec>(ss.str());
    validate_workload(w);
  } else {
    const auto g = preset(f.geometry);
    const std::uint64_t seed = gl.seed.value_or(0);
    if (f.generator == "offchip") {
      w = gen_offchip_antagonist(g, f.threads, {f.array_bytes, f.stride_bytes, parse_op_mix(f.op_mix)});
    } else if (f.generator == "onchip") {
      w = gen_onchip_antagonist(g, f.threads, 0, "harm.on-chip", parse_op_mix(f.op_mix));
    } else if (f.generator == "samedie") {
      w = gen_xeon_samedie_antagonist(g, f.threads);
    } else if (f.generator == "stream") {
      w = gen_stream(parse_stream_kind(f.kind), f.n_elems, f.repetitions);
    } else if (f.generator == "bucket-sort") {
      w = gen_bucket_sort(f.n_keys, f.n_buckets, f.iterations, seed);
    } else {
      throw ConfigError("unknown generator '" + f.generator + "'");
    }
  }
  std::string text;
  if (gl.format == "json") {
    text = json(w).dump(2) + "\n";
  } else {
    std::ostringstream os;
    write_trace_csv(os, expand(w, f.limit));
    text = os.str();
  }
  if (out_given) {
    const auto p = fs::path(gl.out_dir) / (gl.format == "json" ? "workload.json" : "trace.csv");
    write_file(p, text);
    std::cerr << "wrote " << p.string() << "\n";
  } else {
    std::cout << text;
  }
  return kExitOk;
}

ExperimentConfig load(const std::string& path, const Globals& gl, bool out_given) {
  auto e = load_experiment(path, gl.seed);
  if (out_given) e.out_dir = gl.out_dir;
  return e;
}

void apply_native_flags(ExperimentConfig& e, const NativeFlags& nf) {
  if (nf.duration) e.native.duration_s = *nf.duration;
  if (nf.hugepages) e.native.hugepages = true;
  if (nf.noise_band) e.native.noise_band_pct = *nf.noise_band;
  if (!nf.pin.empty()) apply_pins(e, parse_cpu_list(nf.pin));
  validate_experiment(e);
}

int cmd_sim(const std::string& path, const Globals& gl, bool out_given) {
  const auto e = load(path, gl, out_given);
  std::vector<WorkloadSpec> all{e.primary};
  all.insert(all.end(), e.secondaries.begin(), e.secondaries.end());
  const auto r = simulate(all, e.sim);
  const bool as_json = gl.format == "json";
  const auto p = fs::path(e.out_dir) / (as_json ? "sim_results.json" : "sim_results.csv");
  write_file(p, as_json ? sim_result_json(r) : sim_result_csv(r));
  std::cout << sim_result_csv(r);
  std::cerr << "wrote " << p.string() << "\n";
  return kExitOk;
}

void run_sim_report(const ExperimentConfig& e, const Globals& gl) {
  const auto rows = interference_report(e.primary, e.secondaries, e.sim);
  const bool as_json = gl.format == "json";
  const auto p = fs::path(e.out_dir) / (as_json ? "sim_report.json" : "sim_report.csv");
  write_file(p, as_json ? sim_report_json(rows) : sim_report_csv(rows));
  std::cout << "simulated interference on " << e.geometry.name << " (primary normalized to idle secondary)\n"
            << summary_table(rows);
  std::cerr << "wrote " << p.string() << "\n";
}

// Returns false when a hardware check failed.
bool run_native_report(const ExperimentConfig& e, const Globals& gl, const NativeFlags& nf) {
  const auto opt = e.native.options();
  const auto rows = native_interference_report(e.primary, e.secondaries, opt, e.native.repeats);

  std::vector<HwCheck> checks;
  if (!nf.skip_hw_checks) {
    const auto host = host_info();
    checks.push_back({"multicore-host", host.logical_cpus >= 2,
                      std::to_string(host.logical_cpus) + " logical CPU(s) available"});
    checks.push_back(check_idle_baseline(e.primary, opt, e.native.noise_band_pct));
    for (const auto& name : e.native.expect_degradation) {
      const auto it = std::find_if(e.secondaries.begin(), e.secondaries.end(),
                                   [&](const WorkloadSpec& s) { return s.name == name; });
      auto topo = check_shared_llc_host(e.primary, *it);
      topo.name += ":" + name;
      checks.push_back(topo);
      const auto row = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.secondary == name; });
      const double loss = 100.0 * (1.0 - row->normalized);
      checks.push_back({"degradation:" + name, loss >= e.native.min_degradation_pct,
                        "primary bandwidth loss " + fmt_fixed(loss, 1) + "% (required " +
                            fmt_fixed(e.native.min_degradation_pct, 1) + "%)"});
    }
  }

  std::string body = gl.format == "json" ? native_report_json(rows) : native_report_csv(rows);
  std::string header;
  if (gl.format != "json") {
    if (nf.skip_hw_checks) header = "# hw_checks: skipped (--skip-hw-checks)\n";
    for (const auto& c : checks) header += "# hw_check " + c.name + ": " + (c.passed ? "pass" : "FAIL") + "\n";
  }
  const auto p = fs::path(e.out_dir) / (gl.format == "json" ? "native_report.json" : "native_report.csv");
  write_file(p, header + body);
  std::cout << "native interference (primary bandwidth normalized to idle secondary)\n" << summary_table(rows);
  std::cerr << "wrote " << p.string() << "\n";

  bool ok = true;
  if (nf.skip_hw_checks) std::cerr << "hardware checks SKIPPED (--skip-hw-checks)\n";
  for (const auto& c : checks) {
    std::cerr << "hardware check " << c.name << ": " << (c.passed ? "pass" : "FAIL") << " - " << c.detail << "\n";
    ok = ok && c.passed;
  }
  return ok;
}

int cmd_run(const std::string& path, const std::string& mode, const Globals& gl, const NativeFlags& nf,
            bool out_given) {
  auto e = load(path, gl, out_given);
  apply_native_flags(e, nf);
  write_file(fs::path(e.out_dir) / "experiment.json", experiment_to_json(e).dump(2) + "\n");
  bool hw_ok = true;
  if (mode == "sim" || mode == "both") run_sim_report(e, gl);
  if (mode == "native" || mode == "both") hw_ok = run_native_report(e, gl, nf);
  return hw_ok ? kExitOk : kExitHwCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cache and memory-bandwidth interference toolkit"};
  app.require_subcommand(1);
  Globals gl;
  std::uint64_t seed = 0;
  auto* out_opt = app.add_option("--out", gl.out_dir, "Output directory")->type_name("DIR");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("--format", gl.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.fallthrough();

  std::string preset_name;
  auto* preset_cmd = app.add_subcommand("preset", "Show a built-in geometry or `list` them");
  preset_cmd->add_option("name", preset_name, "Preset name or `list`")->required();

  GenFlags gf;
  auto* gen_cmd = app.add_subcommand("gen", "Emit an access trace (CSV) or workload (JSON)");
  gen_cmd->add_option("generator", gf.generator, "offchip | onchip | samedie | stream | bucket-sort");
  gen_cmd->add_option("--from", gf.from, "Expand a workload JSON file instead of a generator");
  gen_cmd->add_option("--geometry", gf.geometry, "Geometry preset");
  gen_cmd->add_option("--threads", gf.threads, "Thread count for antagonists");
  gen_cmd->add_option("--limit", gf.limit, "Events per thread");
  gen_cmd->add_option("--kind", gf.kind, "STREAM kernel: copy | scale | add | triad");
  gen_cmd->add_option("--n-elems", gf.n_elems, "STREAM elements per array");
  gen_cmd->add_option("--repetitions", gf.repetitions, "STREAM kernel repetitions");
  gen_cmd->add_option("--n-keys", gf.n_keys, "Bucket sort key count");
  gen_cmd->add_option("--n-buckets", gf.n_buckets, "Bucket sort bucket count");
  gen_cmd->add_option("--iterations", gf.iterations, "Bucket sort iterations");
  gen_cmd->add_option("--array-bytes", gf.array_bytes, "Off-chip antagonist private array size");
  gen_cmd->add_option("--stride-bytes", gf.stride_bytes, "Off-chip antagonist stride (0 = conflict stride)");
  gen_cmd->add_option("--op-mix", gf.op_mix, "read-only | write-only | read-write");

  std::string config;
  auto* sim_cmd = app.add_subcommand("sim", "Co-run every workload of an experiment in the simulator");
  sim_cmd->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);

  NativeFlags nf;
  double duration = 0, noise = 0;
  auto add_native_flags = [&](CLI::App* c) {
    c->add_option("--duration", duration, "Seconds per native run");
    c->add_option("--pin", nf.pin, "CPU list: primary threads first, secondaries share the rest");
    c->add_flag("--hugepages", nf.hugepages, "Request transparent huge pages for arenas");
    c->add_option("--noise-band", noise, "Idle-baseline tolerance in percent");
    c->add_flag("--skip-hw-checks", nf.skip_hw_checks, "Skip host hardware checks (reported)");
  };
  auto* native_cmd = app.add_subcommand("native", "Native interference report for an experiment");
  native_cmd->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  add_native_flags(native_cmd);

  std::string mode = "sim";
  auto* run_cmd = app.add_subcommand("run", "Run an experiment in the simulator, natively, or both");
  run_cmd->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--mode", mode, "sim | native | both")->check(CLI::IsMember({"sim", "native", "both"}));
  add_native_flags(run_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (*seed_opt) gl.seed = seed;
  const bool out_given = out_opt->count() > 0;
  for (auto* c : {native_cmd, run_cmd}) {
    if (c->count("--duration")) nf.duration = duration;
    if (c->count("--noise-band")) nf.noise_band = noise;
  }

  try {
    if (*preset_cmd) return cmd_preset(preset_name, gl);
    if (*gen_cmd) {
      if (gf.generator.empty() && gf.from.empty()) throw ConfigError("gen needs a generator or --from");
      return cmd_gen(gf, gl, out_given);
    }
    if (*sim_cmd) return cmd_sim(config, gl, out_given);
    if (*native_cmd) return cmd_run(config, "native", gl, nf, out_given);
    if (*run_cmd) return cmd_run(config, mode, gl, nf, out_given);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
