#include <gtest/gtest.h>

#include <filesystem>

#include "interfere/experiment.hpp"

using namespace interfere;
namespace fs = std::filesystem;

namespace {

json minimal() {
  return json::parse(R"({
    "geometry": "toy",
    "primary": {"name": "primary", "generator": "stream", "kind": "copy", "n_elems": 64},
    "secondaries": [
      {"name": "a", "generator": "offchip_antagonist", "threads": 2, "array_bytes": 4096},
      {"name": "b", "generator": "onchip_antagonist", "threads": 2}
    ],
    "sim": {"per_thread_event_budget": 500}
  })");
}

}  // namespace

TEST(Experiment, ParsesAndPlacesSecondariesAfterPrimary) {
  const auto e = experiment_from_json(minimal());
  EXPECT_EQ(e.geometry, preset("toy"));
  EXPECT_EQ(e.sim.geometry, preset("toy"));
  EXPECT_EQ(e.sim.per_thread_event_budget, 500u);
  EXPECT_EQ(e.sim.hit_latency, SimConfig{}.hit_latency);
  ASSERT_EQ(e.secondaries.size(), 2u);
  for (const auto& s : e.secondaries)
    for (const auto& a : arenas_of(s)) EXPECT_GE(a.base, kPlacementAlign);
}

TEST(Experiment, EveryBundledConfigRoundTrips) {
  int n = 0;
  for (const auto& f : fs::directory_iterator(INTERFERE_EXPERIMENTS)) {
    if (f.path().extension() != ".json") continue;
    const auto e = load_experiment(f.path().string());
    const json j = experiment_to_json(e);
    EXPECT_EQ(experiment_from_json(json::parse(j.dump())), e) << f.path();
    ++n;
  }
  EXPECT_GE(n, 4);
}

TEST(Experiment, RoundTripKeepsPinsAndNativeOptions) {
  auto j = minimal();
  j["secondaries"][0]["cpus"] = "1,3";
  j["native"] = {{"duration_s", 0.5}, {"repeats", 5}, {"expect_degradation", {"a"}}};
  j["seed"] = 42;
  const auto e = experiment_from_json(j);
  EXPECT_EQ(e.secondaries[0].threads[0].cpu_hint, 1);
  EXPECT_EQ(e.secondaries[0].threads[1].cpu_hint, 3);
  EXPECT_EQ(e.native.repeats, 5u);
  EXPECT_EQ(experiment_from_json(experiment_to_json(e)), e);
}

TEST(Experiment, SeedOverrideFeedsBucketSort) {
  auto j = minimal();
  j["secondaries"].push_back({{"name", "is"}, {"generator", "bucket_sort"}, {"n_keys", 100}});
  const auto a = experiment_from_json(j, 5), b = experiment_from_json(j, 6);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_NE(std::get<BucketSort>(a.secondaries[2].threads[0].pattern).seed,
            std::get<BucketSort>(b.secondaries[2].threads[0].pattern).seed);
  EXPECT_EQ(experiment_from_json(j, 5), a);
}

TEST(Experiment, InvalidConfigs) {
  auto dup = minimal();
  dup["secondaries"][1]["name"] = "a";
  EXPECT_THROW(experiment_from_json(dup), ConfigError);

  auto reserved = minimal();
  reserved["secondaries"][0]["name"] = "idle";
  EXPECT_THROW(experiment_from_json(reserved), ConfigError);

  auto unnamed = minimal();
  unnamed["primary"]["name"] = "victim";
  EXPECT_THROW(experiment_from_json(unnamed), ConfigError);

  auto bad_preset = minimal();
  bad_preset["geometry"] = "t3";
  EXPECT_THROW(experiment_from_json(bad_preset), ConfigError);

  auto unknown_key = minimal();
  unknown_key["simulation"] = json::object();
  EXPECT_THROW(experiment_from_json(unknown_key), ConfigError);

  auto bad_gen = minimal();
  bad_gen["secondaries"][0]["generator"] = "nope";
  EXPECT_THROW(experiment_from_json(bad_gen), ConfigError);

  auto bad_type = minimal();
  bad_type["sim"]["hit_latency"] = "fast";
  EXPECT_THROW(experiment_from_json(bad_type), ConfigError);

  auto bad_expect = minimal();
  bad_expect["native"] = {{"expect_degradation", {"zzz"}}};
  EXPECT_THROW(experiment_from_json(bad_expect), ConfigError);

  EXPECT_THROW(load_experiment("/nonexistent/x.json"), ConfigError);
}

TEST(Experiment, ApplyPins) {
  auto e = experiment_from_json(minimal());
  apply_pins(e, {0, 1, 2});
  EXPECT_EQ(e.primary.threads[0].cpu_hint, 0);
  EXPECT_EQ(e.secondaries[0].threads[0].cpu_hint, 1);
  EXPECT_EQ(e.secondaries[0].threads[1].cpu_hint, 2);
  EXPECT_EQ(e.secondaries[1].threads[0].cpu_hint, 1);
  auto f = experiment_from_json(minimal());
  EXPECT_THROW(apply_pins(f, {0}), ConfigError);
}

TEST(Reports, SimCsvColumnsAndOrder) {
  const auto e = experiment_from_json(minimal());
  const auto rows = interference_report(e.primary, e.secondaries, e.sim);
  const auto csv = sim_report_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kSimCsvHeader);
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    labels.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8) << line;
  }
  EXPECT_EQ(labels, (std::vector<std::string>{"idle", "a", "b"}));
  EXPECT_NE(csv.find("idle,"), std::string::npos);
  EXPECT_NE(csv.find(",1.000000\n"), std::string::npos);
}

TEST(Reports, CsvRowFormatting) {
  WorkloadMetrics m;
  m.accesses = 2000;
  m.hits = 1999;
  m.misses = 1;
  m.mpka = 0.5;
  m.lines_fetched = 1;
  m.elapsed_cycles = 123;
  m.bandwidth_share = 1.0 / 3.0;
  m.normalized_performance = 0.75;
  EXPECT_EQ(csv_row("x", m), "x,2000,1999,1,0.500,1,123,0.333333,0.750000");
}

TEST(Reports, JsonReportsParse) {
  const auto e = experiment_from_json(minimal());
  const auto rows = interference_report(e.primary, e.secondaries, e.sim);
  const auto j = json::parse(sim_report_json(rows));
  ASSERT_EQ(j.size(), 3u);
  EXPECT_EQ(j[0]["workload"], "idle");
  EXPECT_EQ(j[0]["normalized_performance"], 1.0);
}

TEST(Reports, TraceCsv) {
  std::ostringstream os;
  write_trace_csv(os, expand(gen_stream(StreamKind::copy, 2), 10));
  EXPECT_EQ(os.str(), "thread,seq,op,address\n0,0,read,0x0\n0,1,write,0x2000\n0,2,read,0x8\n0,3,write,0x2008\n");
}
