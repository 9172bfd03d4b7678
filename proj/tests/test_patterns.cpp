#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "interfere/json_io.hpp"
#include "interfere/patterns.hpp"

using namespace interfere;

namespace {

std::vector<addr_t> addresses(const std::vector<AccessEvent>& v) {
  std::vector<addr_t> out;
  for (const auto& e : v) out.push_back(e.address);
  return out;
}

// Bucket sort trace written out as plain nested loops.
std::vector<AccessEvent> bucket_sort_reference(const BucketSort& s, addr_t base) {
  using namespace sort_layout;
  std::vector<AccessEvent> out;
  auto emit = [&](addr_t a, Op op) { out.push_back({0, a, op, out.size()}); };
  const addr_t keys = base, counters = base + round_up(4 * s.n_keys, 4096),
               output = counters + round_up(4 * s.n_buckets, 4096);
  std::vector<std::uint64_t> count(s.n_buckets, 0);
  for (std::uint64_t i = 0; i < s.n_keys; ++i) ++count[bucket_of(key_at(s.seed, i), s.n_buckets)];
  for (std::uint64_t it = 0; it < s.iterations; ++it) {
    for (std::uint64_t i = 0; i < s.n_keys; ++i) {
      emit(keys + 4 * i, Op::read);
      emit(counters + 4 * bucket_of(key_at(s.seed, i), s.n_buckets), Op::write);
    }
    for (std::uint64_t b = 0; b < s.n_buckets; ++b) emit(counters + 4 * b, Op::write);
    std::vector<std::uint64_t> next(s.n_buckets, 0);
    for (std::uint64_t b = 1; b < s.n_buckets; ++b) next[b] = next[b - 1] + count[b - 1];
    for (std::uint64_t i = 0; i < s.n_keys; ++i) {
      emit(keys + 4 * i, Op::read);
      emit(output + 4 * next[bucket_of(key_at(s.seed, i), s.n_buckets)]++, Op::write);
    }
  }
  return out;
}

bool inside_some_arena(const WorkloadSpec& w, addr_t a) {
  for (const auto& i : arenas_of(w))
    if (a >= i.base && a < i.end()) return true;
  return false;
}

}  // namespace

TEST(OffchipAntagonist, T1Configuration) {
  const auto g = preset("t1");
  const auto w = gen_offchip_antagonist(g, 15);
  ASSERT_EQ(w.threads.size(), 15u);
  for (const auto& t : w.threads) {
    const auto& p = std::get<StridedWalk>(t.pattern);
    EXPECT_EQ(p.arena_bytes, 2 * kMiB);
    EXPECT_EQ(p.stride_bytes, 256 * kKiB);
    EXPECT_EQ(p.op_mix, OpMix::read_only);
  }
  EXPECT_NO_THROW(validate_workload(w, g.line_size));
}

TEST(OffchipAntagonist, EachThreadTouchesEightLinesOfOneSet) {
  const auto g = preset("t1");
  const auto w = gen_offchip_antagonist(g, 15);
  const auto ev = expand(w, 8);
  for (const auto& thread : ev) {
    std::set<addr_t> lines;
    std::set<std::pair<std::uint64_t, std::uint64_t>> pairs;
    for (const auto& e : thread) {
      lines.insert(e.address / g.line_size);
      pairs.insert({bank_of(e.address, g), set_of(e.address, g)});
    }
    EXPECT_EQ(lines.size(), 8u);
    EXPECT_EQ(pairs.size(), 1u);
  }
}

TEST(OffchipAntagonist, SetConfinementOnEveryPreset) {
  for (const auto& name : preset_names()) {
    const auto g = preset(name);
    const auto w = gen_offchip_antagonist(g, 3, {.array_bytes = 8 * conflict_stride(g)});
    for (const auto& thread : expand(w, 100)) {
      const auto s0 = flat_set_of(thread.front().address, g);
      for (const auto& e : thread) ASSERT_EQ(flat_set_of(e.address, g), s0) << name;
    }
  }
}

TEST(OffchipAntagonist, SingleLineWhenArrayEqualsStride) {
  const auto g = preset("toy");
  const auto w = gen_offchip_antagonist(g, 1, {.array_bytes = conflict_stride(g)});
  const auto ev = expand(w, 10);
  ASSERT_EQ(ev[0].size(), 10u);
  for (const auto& e : ev[0]) EXPECT_EQ(e.address, ev[0][0].address);
}

TEST(OffchipAntagonist, StrictModeRejectsSetSpreadingStride) {
  const auto g = preset("t1");
  EXPECT_THROW(gen_offchip_antagonist(g, 1, {.stride_bytes = 128 * kKiB}), ConfigError);
  EXPECT_NO_THROW(gen_offchip_antagonist(g, 1, {.stride_bytes = 128 * kKiB, .strict = false}));
  EXPECT_THROW(gen_offchip_antagonist(g, 1, {.array_bytes = 3 * 100 * kKiB}), ConfigError);
  EXPECT_THROW(gen_offchip_antagonist(g, 0), ConfigError);
}

TEST(OnchipAntagonist, T1Offsets) {
  const auto g = preset("t1");
  const auto w = gen_onchip_antagonist(g, 15);
  ASSERT_EQ(w.threads.size(), 15u);
  ASSERT_EQ(w.shared_arenas.size(), 1u);
  for (std::uint64_t t = 0; t < 15; ++t) {
    const auto& p = std::get<SharedWalk>(w.threads[t].pattern);
    EXPECT_EQ(p.arena_bytes, 3 * kMiB);
    EXPECT_EQ(p.stride_bytes, 64u);
    EXPECT_EQ(p.start_offset, (t * 3 * kMiB / 15) / 64 * 64);
    EXPECT_EQ(w.threads[t].arena_base, w.shared_arenas.at(p.arena));
  }
  EXPECT_NO_THROW(validate_workload(w));
}

TEST(OnchipAntagonist, ToyOffsets) {
  const auto w = gen_onchip_antagonist(preset("toy"), 2);
  EXPECT_EQ(std::get<SharedWalk>(w.threads[0].pattern).arena_bytes, 4096u);
  EXPECT_EQ(std::get<SharedWalk>(w.threads[0].pattern).start_offset, 0u);
  EXPECT_EQ(std::get<SharedWalk>(w.threads[1].pattern).start_offset, 2048u);
}

TEST(OnchipAntagonist, SingleThreadStartsAtZero) {
  for (const auto& name : preset_names()) {
    const auto w = gen_onchip_antagonist(preset(name), 1);
    EXPECT_EQ(std::get<SharedWalk>(w.threads[0].pattern).start_offset, 0u);
  }
}

TEST(OnchipAntagonist, FullPassFillsEverySetWithAssociativityLines) {
  const auto g = preset("toy");
  for (std::uint64_t n = 1; n <= 5; ++n) {
    const auto w = gen_onchip_antagonist(g, n);
    const auto ev = expand(w, g.capacity() / g.line_size);
    for (const auto& thread : ev) {
      std::map<std::pair<std::uint64_t, std::uint64_t>, std::set<addr_t>> lines;
      std::map<std::pair<std::uint64_t, std::uint64_t>, int> touches;
      for (const auto& e : thread) {
        lines[{bank_of(e.address, g), set_of(e.address, g)}].insert(e.address / g.line_size);
        ++touches[{bank_of(e.address, g), set_of(e.address, g)}];
      }
      ASSERT_EQ(lines.size(), g.total_sets());
      for (const auto& [k, v] : lines) ASSERT_EQ(v.size(), g.associativity);
      for (const auto& [k, v] : touches) ASSERT_EQ(v, static_cast<int>(g.associativity));
    }
  }
}

TEST(SameDieAntagonist, Configurations) {
  const auto g = preset("harpertown");
  const auto one = gen_xeon_samedie_antagonist(g, 1);
  ASSERT_EQ(one.threads.size(), 1u);
  EXPECT_EQ(std::get<StridedWalk>(one.threads[0].pattern).arena_bytes, 64 * kMiB);
  EXPECT_EQ(std::get<StridedWalk>(one.threads[0].pattern).stride_bytes, 64u);
  const auto two = gen_xeon_samedie_antagonist(g, 2);
  EXPECT_EQ(two.threads.size(), 2u);
  EXPECT_NO_THROW(validate_workload(two));
  EXPECT_EQ(footprint(one, g), 4096u);
}

TEST(Stream, CopyOfFourElements) {
  const auto w = gen_stream(StreamKind::copy, 4);
  const auto ev = expand(w, 100)[0];
  const auto& k = std::get<StreamKernel>(w.threads[0].pattern);
  const addr_t a = stream_layout::offset_a(k), c = stream_layout::offset_c(k);
  const std::vector<AccessEvent> want{{0, a + 0, Op::read, 0},   {0, c + 0, Op::write, 1},
                                      {0, a + 8, Op::read, 2},   {0, c + 8, Op::write, 3},
                                      {0, a + 16, Op::read, 4},  {0, c + 16, Op::write, 5},
                                      {0, a + 24, Op::read, 6},  {0, c + 24, Op::write, 7}};
  EXPECT_EQ(ev, want);
}

TEST(Stream, KernelsMatchTheirDefinitions) {
  struct Case {
    StreamKind kind;
    std::vector<std::pair<int, Op>> ops;  // array index (a=0,b=1,c=2) per event of an element
  };
  const std::vector<Case> cases{
      {StreamKind::copy, {{0, Op::read}, {2, Op::write}}},
      {StreamKind::scale, {{2, Op::read}, {1, Op::write}}},
      {StreamKind::add, {{0, Op::read}, {1, Op::read}, {2, Op::write}}},
      {StreamKind::triad, {{1, Op::read}, {2, Op::read}, {0, Op::write}}},
  };
  for (const auto& c : cases) {
    const std::uint64_t n = 37;
    const auto w = gen_stream(c.kind, n, 1, 8192);
    const auto& k = std::get<StreamKernel>(w.threads[0].pattern);
    const addr_t arrays[3] = {8192 + stream_layout::offset_a(k), 8192 + stream_layout::offset_b(k),
                              8192 + stream_layout::offset_c(k)};
    std::vector<AccessEvent> want;
    for (std::uint64_t i = 0; i < n; ++i)
      for (const auto& [arr, op] : c.ops) want.push_back({0, arrays[arr] + 8 * i, op, want.size()});
    EXPECT_EQ(expand(w, 1000)[0], want) << to_string(c.kind);
  }
}

TEST(Stream, EventCounts) {
  EXPECT_EQ(expand(gen_stream(StreamKind::triad, 100), 1000)[0].size(), 300u);
  EXPECT_EQ(expand(gen_stream(StreamKind::copy, 100), 1000)[0].size(), 200u);
  EXPECT_EQ(expand(gen_stream(StreamKind::triad, 100, 3), 10000)[0].size(), 900u);
  EXPECT_TRUE(expand(gen_stream(StreamKind::add, 0), 10)[0].empty());
}

TEST(Stream, ArraysAreDisjoint) {
  const StreamKernel k{StreamKind::triad, 1000, 8, 1};
  EXPECT_GE(stream_layout::offset_b(k), 8000u);
  EXPECT_GE(stream_layout::offset_c(k) - stream_layout::offset_b(k), 8000u);
  EXPECT_EQ(stream_layout::bytes_per_elem(StreamKind::copy), 16u);
  EXPECT_EQ(stream_layout::bytes_per_elem(StreamKind::triad), 24u);
}

TEST(BucketSort, ClassBAndClassCSizes) {
  const auto isb = gen_bucket_sort(1ULL << 25);
  const auto& b = std::get<BucketSort>(isb.threads[0].pattern);
  EXPECT_EQ(b.n_keys, 33554432u);
  EXPECT_EQ(b.n_buckets, 10u);
  EXPECT_EQ(b.iterations, 10u);
  EXPECT_EQ(std::get<BucketSort>(gen_bucket_sort(1ULL << 27).threads[0].pattern).n_keys, 134217728u);
  // Lazy expansion does not materialize the key array.
  EXPECT_EQ(expand(isb, 4)[0].size(), 4u);
}

TEST(BucketSort, DeterministicForSeed) {
  const auto a = expand(gen_bucket_sort(8, 2, 10, 1), 1000);
  const auto b = expand(gen_bucket_sort(8, 2, 10, 1), 1000);
  EXPECT_EQ(a, b);
  const auto c = expand(gen_bucket_sort(64, 2, 1, 2), 1000);
  const auto d = expand(gen_bucket_sort(64, 2, 1, 3), 1000);
  EXPECT_NE(c, d);
}

TEST(BucketSort, MatchesDirectReference) {
  for (std::uint64_t n : {0, 1, 2, 8, 33, 100}) {
    for (std::uint64_t buckets : {1, 2, 10}) {
      const BucketSort s{n, buckets, 3, 42 + n};
      const auto w = gen_bucket_sort(s.n_keys, s.n_buckets, s.iterations, s.seed, 4096);
      const auto got = expand(w, 1'000'000)[0];
      const auto want = bucket_sort_reference(s, 4096);
      ASSERT_EQ(got.size(), s.iterations * (n + n + buckets + 2 * n));
      ASSERT_EQ(got, want) << n << " keys, " << buckets << " buckets";
    }
  }
}

TEST(BucketSort, PermuteWritesEverySlotOnceInBucketOrder) {
  const BucketSort s{500, 10, 1, 9};
  const auto w = gen_bucket_sort(s.n_keys, s.n_buckets, 1, s.seed);
  const auto ev = expand(w, 1'000'000)[0];
  const addr_t out = sort_layout::offset_output(s);
  std::vector<int> slot(s.n_keys, 0);
  std::vector<std::uint64_t> bucket_at(s.n_keys);
  for (std::uint64_t i = 0, k = 0; i < ev.size(); ++i) {
    if (ev[i].op == Op::write && ev[i].address >= out) {
      const auto pos = (ev[i].address - out) / 4;
      ++slot[pos];
      bucket_at[pos] = sort_layout::bucket_of(sort_layout::key_at(s.seed, k++), s.n_buckets);
    }
  }
  for (int c : slot) ASSERT_EQ(c, 1);
  EXPECT_TRUE(std::is_sorted(bucket_at.begin(), bucket_at.end()));
}

TEST(Expand, StridedWalkWraps) {
  const WorkloadSpec w{"w", {{StridedWalk{1024, 256, OpMix::read_only}, 0, {}}}, {}};
  EXPECT_EQ(addresses(expand(w, 5)[0]), (std::vector<addr_t>{0, 256, 512, 768, 0}));
  EXPECT_TRUE(expand(w, 0)[0].empty());
}

TEST(Expand, SharedWalkWrapsFromOffset) {
  const WorkloadSpec w{"w", {{SharedWalk{"s", 4096, 64, 4032, OpMix::read_only}, 0, {}}}, {{"s", 0}}};
  EXPECT_EQ(addresses(expand(w, 3)[0]), (std::vector<addr_t>{4032, 0, 64}));
}

TEST(Expand, OpMixes) {
  const WorkloadSpec w{"w",
                       {{StridedWalk{1024, 256, OpMix::write_only}, 0, {}},
                        {StridedWalk{1024, 256, OpMix::alternating}, 4096, {}}},
                       {}};
  const auto ev = expand(w, 4);
  for (const auto& e : ev[0]) EXPECT_EQ(e.op, Op::write);
  EXPECT_EQ(ev[1][0].op, Op::read);
  EXPECT_EQ(ev[1][1].op, Op::write);
  EXPECT_EQ(ev[1][2].op, Op::read);
  EXPECT_EQ(ev[1][1].thread, 1u);
  EXPECT_EQ(ev[1][3].seq, 3u);
}

TEST(Expand, DeterministicAndInsideArenas) {
  const auto g = preset("toy");
  const std::vector<WorkloadSpec> ws{gen_offchip_antagonist(g, 3, {.array_bytes = 4096}),
                                     gen_onchip_antagonist(g, 3), gen_stream(StreamKind::add, 50, 2),
                                     gen_bucket_sort(40, 3, 2, 5), gen_xeon_samedie_antagonist(g, 2)};
  for (const auto& w : ws) {
    const auto a = expand(w, 2000), b = expand(w, 2000);
    EXPECT_EQ(a, b) << w.name;
    for (const auto& thread : a)
      for (const auto& e : thread) ASSERT_TRUE(inside_some_arena(w, e.address)) << w.name;
  }
}

TEST(Footprint, Examples) {
  const auto t1 = preset("t1");
  EXPECT_EQ(footprint(gen_offchip_antagonist(t1, 1), t1), 1u);
  EXPECT_EQ(footprint(gen_offchip_antagonist(t1, 15), t1), 1u);
  EXPECT_EQ(footprint(gen_onchip_antagonist(t1, 15), t1), 4096u);
  EXPECT_EQ(footprint(WorkloadSpec{"empty", {}, {}}, t1), 0u);
}

TEST(Workload, PrivateArenasAreDisjoint) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = preset(preset_names()[rng() % 4]);
    const std::uint64_t n = 1 + rng() % 16;
    const auto w = (trial % 2) ? gen_offchip_antagonist(g, n, {.array_bytes = conflict_stride(g) * (1 + rng() % 8)})
                               : gen_xeon_samedie_antagonist(g, n);
    const auto iv = arenas_of(w);
    for (std::size_t i = 0; i < iv.size(); ++i)
      for (std::size_t j = i + 1; j < iv.size(); ++j) ASSERT_FALSE(overlaps(iv[i], iv[j]));
  }
}

TEST(Workload, ValidationErrors) {
  WorkloadSpec w{"w", {{StridedWalk{1024, 256, OpMix::read_only}, 32, {}}}, {}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // misaligned base

  w = {"w", {{StridedWalk{1000, 256, OpMix::read_only}, 0, {}}}, {}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // arena not a stride multiple

  w = {"w", {{StridedWalk{1024, 32, OpMix::read_only}, 0, {}}}, {}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // stride below a line

  w = {"w", {{SharedWalk{"s", 4096, 64, 4096, OpMix::read_only}, 0, {}}}, {{"s", 0}}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // offset outside

  w = {"w", {{SharedWalk{"s", 4096, 64, 0, OpMix::read_only}, 0, {}}}, {}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // unknown shared arena

  w = {"w", {{SharedWalk{"s", 4096, 64, 0, OpMix::read_only}, 64, {}}}, {{"s", 0}}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // base differs from shared arena

  w = {"w",
       {{StridedWalk{4096, 256, OpMix::read_only}, 0, {}}, {StridedWalk{4096, 256, OpMix::read_only}, 2048, {}}},
       {}};
  EXPECT_THROW(validate_workload(w), ConfigError);  // overlap
}

TEST(Workload, JsonRoundTrip) {
  const auto g = preset("t1");
  auto off = gen_offchip_antagonist(g, 4, {.op_mix = OpMix::alternating});
  off.threads[2].cpu_hint = 5;
  const std::vector<WorkloadSpec> ws{off, gen_onchip_antagonist(g, 3, 8 * kMiB), gen_stream(StreamKind::scale, 99, 4),
                                     gen_bucket_sort(1000, 7, 3, 123), WorkloadSpec{"empty", {}, {}}};
  for (const auto& w : ws) {
    const json j = w;
    EXPECT_EQ(j.get<WorkloadSpec>(), w) << j.dump();
    EXPECT_EQ(parse_json_as<WorkloadSpec>(j.dump()), w);
  }
  EXPECT_THROW(parse_json_as<WorkloadSpec>(R"({"name":"x","threads":[{"pattern":{"variant":"Nope"}}]})"),
               ConfigError);
}
