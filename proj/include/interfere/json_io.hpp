#pragma once

// nlohmann::json bindings for geometry and workload types. Field names mirror
// the C++ members one to one.

#include <string>

#include "json.hpp"

#include "interfere/error.hpp"
#include "interfere/geometry.hpp"
#include "interfere/patterns.hpp"

namespace interfere {

using json = nlohmann::json;

namespace detail {

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError(std::string(what) + ": unknown field '" + k + "'");
  }
}

}  // namespace detail

inline void to_json(json& j, const BitRange& r) { j = json{{"hi", r.hi}, {"lo", r.lo}}; }
inline void from_json(const json& j, BitRange& r) {
  detail::reject_unknown(j, {"hi", "lo"}, "bit range");
  j.at("hi").get_to(r.hi);
  j.at("lo").get_to(r.lo);
}

inline void to_json(json& j, const CacheGeometry& g) {
  j = json{{"name", g.name},
           {"line_size", g.line_size},
           {"num_banks", g.num_banks},
           {"sets_per_bank", g.sets_per_bank},
           {"associativity", g.associativity},
           {"bank_bits", g.bank_bits},
           {"set_bits", g.set_bits}};
}

// A "base" field names a preset whose values the remaining fields override.
inline void from_json(const json& j, CacheGeometry& g) {
  detail::reject_unknown(j,
                         {"base", "name", "line_size", "num_banks", "sets_per_bank", "associativity",
                          "bank_bits", "set_bits"},
                         "geometry");
  if (auto it = j.find("base"); it != j.end()) g = preset(it->get<std::string>());
  detail::get_opt(j, "name", g.name);
  detail::get_opt(j, "line_size", g.line_size);
  detail::get_opt(j, "num_banks", g.num_banks);
  detail::get_opt(j, "sets_per_bank", g.sets_per_bank);
  detail::get_opt(j, "associativity", g.associativity);
  detail::get_opt(j, "bank_bits", g.bank_bits);
  detail::get_opt(j, "set_bits", g.set_bits);
}

inline void to_json(json& j, const StridedWalk& p) {
  j = json{{"variant", "StridedWalk"},
           {"arena_bytes", p.arena_bytes},
           {"stride_bytes", p.stride_bytes},
           {"op_mix", to_string(p.op_mix)}};
}
inline void to_json(json& j, const SharedWalk& p) {
  j = json{{"variant", "SharedWalk"},         {"arena", p.arena},
           {"arena_bytes", p.arena_bytes},    {"stride_bytes", p.stride_bytes},
           {"start_offset", p.start_offset}, {"op_mix", to_string(p.op_mix)}};
}
inline void to_json(json& j, const StreamKernel& p) {
  j = json{{"variant", "StreamKernel"},
           {"kind", to_string(p.kind)},
           {"n_elems", p.n_elems},
           {"elem_bytes", p.elem_bytes},
           {"repetitions", p.repetitions}};
}
inline void to_json(json& j, const BucketSort& p) {
  j = json{{"variant", "BucketSort"},
           {"n_keys", p.n_keys},
           {"n_buckets", p.n_buckets},
           {"iterations", p.iterations},
           {"seed", p.seed}};
}

inline json pattern_to_json(const PatternSpec& p) {
  json j;
  std::visit([&](const auto& v) { to_json(j, v); }, p);
  return j;
}

inline PatternSpec pattern_from_json(const json& j) {
  const auto variant = j.at("variant").get<std::string>();
  auto op_mix = [&] {
    return j.contains("op_mix") ? parse_op_mix(j.at("op_mix").get<std::string>()) : OpMix::read_only;
  };
  if (variant == "StridedWalk") {
    detail::reject_unknown(j, {"variant", "arena_bytes", "stride_bytes", "op_mix"}, "StridedWalk");
    return StridedWalk{j.at("arena_bytes").get<std::uint64_t>(), j.at("stride_bytes").get<std::uint64_t>(),
                       op_mix()};
  }
  if (variant == "SharedWalk") {
    detail::reject_unknown(j, {"variant", "arena", "arena_bytes", "stride_bytes", "start_offset", "op_mix"},
                           "SharedWalk");
    return SharedWalk{j.at("arena").get<std::string>(), j.at("arena_bytes").get<std::uint64_t>(),
                      j.at("stride_bytes").get<std::uint64_t>(), j.value("start_offset", std::uint64_t{0}),
                      op_mix()};
  }
  if (variant == "StreamKernel") {
    detail::reject_unknown(j, {"variant", "kind", "n_elems", "elem_bytes", "repetitions"}, "StreamKernel");
    return StreamKernel{parse_stream_kind(j.at("kind").get<std::string>()), j.at("n_elems").get<std::uint64_t>(),
                        j.value("elem_bytes", std::uint64_t{8}), j.value("repetitions", std::uint64_t{1})};
  }
  if (variant == "BucketSort") {
    detail::reject_unknown(j, {"variant", "n_keys", "n_buckets", "iterations", "seed"}, "BucketSort");
    return BucketSort{j.at("n_keys").get<std::uint64_t>(), j.value("n_buckets", std::uint64_t{10}),
                      j.value("iterations", std::uint64_t{10}), j.value("seed", std::uint64_t{0})};
  }
  throw ConfigError("unknown pattern variant '" + variant + "'");
}

inline void to_json(json& j, const ThreadSpec& t) {
  j = json{{"pattern", pattern_to_json(t.pattern)},
           {"arena_base", t.arena_base},
           {"cpu_hint", t.cpu_hint ? json(*t.cpu_hint) : json(nullptr)}};
}
inline void from_json(const json& j, ThreadSpec& t) {
  detail::reject_unknown(j, {"pattern", "arena_base", "cpu_hint"}, "thread");
  t.pattern = pattern_from_json(j.at("pattern"));
  t.arena_base = j.value("arena_base", addr_t{0});
  t.cpu_hint.reset();
  if (auto it = j.find("cpu_hint"); it != j.end() && !it->is_null()) t.cpu_hint = it->get<int>();
}

inline void to_json(json& j, const WorkloadSpec& w) {
  j = json{{"name", w.name}, {"threads", w.threads}, {"shared_arenas", w.shared_arenas}};
}
inline void from_json(const json& j, WorkloadSpec& w) {
  detail::reject_unknown(j, {"name", "threads", "shared_arenas"}, "workload");
  j.at("name").get_to(w.name);
  w.threads = j.value("threads", std::vector<ThreadSpec>{});
  w.shared_arenas = j.value("shared_arenas", std::map<std::string, addr_t>{});
}

// Parses text into T, converting library exceptions into ConfigError.
template <typename T>
T parse_json_as(const std::string& text) {
  try {
    return json::parse(text).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace interfere
