#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "interfere/error.hpp"

namespace interfere {

using addr_t = std::uint64_t;

// Inclusive bit field [hi:lo] of a physical address, LSB = bit 0.
struct BitRange {
  unsigned hi = 0;
  unsigned lo = 0;

  constexpr unsigned width() const { return hi - lo + 1; }
  constexpr addr_t extract(addr_t a) const {
    return (a >> lo) & ((addr_t{1} << width()) - 1);
  }
  friend constexpr bool operator==(const BitRange&, const BitRange&) = default;
};

// Banked set-associative cache. Address layout, from LSB up:
// line offset | bank field | set field | tag.
// A single-bank cache has no bank field and bank_bits is ignored.
struct CacheGeometry {
  std::string name;
  std::uint64_t line_size = 64;
  std::uint64_t num_banks = 1;
  std::uint64_t sets_per_bank = 1;
  std::uint64_t associativity = 1;
  BitRange bank_bits{};
  BitRange set_bits{};

  std::uint64_t total_sets() const { return num_banks * sets_per_bank; }
  std::uint64_t capacity() const { return line_size * num_banks * sets_per_bank * associativity; }
  unsigned offset_bits() const { return static_cast<unsigned>(std::countr_zero(line_size)); }

  friend bool operator==(const CacheGeometry&, const CacheGeometry&) = default;
};

namespace detail {

inline bool is_pow2(std::uint64_t v) { return v != 0 && std::has_single_bit(v); }

inline void check_range(const BitRange& r, const char* what) {
  if (r.hi < r.lo) throw ConfigError(std::string(what) + ": hi < lo");
  if (r.width() > 48) throw ConfigError(std::string(what) + ": wider than 48 bits");
  if (r.hi >= 64) throw ConfigError(std::string(what) + ": hi beyond bit 63");
}

inline bool mul_overflows(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

}  // namespace detail

// Returns g unchanged when every layout invariant holds, throws ConfigError otherwise.
inline const CacheGeometry& validate_geometry(const CacheGeometry& g) {
  const std::string who = "geometry '" + g.name + "'";
  if (!detail::is_pow2(g.line_size)) throw ConfigError(who + ": line_size must be a power of two");
  if (!detail::is_pow2(g.num_banks)) throw ConfigError(who + ": num_banks must be a power of two");
  if (!detail::is_pow2(g.sets_per_bank))
    throw ConfigError(who + ": sets_per_bank must be a power of two");
  if (g.associativity < 1) throw ConfigError(who + ": associativity must be >= 1");

  detail::check_range(g.set_bits, "set_bits");
  if ((std::uint64_t{1} << g.set_bits.width()) != g.sets_per_bank)
    throw ConfigError(who + ": set_bits width does not match sets_per_bank");

  const unsigned off = g.offset_bits();
  if (g.num_banks > 1) {
    detail::check_range(g.bank_bits, "bank_bits");
    if ((std::uint64_t{1} << g.bank_bits.width()) != g.num_banks)
      throw ConfigError(who + ": bank_bits width does not match num_banks");
    if (g.bank_bits.lo != off) throw ConfigError(who + ": bank_bits must start at the line offset");
    if (g.set_bits.lo != g.bank_bits.hi + 1)
      throw ConfigError(who + ": set_bits must sit directly above bank_bits");
  } else if (g.set_bits.lo != off) {
    throw ConfigError(who + ": set_bits must start at the line offset");
  }

  std::uint64_t c = 0;
  if (detail::mul_overflows(g.line_size, g.num_banks, c) ||
      detail::mul_overflows(c, g.sets_per_bank, c) || detail::mul_overflows(c, g.associativity, c))
    throw ConfigError(who + ": capacity overflows 64 bits");
  return g;
}

inline std::uint64_t bank_of(addr_t addr, const CacheGeometry& g) {
  return g.num_banks > 1 ? g.bank_bits.extract(addr) : 0;
}

inline std::uint64_t set_of(addr_t addr, const CacheGeometry& g) { return g.set_bits.extract(addr); }

inline addr_t tag_of(addr_t addr, const CacheGeometry& g) { return addr >> (g.set_bits.hi + 1); }

// Flat index in [0, total_sets) combining bank and set.
inline std::uint64_t flat_set_of(addr_t addr, const CacheGeometry& g) {
  return bank_of(addr, g) * g.sets_per_bank + set_of(addr, g);
}

// Smallest address increment that preserves both bank and set index.
inline std::uint64_t conflict_stride(const CacheGeometry& g) {
  return g.line_size * g.num_banks * g.sets_per_bank;
}

inline std::vector<std::string> preset_names() { return {"t1", "t2", "harpertown", "toy"}; }

// Built-in geometries of the shared L2 in the evaluated systems, plus a small
// toy cache for brute-force tests.
inline CacheGeometry preset(std::string_view name) {
  // UltraSparc T1: 3 MiB, 12-way, 64 B lines, 4 banks on bits 7:6, sets on 17:8.
  if (name == "t1") return {"t1", 64, 4, 1024, 12, {7, 6}, {17, 8}};
  // UltraSparc T2: 4 MiB, 16-way, 64 B lines, 8 banks. Bit positions follow the
  // T1 layout widened to three bank bits.
  if (name == "t2") return {"t2", 64, 8, 512, 16, {8, 6}, {17, 9}};
  // Xeon X5472: 6 MiB per die, 24-way, 64 B lines, 4096 sets, no banking.
  if (name == "harpertown") return {"harpertown", 64, 1, 4096, 24, {0, 0}, {17, 6}};
  if (name == "toy") return {"toy", 32, 2, 16, 4, {5, 5}, {9, 6}};
  throw ConfigError("unknown geometry preset '" + std::string(name) + "'");
}

}  // namespace interfere
