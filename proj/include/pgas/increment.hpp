#pragma once

// Shared pointer incrementation and locality classification.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "pgas/error.hpp"
#include "pgas/shared_pointer.hpp"

namespace pgas {

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

inline SharedPointer finish(std::int64_t thread, std::int64_t phase, std::int64_t va) {
  if (va < 0) throw ArithmeticError("shared pointer va underflows its segment");
  return SharedPointer{static_cast<std::uint32_t>(thread), static_cast<std::uint32_t>(phase),
                       static_cast<std::uint64_t>(va)};
}

}  // namespace detail

// General incrementation with divisions and multiplications. Negative
// increments use floor division so the phase stays in [0, blocksize).
inline SharedPointer increment_sw(const SharedPointer& p, std::int64_t increment,
                                  const ArraySpec& spec) {
  spec.validate();
  const auto blocksize = static_cast<std::int64_t>(spec.blocksize);
  const auto numthreads = static_cast<std::int64_t>(spec.numthreads);
  const auto elemsize = static_cast<std::int64_t>(spec.elemsize);
  const auto phase = static_cast<std::int64_t>(p.phase);
  const auto thread = static_cast<std::int64_t>(p.thread);

  const std::int64_t phinc = phase + increment;
  const std::int64_t thinc = detail::floor_div(phinc, blocksize);
  const std::int64_t nphase = detail::floor_mod(phinc, blocksize);
  const std::int64_t blockinc = detail::floor_div(thread + thinc, numthreads);
  const std::int64_t nthread = detail::floor_mod(thread + thinc, numthreads);
  const std::int64_t eaddrinc = (nphase - phase) + blockinc * blocksize;
  const std::int64_t nva = static_cast<std::int64_t>(p.va) + eaddrinc * elemsize;
  return detail::finish(nthread, nphase, nva);
}

// Log2 of a hardware-eligible layout, as carried in instruction immediates.
struct Pow2Layout {
  unsigned blocksize_log2 = 0;
  unsigned elemsize_log2 = 0;
  unsigned numthreads_log2 = 0;

  static Pow2Layout of(const ArraySpec& spec) {
    spec.validate();
    if (!is_pow2(spec.elemsize)) throw HwUnsupported("non-power-of-2 element size");
    if (!is_pow2(spec.blocksize)) throw HwUnsupported("non-power-of-2 block size");
    if (!is_pow2(spec.numthreads)) throw HwUnsupported("non-power-of-2 thread count");
    return {log2_exact(spec.blocksize), log2_exact(spec.elemsize), log2_exact(spec.numthreads)};
  }
};

// Fast path: only adds, shifts and masks. Arithmetic right shift on the signed
// intermediates gives the same floor semantics as increment_sw.
inline SharedPointer increment_hw(const SharedPointer& p, std::int64_t increment,
                                  const Pow2Layout& layout) {
  const std::int64_t phase_mask = (std::int64_t{1} << layout.blocksize_log2) - 1;
  const std::int64_t thread_mask = (std::int64_t{1} << layout.numthreads_log2) - 1;
  const auto phase = static_cast<std::int64_t>(p.phase);

  const std::int64_t phinc = phase + increment;
  const std::int64_t thinc = phinc >> layout.blocksize_log2;
  const std::int64_t nphase = phinc & phase_mask;
  const std::int64_t tsum = static_cast<std::int64_t>(p.thread) + thinc;
  const std::int64_t blockinc = tsum >> layout.numthreads_log2;
  const std::int64_t nthread = tsum & thread_mask;
  const std::int64_t eaddrinc = (nphase - phase) + (blockinc << layout.blocksize_log2);
  const std::int64_t nva = static_cast<std::int64_t>(p.va) + (eaddrinc << layout.elemsize_log2);
  return detail::finish(nthread, nphase, nva);
}

inline SharedPointer increment_hw(const SharedPointer& p, std::int64_t increment,
                                  const ArraySpec& spec) {
  return increment_hw(p, increment, Pow2Layout::of(spec));
}

enum class LocalityCode : std::uint8_t { Local = 0, SameController = 1, SameNode = 2, OtherNode = 3 };

// Placement of threads onto memory controllers and nodes, seen from
// `self_thread`. With no assignments every thread shares controller 0 on
// node 0 (a single SMP).
struct Topology {
  std::uint32_t self_thread = 0;
  std::map<std::uint32_t, std::uint32_t> controller_of;
  std::map<std::uint32_t, std::uint32_t> node_of;

  bool uniform() const { return controller_of.empty() && node_of.empty(); }

  Topology with_self(std::uint32_t self) const {
    Topology t = *this;
    t.self_thread = self;
    return t;
  }

  void validate(std::uint64_t numthreads) const {
    if (uniform()) return;
    for (std::uint32_t t = 0; t < numthreads; ++t) {
      if (!controller_of.contains(t) || !node_of.contains(t)) {
        throw ConfigError("topology has no placement for thread " + std::to_string(t));
      }
    }
  }
};

inline LocalityCode classify_locality(const SharedPointer& p, const Topology& topo) {
  if (p.thread == topo.self_thread) return LocalityCode::Local;
  if (topo.uniform()) return LocalityCode::SameController;
  const auto placement = [&](const std::map<std::uint32_t, std::uint32_t>& m,
                             std::uint32_t t) -> std::uint32_t {
    auto it = m.find(t);
    if (it == m.end()) throw ConfigError("topology has no placement for thread " + std::to_string(t));
    return it->second;
  };
  if (placement(topo.controller_of, p.thread) == placement(topo.controller_of, topo.self_thread)) {
    return LocalityCode::SameController;
  }
  if (placement(topo.node_of, p.thread) == placement(topo.node_of, topo.self_thread)) {
    return LocalityCode::SameNode;
  }
  return LocalityCode::OtherNode;
}

// Topology files are key-value text, one assignment per line:
//
//   # comment
//   thread.0.controller = 0
//   thread.0.node = 0
//
// Controllers are identified globally, so two threads on the same controller
// id are on the same controller regardless of their node.
inline Topology parse_topology(std::istream& in) {
  Topology topo;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    const auto fail = [&](const std::string& why) {
      throw ConfigError("topology line " + std::to_string(lineno) + ": " + why);
    };
    if (eq == std::string::npos) fail("expected key = value");
    std::istringstream key_in(line.substr(0, eq));
    std::istringstream value_in(line.substr(eq + 1));
    std::string key;
    key_in >> key;
    std::uint64_t value = 0;
    if (!(value_in >> value)) fail("value is not an unsigned integer");
    std::string rest;
    if (value_in >> rest) fail("trailing characters after value");

    unsigned thread = 0;
    char field[16] = {};
    int consumed = 0;
    if (std::sscanf(key.c_str(), "thread.%u.%15[a-z]%n", &thread, field, &consumed) != 2 ||
        consumed != static_cast<int>(key.size())) {
      fail("unknown key '" + key + "'");
    }
    const std::string name = field;
    if (name == "controller") {
      topo.controller_of[thread] = static_cast<std::uint32_t>(value);
    } else if (name == "node") {
      topo.node_of[thread] = static_cast<std::uint32_t>(value);
    } else {
      fail("unknown field '" + name + "'");
    }
  }
  for (const auto& [t, c] : topo.controller_of) {
    if (!topo.node_of.contains(t)) throw ConfigError("thread " + std::to_string(t) + " has no node");
  }
  for (const auto& [t, n] : topo.node_of) {
    if (!topo.controller_of.contains(t)) {
      throw ConfigError("thread " + std::to_string(t) + " has no controller");
    }
  }
  return topo;
}

inline Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open topology file " + path);
  return parse_topology(in);
}

}  // namespace pgas
