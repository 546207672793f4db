#pragma once

// Shared address to system virtual address translation.

#include <cstdint>
#include <map>
#include <string>

#include "pgas/error.hpp"
#include "pgas/shared_pointer.hpp"

namespace pgas {

// Per-thread segment base addresses, as held by the base-address look-up table.
class BaseAddressTable {
 public:
  void set(std::uint32_t thread, std::uint64_t base) { entries_[thread] = base; }

  std::uint64_t at(std::uint32_t thread) const {
    auto it = entries_.find(thread);
    if (it == entries_.end()) {
      throw ConfigError("no base address registered for thread " + std::to_string(thread));
    }
    return it->second;
  }

  bool contains(std::uint32_t thread) const { return entries_.contains(thread); }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::uint32_t, std::uint64_t>& entries() const { return entries_; }

  // Every thread below numthreads has an entry and the segments
  // [base, base + segment_size) do not overlap.
  void validate(std::uint64_t numthreads, std::uint64_t segment_size) const {
    for (std::uint32_t t = 0; t < numthreads; ++t) at(t);
    std::uint64_t prev_end = 0;
    bool first = true;
    std::map<std::uint64_t, std::uint32_t> by_base;
    for (const auto& [t, base] : entries_) {
      if (!by_base.emplace(base, t).second) throw ConfigError("two threads share a base address");
    }
    for (const auto& [base, t] : by_base) {
      if (!first && base < prev_end) {
        throw ConfigError("segment of thread " + std::to_string(t) + " overlaps its predecessor");
      }
      prev_end = base + segment_size;
      first = false;
    }
  }

  friend bool operator==(const BaseAddressTable&, const BaseAddressTable&) = default;

 private:
  std::map<std::uint32_t, std::uint64_t> entries_;
};

// Segments starting at regular intervals: base(t) = origin + t * stride.
struct IntervalScheme {
  std::uint64_t origin = 0;
  std::uint64_t stride = 0;

  std::uint64_t base_of(std::uint32_t thread) const { return origin + thread * stride; }

  BaseAddressTable to_table(std::uint64_t numthreads) const {
    BaseAddressTable table;
    for (std::uint32_t t = 0; t < numthreads; ++t) table.set(t, base_of(t));
    return table;
  }
};

inline std::uint64_t translate_lut(const SharedPointer& p, const BaseAddressTable& table) {
  return table.at(p.thread) + p.va;
}

inline std::uint64_t translate_interval(const SharedPointer& p, const IntervalScheme& scheme) {
  return scheme.base_of(p.thread) + p.va;
}

}  // namespace pgas
