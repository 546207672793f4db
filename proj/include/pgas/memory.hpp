#pragma once

// Simulated partitioned global address space: one contiguous local segment per
// thread, plus optional private regions for runtime data.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pgas/error.hpp"
#include "pgas/shared_pointer.hpp"
#include "pgas/translation.hpp"

namespace pgas {

struct MemoryConfig {
  std::uint64_t origin = 0x1'0000'0000ull;
  std::uint64_t segment_size = 1ull << 20;
};

// A shared array allocated at the same offset in every thread's segment.
struct SharedArrayHandle {
  ArraySpec spec;
  SharedPointer origin;                      // element 0
  std::vector<std::uint64_t> start_offsets;  // per thread, bytes into the segment

  SharedPointer pointer_to(std::uint64_t index) const {
    SharedPointer p = canonical_map(index, spec);
    p.va += start_offsets.at(p.thread);
    return p;
  }
};

class PartitionedMemory {
 public:
  explicit PartitionedMemory(std::uint64_t numthreads, MemoryConfig config = {})
      : numthreads_(numthreads), config_(config) {
    if (numthreads == 0) throw ValidationError("memory needs at least one thread");
    if (numthreads > 0x10000) throw ValidationError("at most 65536 threads are addressable");
    if (config.segment_size == 0) throw ValidationError("segment size must be >= 1");
    stride_ = std::bit_ceil(config.segment_size);
    for (std::uint64_t t = 0; t < numthreads; ++t) {
      const std::uint64_t base = config.origin + t * stride_;
      segments_.emplace(base, Segment{base, std::vector<std::uint8_t>(config.segment_size), 0});
    }
    next_region_ = config.origin + numthreads * stride_;
  }

  std::uint64_t numthreads() const { return numthreads_; }
  std::uint64_t segment_size() const { return config_.segment_size; }
  std::uint64_t stride() const { return stride_; }

  std::uint64_t segment_base(std::uint32_t thread) const {
    check_thread(thread);
    return config_.origin + thread * stride_;
  }

  // Bytes handed out so far in a thread's segment.
  std::uint64_t used(std::uint32_t thread) const { return segment_of(thread).cursor; }

  std::span<const std::uint8_t> segment_bytes(std::uint32_t thread) const {
    return segment_of(thread).bytes;
  }

  BaseAddressTable base_table() const { return interval_scheme().to_table(numthreads_); }
  IntervalScheme interval_scheme() const { return {config_.origin, stride_}; }

  SharedArrayHandle alloc_shared(const ArraySpec& spec) {
    spec.validate();
    if (spec.numthreads != numthreads_) {
      throw ValidationError("array thread count does not match the memory");
    }
    std::uint64_t start = 0;
    for (std::uint32_t t = 0; t < numthreads_; ++t) start = std::max(start, used(t));
    start = (start + kAlignment - 1) / kAlignment * kAlignment;
    for (std::uint32_t t = 0; t < numthreads_; ++t) {
      if (start + spec.bytes_of_thread(t) > config_.segment_size) {
        throw AllocationError("segment of thread " + std::to_string(t) + " is out of capacity");
      }
    }
    for (std::uint32_t t = 0; t < numthreads_; ++t) {
      segment_of(t).cursor = start + spec.bytes_of_thread(t);
    }
    return SharedArrayHandle{spec, SharedPointer{0, 0, start},
                             std::vector<std::uint64_t>(numthreads_, start)};
  }

  // Private region outside every thread segment, e.g. for runtime tables.
  std::uint64_t add_region(std::uint64_t size) {
    if (size == 0) throw ValidationError("region size must be >= 1");
    const std::uint64_t base = next_region_;
    segments_.emplace(base, Segment{base, std::vector<std::uint8_t>(size), size});
    next_region_ += (size + stride_ - 1) / stride_ * stride_;
    return base;
  }

  std::uint64_t read(std::uint64_t addr, unsigned width) const {
    const Segment& seg = segments_.at(locate(addr, width));
    std::uint64_t value = 0;
    for (unsigned i = 0; i < width; ++i) {
      value |= std::uint64_t{seg.bytes[addr - seg.base + i]} << (8 * i);
    }
    return value;
  }

  void write(std::uint64_t addr, unsigned width, std::uint64_t value) {
    Segment& seg = segments_.at(locate(addr, width));
    for (unsigned i = 0; i < width; ++i) {
      seg.bytes[addr - seg.base + i] = static_cast<std::uint8_t>(value >> (8 * i));
    }
  }

  // One line per 16 bytes: segment offset, then the bytes in hex.
  void hexdump(std::uint32_t thread, std::ostream& os, std::uint64_t length) const {
    const Segment& seg = segment_of(thread);
    length = std::min<std::uint64_t>(length, seg.bytes.size());
    char buf[8];
    for (std::uint64_t off = 0; off < length; off += 16) {
      std::snprintf(buf, sizeof buf, "%06llx", static_cast<unsigned long long>(off));
      os << buf << ':';
      for (std::uint64_t i = off; i < std::min(off + 16, length); ++i) {
        std::snprintf(buf, sizeof buf, " %02x", seg.bytes[i]);
        os << buf;
      }
      os << '\n';
    }
  }

  void hexdump(std::uint32_t thread, std::ostream& os) const { hexdump(thread, os, used(thread)); }

  friend bool operator==(const PartitionedMemory& a, const PartitionedMemory& b) {
    if (a.segments_.size() != b.segments_.size()) return false;
    return std::equal(a.segments_.begin(), a.segments_.end(), b.segments_.begin(),
                      [](const auto& x, const auto& y) {
                        return x.first == y.first && x.second.bytes == y.second.bytes;
                      });
  }

 private:
  static constexpr std::uint64_t kAlignment = 8;

  struct Segment {
    std::uint64_t base;
    std::vector<std::uint8_t> bytes;
    std::uint64_t cursor;
  };

  void check_thread(std::uint32_t thread) const {
    if (thread >= numthreads_) throw RangeError("thread " + std::to_string(thread) + " out of range");
  }

  const Segment& segment_of(std::uint32_t thread) const {
    return segments_.at(segment_base(thread));
  }
  Segment& segment_of(std::uint32_t thread) { return segments_.at(segment_base(thread)); }

  // Base of the segment fully containing [addr, addr + width).
  std::uint64_t locate(std::uint64_t addr, unsigned width) const {
    if (width == 0 || width > 8 || !is_pow2(width)) throw ValidationError("bad access width");
    if (width > 1 && addr % width != 0) {
      throw AlignmentError("unaligned " + std::to_string(width) + "-byte access at " + hex(addr));
    }
    auto it = segments_.upper_bound(addr);
    if (it == segments_.begin()) throw MemoryFault("unmapped address " + hex(addr));
    --it;
    const Segment& seg = it->second;
    if (addr - seg.base + width > seg.bytes.size()) {
      throw MemoryFault("access at " + hex(addr) + " leaves its segment");
    }
    return seg.base;
  }

  static std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
  }

  std::uint64_t numthreads_;
  MemoryConfig config_;
  std::uint64_t stride_ = 0;
  std::uint64_t next_region_ = 0;
  std::map<std::uint64_t, Segment> segments_;
};

}  // namespace pgas
