#pragma once

// Shared pointers and the block-cyclic layout of shared arrays.
//
// A shared array with blocking factor B is dealt to the threads B elements at
// a time, round robin. A shared pointer names one element by the thread that
// owns it, its position inside the current block (the phase, in elements) and
// a byte offset inside the owning thread's local segment.

#include <bit>
#include <cstdint>
#include <ostream>
#include <string>

#include "pgas/error.hpp"

namespace pgas {

struct SharedPointer {
  std::uint32_t thread = 0;
  std::uint32_t phase = 0;
  std::uint64_t va = 0;

  friend bool operator==(const SharedPointer&, const SharedPointer&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const SharedPointer& p) {
  return os << "(thread=" << p.thread << ", phase=" << p.phase << ", va=0x" << std::hex << p.va
            << std::dec << ")";
}

struct ArraySpec {
  std::uint64_t blocksize = 1;
  std::uint64_t elemsize = 1;
  std::uint64_t numelems = 1;
  std::uint64_t numthreads = 1;

  friend bool operator==(const ArraySpec&, const ArraySpec&) = default;

  void validate() const {
    if (blocksize == 0 || elemsize == 0 || numelems == 0 || numthreads == 0) {
      throw ValidationError("array spec fields must all be >= 1");
    }
  }

  std::uint64_t numblocks() const { return (numelems + blocksize - 1) / blocksize; }

  // Whole blocks dealt to `thread`, counting a ragged last block as whole.
  std::uint64_t blocks_of_thread(std::uint64_t thread) const {
    const std::uint64_t nb = numblocks();
    return nb / numthreads + (thread < nb % numthreads ? 1 : 0);
  }

  std::uint64_t bytes_of_thread(std::uint64_t thread) const {
    return blocks_of_thread(thread) * blocksize * elemsize;
  }
};

inline bool is_pow2(std::uint64_t v) { return std::has_single_bit(v); }

inline unsigned log2_exact(std::uint64_t v) {
  if (!is_pow2(v)) throw HwUnsupported("value " + std::to_string(v) + " is not a power of two");
  return static_cast<unsigned>(std::countr_zero(v));
}

// True when incrementation can run on the shift/mask fast path.
inline bool hw_eligible(const ArraySpec& spec) {
  return is_pow2(spec.blocksize) && is_pow2(spec.elemsize) && is_pow2(spec.numthreads);
}

// Layout of element `index` without a bounds check; indices past the end
// describe the positions a traversal may step through without dereferencing.
inline SharedPointer layout_of(std::uint64_t index, const ArraySpec& spec) {
  const std::uint64_t block = index / spec.blocksize;
  const std::uint64_t phase = index % spec.blocksize;
  const std::uint64_t local_block = block / spec.numthreads;
  return SharedPointer{static_cast<std::uint32_t>(block % spec.numthreads),
                       static_cast<std::uint32_t>(phase),
                       (local_block * spec.blocksize + phase) * spec.elemsize};
}

inline SharedPointer canonical_map(std::uint64_t index, const ArraySpec& spec) {
  spec.validate();
  if (index >= spec.numelems) {
    throw RangeError("element index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(spec.numelems) + ")");
  }
  return layout_of(index, spec);
}

// Inverse of canonical_map.
inline std::uint64_t canonical_index(const SharedPointer& p, const ArraySpec& spec) {
  spec.validate();
  if (p.thread >= spec.numthreads) throw ConsistencyError("thread field exceeds thread count");
  if (p.phase >= spec.blocksize) throw ConsistencyError("phase field exceeds block size");
  if (p.va % spec.elemsize != 0) throw ConsistencyError("va is not a multiple of the element size");
  const std::uint64_t local_elem = p.va / spec.elemsize;
  if (local_elem % spec.blocksize != p.phase) {
    throw ConsistencyError("va does not agree with phase");
  }
  const std::uint64_t local_block = local_elem / spec.blocksize;
  const std::uint64_t index =
      (local_block * spec.numthreads + p.thread) * spec.blocksize + p.phase;
  if (index >= spec.numelems) throw ConsistencyError("pointer lies past the end of the array");
  return index;
}

// 64-bit packed form: va in bits 0..31, phase in 32..47, thread in 48..63.
struct PackedSharedPointer {
  std::uint64_t word = 0;
  friend bool operator==(const PackedSharedPointer&, const PackedSharedPointer&) = default;
};

inline constexpr unsigned kPhaseShift = 32;
inline constexpr unsigned kThreadShift = 48;

inline PackedSharedPointer pack(const SharedPointer& p) {
  if (p.thread > 0xFFFFu) throw EncodingError("thread does not fit in 16 bits");
  if (p.phase > 0xFFFFu) throw EncodingError("phase does not fit in 16 bits");
  if (p.va > 0xFFFF'FFFFull) throw EncodingError("va does not fit in 32 bits");
  return {(std::uint64_t{p.thread} << kThreadShift) | (std::uint64_t{p.phase} << kPhaseShift) |
          p.va};
}

inline SharedPointer unpack(PackedSharedPointer w) {
  return SharedPointer{static_cast<std::uint32_t>(w.word >> kThreadShift),
                       static_cast<std::uint32_t>((w.word >> kPhaseShift) & 0xFFFFu),
                       w.word & 0xFFFF'FFFFull};
}

// UPC accessor functions.
inline std::uint32_t threadof(const SharedPointer& p) { return p.thread; }
inline std::uint32_t phaseof(const SharedPointer& p) { return p.phase; }
inline std::uint64_t addrfieldof(const SharedPointer& p) { return p.va; }
inline SharedPointer resetphase(SharedPointer p) {
  p.phase = 0;
  return p;
}

}  // namespace pgas
