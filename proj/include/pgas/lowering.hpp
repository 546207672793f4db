#pragma once

// Lowering of a small traversal IR (shared-array loops of pointer increments,
// loads, stores and integer arithmetic) to machine programs.
//
// In hardware mode, pointer increments on power-of-two layouts become
// pgas_inc instructions and accesses become pgas loads/stores. Layouts that
// the hardware cannot handle fall back to the software incrementation, which
// is also what every increment uses in software mode. Software mode also
// translates addresses explicitly through the runtime base-address table.
//
// Register conventions of lowered programs:
//   r1        MYTHREAD (set by the loader)
//   r2        THREADS  (set by the loader)
//   r3        address of the runtime base-address table, one quad per thread
//   r4..r11   shared pointers p0..p7 (packed)
//   r12..r19  value registers v0..v7
//   r20..r23  loop counters by nesting depth
//   r24..r30  scratch

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pgas/error.hpp"
#include "pgas/increment.hpp"
#include "pgas/isa.hpp"
#include "pgas/machine.hpp"
#include "pgas/memory.hpp"
#include "pgas/shared_pointer.hpp"

namespace pgas {

inline constexpr unsigned kMaxPointers = 8;
inline constexpr unsigned kMaxValueRegs = 8;
inline constexpr unsigned kMaxLoopDepth = 4;

namespace abi {
inline constexpr Reg kMyThread = 1;
inline constexpr Reg kThreads = 2;
inline constexpr Reg kBaseTable = 3;
inline constexpr Reg kFirstPointer = 4;
inline constexpr Reg kFirstValue = 12;
inline constexpr Reg kFirstCounter = 20;
inline constexpr Reg kFirstScratch = 24;  // r24..r29 used by the software sequences
inline constexpr Reg kScratchA = 28;      // first ALU operand when materialized
inline constexpr Reg kAmount = 30;        // increment amount / second ALU operand

inline Reg pointer(unsigned id) { return static_cast<Reg>(kFirstPointer + id); }
inline Reg value(unsigned id) { return static_cast<Reg>(kFirstValue + id); }
}  // namespace abi

struct Operand {
  enum class Kind : std::uint8_t { Value, Imm, ThreadId, NumThreads };
  Kind kind = Kind::Imm;
  std::int64_t value = 0;

  static Operand reg(unsigned v) { return {Kind::Value, static_cast<std::int64_t>(v)}; }
  static Operand imm(std::int64_t v) { return {Kind::Imm, v}; }
  static Operand thread_id() { return {Kind::ThreadId, 0}; }
  static Operand num_threads() { return {Kind::NumThreads, 0}; }

  friend bool operator==(const Operand&, const Operand&) = default;
};

struct IncPtr {
  unsigned ptr = 0;
  std::int64_t amount = 0;
};

// Points `ptr` at element `index` of its array.
struct Seek {
  unsigned ptr = 0;
  Operand index;
};

struct IrLoad {
  unsigned dst = 0;
  unsigned ptr = 0;
  std::int32_t disp = 0;
  std::optional<MemKind> kind;  // defaults to the integer kind of the element size
};

struct IrStore {
  unsigned src = 0;
  unsigned ptr = 0;
  std::int32_t disp = 0;
  std::optional<MemKind> kind;
};

struct IrAlu {
  AluOp op = AluOp::Add;
  unsigned dst = 0;
  Operand a;
  Operand b;
};

struct Loop;
using IrOp = std::variant<IncPtr, Seek, IrLoad, IrStore, IrAlu, Loop>;

struct Loop {
  std::uint64_t count = 0;
  std::vector<IrOp> body;
};

// Array reached through one pointer; its thread count is the program's.
struct IrArray {
  std::uint64_t blocksize = 1;
  std::uint64_t elemsize = 1;
  std::uint64_t numelems = 1;
};

struct TraversalIR {
  std::uint64_t threads = 1;
  std::map<unsigned, IrArray> arrays;  // pointer id -> array it traverses
  std::vector<IrOp> ops;

  ArraySpec spec_of(unsigned ptr) const {
    auto it = arrays.find(ptr);
    if (it == arrays.end()) throw ValidationError("pointer p" + std::to_string(ptr) + " is not declared");
    return {it->second.blocksize, it->second.elemsize, it->second.numelems, threads};
  }
};

enum class LowerMode : std::uint8_t { Hw, Sw };

inline const char* mode_name(LowerMode m) { return m == LowerMode::Hw ? "hw" : "sw"; }

struct Fallback {
  unsigned ptr = 0;
  std::string reason;
};

// Static counts over pointer increments (IncPtr and Seek). Increments by zero
// emit nothing and are not counted.
struct LoweringReport {
  std::uint64_t hw_lowered = 0;
  std::uint64_t sw_fallback = 0;
  std::vector<Fallback> reasons;
  std::uint64_t hw_accesses = 0;  // loads and stores through pgas instructions
  std::uint64_t sw_accesses = 0;  // loads and stores with explicit translation

  std::uint64_t total() const { return hw_lowered + sw_fallback; }
};

struct LoweredProgram {
  Program program;
  LoweringReport report;
};

struct LowerOptions {
  std::map<unsigned, SharedPointer> origins;  // element 0 of each pointer's array
};

namespace detail {

inline void emit_const(Program& out, Reg rc, std::uint64_t value, Region region) {
  const auto sv = static_cast<std::int64_t>(value);
  if (fits_signed(sv, 21)) {
    out.emit(LoadImm{rc, static_cast<std::int32_t>(sv)}, region);
    return;
  }
  unsigned chunks = 1;
  while ((value >> (16 * chunks)) >= (1u << 20)) ++chunks;
  out.emit(LoadImm{rc, static_cast<std::int32_t>(value >> (16 * chunks))}, region);
  for (unsigned c = chunks; c-- > 0;) {
    out.emit(LoadImmHigh{rc, static_cast<std::uint16_t>(value >> (16 * c))}, region);
  }
}

// Always two instructions, so sequences using it keep a fixed length.
inline void emit_const_fixed(std::vector<Instruction>& out, Reg rc, std::uint64_t value) {
  if (value >= (std::uint64_t{1} << 36)) throw ValidationError("constant too wide for a fixed load");
  out.push_back(LoadImm{rc, static_cast<std::int32_t>(value >> 16)});
  out.push_back(LoadImmHigh{rc, static_cast<std::uint16_t>(value & 0xFFFFu)});
}

inline AluImm alui(AluOp op, Reg ra, std::int32_t imm, Reg rc) { return AluImm{op, ra, imm, rc}; }
inline AluReg alur(AluOp op, Reg ra, Reg rb, Reg rc) { return AluReg{op, ra, rb, rc}; }

}  // namespace detail

// Straight-line incrementation of the packed pointer in `ptr` by the signed
// amount in `amount`, using divisions and multiplications. The thread count is
// read from the THREADS register. Uses r24..r29 as scratch.
inline std::vector<Instruction> lower_software_increment(const ArraySpec& spec, Reg ptr,
                                                         Reg amount) {
  spec.validate();
  if (spec.blocksize > 0xFFFFu + 1 || spec.elemsize > 0xFFFF'FFFFull) {
    throw ValidationError("layout exceeds the packed pointer fields");
  }
  using detail::alui;
  using detail::alur;
  const Reg thread = abi::kFirstScratch, phase = thread + 1, va = thread + 2, phinc = thread + 3,
            konst = thread + 4, tmp = thread + 5;
  if (amount >= thread && amount <= tmp) throw ValidationError("amount register clobbered by scratch");
  std::vector<Instruction> seq;
  seq.push_back(alui(AluOp::Shr, ptr, kThreadShift, thread));
  seq.push_back(alui(AluOp::Shl, ptr, 16, phase));
  seq.push_back(alui(AluOp::Shr, phase, 48, phase));
  seq.push_back(alui(AluOp::Shl, ptr, 32, va));
  seq.push_back(alui(AluOp::Shr, va, 32, va));
  seq.push_back(alur(AluOp::Add, phase, amount, phinc));
  detail::emit_const_fixed(seq, konst, spec.blocksize);
  seq.push_back(alur(AluOp::Div, phinc, konst, tmp));              // thinc
  seq.push_back(alur(AluOp::Mod, phinc, konst, phinc));            // new phase
  seq.push_back(alur(AluOp::Add, thread, tmp, thread));            // thread + thinc
  seq.push_back(alur(AluOp::Div, thread, abi::kThreads, tmp));     // blockinc
  seq.push_back(alur(AluOp::Mod, thread, abi::kThreads, thread));  // new thread
  seq.push_back(alur(AluOp::Sub, phinc, phase, phase));
  seq.push_back(alur(AluOp::Mul, tmp, konst, tmp));
  seq.push_back(alur(AluOp::Add, phase, tmp, phase));              // eaddrinc
  detail::emit_const_fixed(seq, konst, spec.elemsize);
  seq.push_back(alur(AluOp::Mul, phase, konst, phase));
  seq.push_back(alur(AluOp::Add, va, phase, va));                  // new va
  seq.push_back(alui(AluOp::Shl, thread, kThreadShift, thread));
  seq.push_back(alui(AluOp::Shl, phinc, kPhaseShift, phinc));
  seq.push_back(alur(AluOp::Or, thread, phinc, thread));
  seq.push_back(alur(AluOp::Or, thread, va, ptr));
  return seq;
}

// Same sequence with the pointer in the scratch-free register r4 and the
// amount in r30.
inline std::vector<Instruction> lower_software_increment(const ArraySpec& spec) {
  return lower_software_increment(spec, abi::pointer(0), abi::kAmount);
}

namespace detail {

class Lowerer {
 public:
  Lowerer(const TraversalIR& ir, LowerMode mode, const LowerOptions& options)
      : ir_(ir), mode_(mode), options_(options) {}

  LoweredProgram run() {
    validate();
    prologue();
    lower_block(ir_.ops, 0);
    out_.emit(Halt{}, Region::Control);
    return {std::move(out_), std::move(report_)};
  }

 private:
  void validate() const {
    if (ir_.threads == 0 || ir_.threads > 0x10000) throw ValidationError("thread count out of range");
    for (const auto& [id, arr] : ir_.arrays) {
      if (id >= kMaxPointers) throw ValidationError("pointer ids must be below 8");
      ir_.spec_of(id).validate();
    }
    validate_block(ir_.ops, 0);
  }

  void check_value(unsigned v) const {
    if (v >= kMaxValueRegs) throw ValidationError("value registers must be below v8");
  }

  void check_operand(const Operand& o) const {
    if (o.kind == Operand::Kind::Value) check_value(static_cast<unsigned>(o.value));
  }

  void check_access(unsigned ptr, std::int32_t disp, const std::optional<MemKind>& kind) const {
    const ArraySpec spec = ir_.spec_of(ptr);
    if (!fits_signed(disp, 11)) throw ValidationError("displacement does not fit 11 bits");
    if (!kind) int_kind_for(spec.elemsize);
  }

  void validate_block(const std::vector<IrOp>& ops, unsigned depth) const {
    for (const IrOp& op : ops) {
      std::visit(
          [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, IncPtr>) {
              ir_.spec_of(o.ptr);
            } else if constexpr (std::is_same_v<T, Seek>) {
              ir_.spec_of(o.ptr);
              check_operand(o.index);
            } else if constexpr (std::is_same_v<T, IrLoad>) {
              check_value(o.dst);
              check_access(o.ptr, o.disp, o.kind);
            } else if constexpr (std::is_same_v<T, IrStore>) {
              check_value(o.src);
              check_access(o.ptr, o.disp, o.kind);
            } else if constexpr (std::is_same_v<T, IrAlu>) {
              check_value(o.dst);
              check_operand(o.a);
              check_operand(o.b);
            } else {
              if (depth >= kMaxLoopDepth) throw ValidationError("loops nest deeper than 4");
              validate_block(o.body, depth + 1);
            }
          },
          op);
    }
  }

  SharedPointer origin_of(unsigned ptr) const {
    auto it = options_.origins.find(ptr);
    return it == options_.origins.end() ? SharedPointer{} : it->second;
  }

  void prologue() {
    if (mode_ == LowerMode::Hw) {
      // threads register, then one base-address table entry per thread
      const Reg index = abi::kFirstScratch, cursor = index + 1, base = index + 2, more = index + 3;
      out_.emit(SetThreads{abi::kThreads}, Region::Prologue);
      out_.emit(LoadImm{index, 0}, Region::Prologue);
      out_.emit(alur(AluOp::Add, abi::kBaseTable, kZeroReg, cursor), Region::Prologue);
      const auto top = static_cast<std::int32_t>(out_.size());
      out_.emit(Load{MemKind::Q, base, cursor, 0}, Region::Prologue);
      out_.emit(SetBaseAddress{index, base}, Region::Prologue);
      out_.emit(alui(AluOp::Add, index, 1, index), Region::Prologue);
      out_.emit(alui(AluOp::Add, cursor, 8, cursor), Region::Prologue);
      out_.emit(alur(AluOp::CmpUlt, index, abi::kThreads, more), Region::Prologue);
      out_.emit(Branch{BranchCond::NonZero, more, top - static_cast<std::int32_t>(out_.size())},
                Region::Prologue);
    }
    for (const auto& [id, arr] : ir_.arrays) {
      emit_const(out_, abi::pointer(id), pack(origin_of(id)).word, Region::Prologue);
    }
  }

  // nullopt when the layout can use the pgas increment instructions.
  std::optional<std::string> fallback_reason(const ArraySpec& spec) const {
    if (mode_ == LowerMode::Sw) return "software mode";
    try {
      Pow2Layout::of(spec);
      return std::nullopt;
    } catch (const HwUnsupported& e) {
      return std::string(e.what());
    }
  }

  void count_increment(unsigned ptr, const std::optional<std::string>& reason) {
    if (reason) {
      ++report_.sw_fallback;
      report_.reasons.push_back({ptr, *reason});
    } else {
      ++report_.hw_lowered;
    }
  }

  // Increment by a constant amount; the pointer op has already been counted.
  void emit_increment_const(unsigned ptr, std::int64_t amount, bool hw) {
    const ArraySpec spec = ir_.spec_of(ptr);
    const Reg p = abi::pointer(ptr);
    if (hw) {
      const Pow2Layout layout = Pow2Layout::of(spec);
      const auto imm = [&](std::uint64_t bit) {
        out_.emit(PgasIncImm{p, p, static_cast<std::uint8_t>(layout.elemsize_log2),
                             static_cast<std::uint8_t>(layout.blocksize_log2), encode_pow2(bit)},
                  Region::PointerInc);
      };
      const auto u = static_cast<std::uint64_t>(amount);
      if (amount > 0 && u <= 0xFFFF'FFFFull && std::popcount(u) == 1) {
        imm(u);
        return;
      }
      if (amount > 0 && u <= 0xFFFF'FFFFull && std::popcount(u) == 2) {
        const std::uint64_t low = u & (~u + 1);
        imm(low);
        imm(u ^ low);
        return;
      }
    }
    emit_const(out_, abi::kAmount, static_cast<std::uint64_t>(amount), Region::PointerInc);
    emit_increment_reg(ptr, abi::kAmount, hw);
  }

  void emit_increment_reg(unsigned ptr, Reg amount, bool hw) {
    const ArraySpec spec = ir_.spec_of(ptr);
    const Reg p = abi::pointer(ptr);
    if (hw) {
      const Pow2Layout layout = Pow2Layout::of(spec);
      out_.emit(PgasIncReg{p, amount, p, static_cast<std::uint8_t>(layout.elemsize_log2),
                           static_cast<std::uint8_t>(layout.blocksize_log2)},
                Region::PointerInc);
    } else {
      for (const auto& i : lower_software_increment(spec, p, amount)) out_.emit(i, Region::PointerInc);
    }
  }

  Reg operand_reg(const Operand& o, Reg scratch, Region region) {
    switch (o.kind) {
      case Operand::Kind::Value: return abi::value(static_cast<unsigned>(o.value));
      case Operand::Kind::ThreadId: return abi::kMyThread;
      case Operand::Kind::NumThreads: return abi::kThreads;
      case Operand::Kind::Imm:
        if (o.value == 0) return kZeroReg;
        emit_const(out_, scratch, static_cast<std::uint64_t>(o.value), region);
        return scratch;
    }
    return kZeroReg;
  }

  // Absolute address of the pointed element, via the runtime table.
  Reg emit_translate(unsigned ptr) {
    const Reg p = abi::pointer(ptr);
    const Reg t = abi::kFirstScratch, base = t + 1, va = t + 2;
    out_.emit(alui(AluOp::Shr, p, kThreadShift, t), Region::Access);
    out_.emit(alui(AluOp::Shl, t, 3, t), Region::Access);
    out_.emit(alur(AluOp::Add, t, abi::kBaseTable, t), Region::Access);
    out_.emit(Load{MemKind::Q, base, t, 0}, Region::Access);
    out_.emit(alui(AluOp::Shl, p, 32, va), Region::Access);
    out_.emit(alui(AluOp::Shr, va, 32, va), Region::Access);
    out_.emit(alur(AluOp::Add, base, va, base), Region::Access);
    return base;
  }

  MemKind kind_of(unsigned ptr, const std::optional<MemKind>& kind) const {
    return kind ? *kind : int_kind_for(ir_.spec_of(ptr).elemsize);
  }

  void lower_block(const std::vector<IrOp>& ops, unsigned depth) {
    for (const IrOp& op : ops) {
      std::visit([&](const auto& o) { lower_op(o, depth); }, op);
    }
  }

  void lower_op(const IncPtr& o, unsigned) {
    if (o.amount == 0) return;
    const auto reason = fallback_reason(ir_.spec_of(o.ptr));
    count_increment(o.ptr, reason);
    emit_increment_const(o.ptr, o.amount, !reason);
  }

  void lower_op(const Seek& o, unsigned) {
    const auto reason = fallback_reason(ir_.spec_of(o.ptr));
    count_increment(o.ptr, reason);
    emit_const(out_, abi::pointer(o.ptr), pack(origin_of(o.ptr)).word, Region::PointerInc);
    if (o.index.kind == Operand::Kind::Imm) {
      if (o.index.value != 0) emit_increment_const(o.ptr, o.index.value, !reason);
    } else {
      emit_increment_reg(o.ptr, operand_reg(o.index, abi::kAmount, Region::PointerInc), !reason);
    }
  }

  void lower_op(const IrLoad& o, unsigned) {
    const MemKind kind = kind_of(o.ptr, o.kind);
    if (mode_ == LowerMode::Hw) {
      ++report_.hw_accesses;
      out_.emit(PgasLoad{kind, abi::value(o.dst), abi::pointer(o.ptr), o.disp}, Region::Access);
    } else {
      ++report_.sw_accesses;
      const Reg addr = emit_translate(o.ptr);
      out_.emit(Load{kind, abi::value(o.dst), addr, o.disp}, Region::Access);
    }
  }

  void lower_op(const IrStore& o, unsigned) {
    const MemKind kind = kind_of(o.ptr, o.kind);
    if (mode_ == LowerMode::Hw) {
      ++report_.hw_accesses;
      out_.emit(PgasStore{kind, abi::value(o.src), abi::pointer(o.ptr), o.disp}, Region::Access);
    } else {
      ++report_.sw_accesses;
      const Reg addr = emit_translate(o.ptr);
      out_.emit(Store{kind, abi::value(o.src), addr, o.disp}, Region::Access);
    }
  }

  void lower_op(const IrAlu& o, unsigned) {
    const Reg a = operand_reg(o.a, abi::kScratchA, Region::Compute);
    const Reg dst = abi::value(o.dst);
    if (o.b.kind == Operand::Kind::Imm && fits_signed(o.b.value, 11)) {
      out_.emit(alui(o.op, a, static_cast<std::int32_t>(o.b.value), dst), Region::Compute);
      return;
    }
    const Reg b = operand_reg(o.b, abi::kAmount, Region::Compute);
    out_.emit(alur(o.op, a, b, dst), Region::Compute);
  }

  void lower_op(const Loop& o, unsigned depth) {
    if (o.count == 0) return;
    const auto counter = static_cast<Reg>(abi::kFirstCounter + depth);
    emit_const(out_, counter, o.count, Region::Control);
    const auto top = static_cast<std::int32_t>(out_.size());
    lower_block(o.body, depth + 1);
    out_.emit(alui(AluOp::Sub, counter, 1, counter), Region::Control);
    out_.emit(Branch{BranchCond::NonZero, counter, top - static_cast<std::int32_t>(out_.size())},
              Region::Control);
  }

  const TraversalIR& ir_;
  LowerMode mode_;
  const LowerOptions& options_;
  Program out_;
  LoweringReport report_;
};

}  // namespace detail

inline LoweredProgram lower(const TraversalIR& ir, LowerMode mode, const LowerOptions& options = {}) {
  return detail::Lowerer(ir, mode, options).run();
}

// Allocates every array of the program in `mem`, in pointer-id order.
inline std::map<unsigned, SharedArrayHandle> allocate_arrays(const TraversalIR& ir,
                                                             PartitionedMemory& mem) {
  std::map<unsigned, SharedArrayHandle> handles;
  for (const auto& [id, arr] : ir.arrays) handles.emplace(id, mem.alloc_shared(ir.spec_of(id)));
  return handles;
}

inline LowerOptions options_for(const std::map<unsigned, SharedArrayHandle>& handles) {
  LowerOptions options;
  for (const auto& [id, h] : handles) options.origins[id] = h.origin;
  return options;
}

// Writes the base-address table read by the prologue and by software
// translation into a private region; returns its address.
inline std::uint64_t install_base_table(PartitionedMemory& mem) {
  const std::uint64_t addr = mem.add_region(8 * mem.numthreads());
  for (std::uint32_t t = 0; t < mem.numthreads(); ++t) mem.write(addr + 8 * t, 8, mem.segment_base(t));
  return addr;
}

// Loader state for simulated thread `thread` of a lowered program.
inline MachineState load_thread(PartitionedMemory& mem, std::uint32_t thread,
                                std::uint64_t table_addr, const Topology& topology = {}) {
  MachineState s(mem, topology.with_self(thread));
  s.set_reg(abi::kMyThread, thread);
  s.set_reg(abi::kThreads, mem.numthreads());
  s.set_reg(abi::kBaseTable, table_addr);
  return s;
}

}  // namespace pgas
