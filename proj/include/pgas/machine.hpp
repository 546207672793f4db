#pragma once

// Functional executor for the instruction set. One MachineState is one
// simulated thread; several states may share one PartitionedMemory.

#include <array>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <vector>

#include "pgas/assembly.hpp"
#include "pgas/error.hpp"
#include "pgas/increment.hpp"
#include "pgas/isa.hpp"
#include "pgas/memory.hpp"
#include "pgas/shared_pointer.hpp"
#include "pgas/translation.hpp"

namespace pgas {

// Which part of the source program an instruction was emitted for.
enum class Region : std::uint8_t { Prologue, PointerInc, Access, Compute, Control };
inline constexpr unsigned kNumRegions = 5;

inline const char* region_name(Region r) {
  static constexpr const char* kNames[kNumRegions] = {"prologue", "pointer_inc", "access",
                                                      "compute", "control"};
  return kNames[static_cast<unsigned>(r)];
}

struct Program {
  std::vector<Instruction> code;
  std::vector<Region> regions;

  Program() = default;
  explicit Program(std::vector<Instruction> instrs, Region region = Region::Compute)
      : code(std::move(instrs)), regions(code.size(), region) {}

  void emit(const Instruction& i, Region r) {
    code.push_back(i);
    regions.push_back(r);
  }
  std::size_t size() const { return code.size(); }
  bool empty() const { return code.empty(); }
};

using Counters = std::array<std::uint64_t, kNumClasses>;

struct MachineState {
  std::array<std::uint64_t, kNumRegs> int_regs{};
  std::array<std::uint64_t, kNumRegs> float_regs{};
  std::uint64_t threads_reg = 0;  // 0 until set_threads runs
  BaseAddressTable base_table;
  LocalityCode cc = LocalityCode::Local;
  PartitionedMemory* mem = nullptr;
  Topology topology;
  std::int64_t pc = 0;
  bool halted = false;
  Counters counters{};
  std::array<Counters, kNumRegions> region_counters{};  // [region][class]

  MachineState() = default;
  explicit MachineState(PartitionedMemory& memory, Topology topo = {})
      : mem(&memory), topology(std::move(topo)) {}

  std::uint64_t reg(Reg r) const { return r == kZeroReg ? 0 : int_regs.at(r); }
  void set_reg(Reg r, std::uint64_t v) {
    if (r != kZeroReg) int_regs.at(r) = v;
  }

  std::uint64_t steps() const {
    return std::accumulate(counters.begin(), counters.end(), std::uint64_t{0});
  }
  std::uint64_t count(InstrClass c) const { return counters[static_cast<unsigned>(c)]; }
};

namespace detail {

inline std::uint64_t alu(AluOp op, std::uint64_t a, std::uint64_t b) {
  const auto sa = static_cast<std::int64_t>(a);
  const auto sb = static_cast<std::int64_t>(b);
  switch (op) {
    case AluOp::Add: return a + b;
    case AluOp::Sub: return a - b;
    case AluOp::Mul: return a * b;
    case AluOp::Div:
      if (sb == 0) throw ArithmeticError("division by zero");
      return static_cast<std::uint64_t>(floor_div(sa, sb));
    case AluOp::Mod:
      if (sb == 0) throw ArithmeticError("modulo by zero");
      return static_cast<std::uint64_t>(floor_mod(sa, sb));
    case AluOp::And: return a & b;
    case AluOp::Or: return a | b;
    case AluOp::Xor: return a ^ b;
    case AluOp::Shl: return a << (b & 63);
    case AluOp::Shr: return a >> (b & 63);
    case AluOp::Sra: return static_cast<std::uint64_t>(sa >> (b & 63));
    case AluOp::CmpEq: return a == b ? 1 : 0;
    case AluOp::CmpLt: return sa < sb ? 1 : 0;
    case AluOp::CmpUlt: return a < b ? 1 : 0;
  }
  throw IllegalInstruction("bad alu op");
}

inline PartitionedMemory& memory_of(MachineState& s) {
  if (s.mem == nullptr) throw UninitializedError("machine has no memory attached");
  return *s.mem;
}

inline std::uint64_t pgas_address(const MachineState& s, Reg pointer_reg, std::int32_t disp) {
  const SharedPointer p = unpack(PackedSharedPointer{s.reg(pointer_reg)});
  return translate_lut(p, s.base_table) + static_cast<std::uint64_t>(static_cast<std::int64_t>(disp));
}

inline void load_into(MachineState& s, MemKind kind, Reg ra, std::uint64_t addr) {
  const std::uint64_t v = memory_of(s).read(addr, width_of(kind));
  if (is_float(kind)) {
    s.float_regs.at(ra) = v;
  } else {
    s.set_reg(ra, v);
  }
}

inline void store_from(MachineState& s, MemKind kind, Reg ra, std::uint64_t addr) {
  const std::uint64_t v = is_float(kind) ? s.float_regs.at(ra) : s.reg(ra);
  memory_of(s).write(addr, width_of(kind), v);
}

inline void pgas_increment(MachineState& s, Reg ra, Reg rc, std::uint8_t esize_log2,
                           std::uint8_t bsize_log2, std::int64_t amount) {
  if (s.threads_reg == 0) throw UninitializedError("threads register is not set");
  if (!is_pow2(s.threads_reg)) throw HwUnsupported("non-power-of-2 thread count");
  const Pow2Layout layout{bsize_log2, esize_log2, log2_exact(s.threads_reg)};
  const SharedPointer next = increment_hw(unpack(PackedSharedPointer{s.reg(ra)}), amount, layout);
  s.set_reg(rc, pack(next).word);
  s.cc = classify_locality(next, s.topology);
}

}  // namespace detail

// Executes one instruction and advances pc (or branches).
inline void step(MachineState& s, const Instruction& instr) {
  std::int64_t next_pc = s.pc + 1;
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, PgasLoad>) {
          detail::load_into(s, i.kind, i.ra, detail::pgas_address(s, i.rb, i.disp));
        } else if constexpr (std::is_same_v<T, PgasStore>) {
          detail::store_from(s, i.kind, i.ra, detail::pgas_address(s, i.rb, i.disp));
        } else if constexpr (std::is_same_v<T, PgasIncImm>) {
          detail::pgas_increment(s, i.ra, i.rc, i.esize_log2, i.bsize_log2,
                                 static_cast<std::int64_t>(decode_pow2(i.increm_log2)));
        } else if constexpr (std::is_same_v<T, PgasIncReg>) {
          detail::pgas_increment(s, i.ra, i.rc, i.esize_log2, i.bsize_log2,
                                 static_cast<std::int64_t>(s.reg(i.rb)));
        } else if constexpr (std::is_same_v<T, SetThreads>) {
          if (s.reg(i.ra) == 0) throw ValidationError("thread count must be >= 1");
          s.threads_reg = s.reg(i.ra);
        } else if constexpr (std::is_same_v<T, SetBaseAddress>) {
          s.base_table.set(static_cast<std::uint32_t>(s.reg(i.ra)), s.reg(i.rb));
        } else if constexpr (std::is_same_v<T, BranchLocality>) {
          if (i.mask & (1u << static_cast<unsigned>(s.cc))) next_pc = s.pc + i.offset;
        } else if constexpr (std::is_same_v<T, AluReg>) {
          s.set_reg(i.rc, detail::alu(i.op, s.reg(i.ra), s.reg(i.rb)));
        } else if constexpr (std::is_same_v<T, AluImm>) {
          s.set_reg(i.rc, detail::alu(i.op, s.reg(i.ra),
                                      static_cast<std::uint64_t>(static_cast<std::int64_t>(i.imm))));
        } else if constexpr (std::is_same_v<T, LoadImm>) {
          s.set_reg(i.rc, static_cast<std::uint64_t>(static_cast<std::int64_t>(i.imm)));
        } else if constexpr (std::is_same_v<T, LoadImmHigh>) {
          s.set_reg(i.rc, (s.reg(i.rc) << 16) | i.imm);
        } else if constexpr (std::is_same_v<T, Load>) {
          detail::load_into(s, i.kind, i.ra, s.reg(i.rb) + static_cast<std::int64_t>(i.disp));
        } else if constexpr (std::is_same_v<T, Store>) {
          detail::store_from(s, i.kind, i.ra, s.reg(i.rb) + static_cast<std::int64_t>(i.disp));
        } else if constexpr (std::is_same_v<T, Branch>) {
          const bool taken = i.cond == BranchCond::Always ||
                             (i.cond == BranchCond::Zero && s.reg(i.ra) == 0) ||
                             (i.cond == BranchCond::NonZero && s.reg(i.ra) != 0);
          if (taken) next_pc = s.pc + i.offset;
        } else {
          s.halted = true;
          next_pc = s.pc;
        }
      },
      instr);
  ++s.counters[static_cast<unsigned>(class_of(instr))];
  s.pc = next_pc;
}

// One trace line: pc, instruction, condition code and steps executed so far.
inline void trace_step(std::ostream& os, const MachineState& s, std::int64_t pc,
                       const Instruction& instr) {
  os << pc << ' ' << format_instruction(instr) << " cc=" << static_cast<unsigned>(s.cc)
     << " steps=" << s.steps() << '\n';
}

// Fetches and executes the instruction at pc. Running off either end of the
// program halts the machine. Returns false once halted.
inline bool step_program(MachineState& s, const Program& program, std::ostream* trace = nullptr,
                         const char* trace_prefix = "") {
  if (s.halted) return false;
  if (s.pc < 0 || s.pc >= static_cast<std::int64_t>(program.size())) {
    s.halted = true;
    return false;
  }
  const std::int64_t pc = s.pc;
  const Instruction& instr = program.code[static_cast<std::size_t>(pc)];
  step(s, instr);
  ++s.region_counters[static_cast<unsigned>(program.regions[static_cast<std::size_t>(pc)])]
                    [static_cast<unsigned>(class_of(instr))];
  if (trace != nullptr) {
    *trace << trace_prefix;
    trace_step(*trace, s, pc, instr);
  }
  return !s.halted;
}

// Runs until halt. Throws TimeoutError after `fuel` steps without halting.
inline std::uint64_t run(MachineState& s, const Program& program, std::uint64_t fuel,
                         std::ostream* trace = nullptr) {
  if (program.empty()) throw ValidationError("program is empty");
  const std::uint64_t start = s.steps();
  while (!s.halted) {
    if (s.steps() - start == fuel) {
      throw TimeoutError("fuel exhausted after " + std::to_string(fuel) + " steps");
    }
    step_program(s, program, trace);
  }
  return s.steps() - start;
}

inline std::uint64_t run(MachineState& s, const std::vector<Instruction>& program,
                         std::uint64_t fuel, std::ostream* trace = nullptr) {
  return run(s, Program(program), fuel, trace);
}

}  // namespace pgas
