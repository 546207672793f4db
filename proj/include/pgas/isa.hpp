#pragma once

// Instruction set of the simulated machine: a small generic 3-operand
// register machine carrying the shared-address extension (loads and stores
// through shared pointers, pointer incrementation, the threads register, the
// base-address look-up table and branch on locality).
//
// Every instruction is one 32-bit word with the opcode in bits 31..26.
//
//   pgas_ld/pgas_st, ld/st   opcode | RA:5 | RB:5 | Func:5 | disp:11 (signed)
//   pgas_inc_imm             opcode | RA:5 | RC:5 | Esize:5 | Bsize:5 | Increm:5 | 0
//   pgas_inc_reg             opcode | RA:5 | RC:5 | Esize:5 | Bsize:5 | RB:5     | 0
//   set_threads              opcode | RA:5 | 0
//   set_base_address         opcode | RA:5 | RB:5 | 0
//   bloc                     opcode | mask:4 | offset:22 (signed)
//   alu (reg)                opcode | RA:5 | RB:5 | RC:5 | func:11
//   alu (imm)                opcode | RA:5 | RC:5 | func:5 | imm:11 (signed)
//   ldi                      opcode | RC:5 | imm:21 (signed)
//   ldih                     opcode | RC:5 | 0:5 | imm:16
//   br                       opcode | offset:26 (signed)
//   beq/bne                  opcode | RA:5 | offset:21 (signed)
//   halt                     opcode | 0
//
// Esize, Bsize and Increm hold log2 of a power of two. Branch offsets are
// relative to the branch itself.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <type_traits>
#include <variant>

#include "pgas/error.hpp"

namespace pgas {

using Reg = std::uint8_t;

inline constexpr unsigned kNumRegs = 32;
inline constexpr Reg kZeroReg = 31;  // reads as 0, writes are discarded

enum class MemKind : std::uint8_t { B = 0, W = 1, L = 2, Q = 3, S = 4, T = 5 };

inline unsigned width_of(MemKind k) {
  switch (k) {
    case MemKind::B: return 1;
    case MemKind::W: return 2;
    case MemKind::L:
    case MemKind::S: return 4;
    case MemKind::Q:
    case MemKind::T: return 8;
  }
  return 0;
}

inline bool is_float(MemKind k) { return k == MemKind::S || k == MemKind::T; }

// Integer kind moving `bytes` bytes, for element sizes 1, 2, 4 and 8.
inline MemKind int_kind_for(std::uint64_t bytes) {
  switch (bytes) {
    case 1: return MemKind::B;
    case 2: return MemKind::W;
    case 4: return MemKind::L;
    case 8: return MemKind::Q;
    default: throw ValidationError("no integer access kind of " + std::to_string(bytes) + " bytes");
  }
}

enum class AluOp : std::uint8_t {
  Add, Sub, Mul, Div, Mod, And, Or, Xor, Shl, Shr, Sra, CmpEq, CmpLt, CmpUlt
};
inline constexpr unsigned kNumAluOps = 14;

enum class BranchCond : std::uint8_t { Always, Zero, NonZero };

struct PgasLoad {
  MemKind kind = MemKind::Q;
  Reg ra = 0;  // destination (a float register for S and T)
  Reg rb = 0;  // packed shared pointer
  std::int32_t disp = 0;
  friend bool operator==(const PgasLoad&, const PgasLoad&) = default;
};

struct PgasStore {
  MemKind kind = MemKind::Q;
  Reg ra = 0;  // source
  Reg rb = 0;
  std::int32_t disp = 0;
  friend bool operator==(const PgasStore&, const PgasStore&) = default;
};

struct PgasIncImm {
  Reg ra = 0;
  Reg rc = 0;
  std::uint8_t esize_log2 = 0;
  std::uint8_t bsize_log2 = 0;
  std::uint8_t increm_log2 = 0;
  friend bool operator==(const PgasIncImm&, const PgasIncImm&) = default;
};

struct PgasIncReg {
  Reg ra = 0;
  Reg rb = 0;  // signed increment
  Reg rc = 0;
  std::uint8_t esize_log2 = 0;
  std::uint8_t bsize_log2 = 0;
  friend bool operator==(const PgasIncReg&, const PgasIncReg&) = default;
};

struct SetThreads {
  Reg ra = 0;
  friend bool operator==(const SetThreads&, const SetThreads&) = default;
};

struct SetBaseAddress {
  Reg ra = 0;  // thread index
  Reg rb = 0;  // base address
  friend bool operator==(const SetBaseAddress&, const SetBaseAddress&) = default;
};

// Taken when bit `cc` of mask is set.
struct BranchLocality {
  std::uint8_t mask = 0;
  std::int32_t offset = 0;
  friend bool operator==(const BranchLocality&, const BranchLocality&) = default;
};

struct AluReg {
  AluOp op = AluOp::Add;
  Reg ra = 0;
  Reg rb = 0;
  Reg rc = 0;
  friend bool operator==(const AluReg&, const AluReg&) = default;
};

struct AluImm {
  AluOp op = AluOp::Add;
  Reg ra = 0;
  std::int32_t imm = 0;
  Reg rc = 0;
  friend bool operator==(const AluImm&, const AluImm&) = default;
};

struct LoadImm {
  Reg rc = 0;
  std::int32_t imm = 0;
  friend bool operator==(const LoadImm&, const LoadImm&) = default;
};

// rc = (rc << 16) | imm
struct LoadImmHigh {
  Reg rc = 0;
  std::uint16_t imm = 0;
  friend bool operator==(const LoadImmHigh&, const LoadImmHigh&) = default;
};

struct Load {
  MemKind kind = MemKind::Q;
  Reg ra = 0;
  Reg rb = 0;  // absolute address
  std::int32_t disp = 0;
  friend bool operator==(const Load&, const Load&) = default;
};

struct Store {
  MemKind kind = MemKind::Q;
  Reg ra = 0;
  Reg rb = 0;
  std::int32_t disp = 0;
  friend bool operator==(const Store&, const Store&) = default;
};

struct Branch {
  BranchCond cond = BranchCond::Always;
  Reg ra = 0;  // unused for Always
  std::int32_t offset = 0;
  friend bool operator==(const Branch&, const Branch&) = default;
};

struct Halt {
  friend bool operator==(const Halt&, const Halt&) = default;
};

using Instruction = std::variant<PgasLoad, PgasStore, PgasIncImm, PgasIncReg, SetThreads,
                                 SetBaseAddress, BranchLocality, AluReg, AluImm, LoadImm,
                                 LoadImmHigh, Load, Store, Branch, Halt>;

// Cost-model classes; every executed instruction counts in exactly one.
enum class InstrClass : std::uint8_t {
  Alu, Mul, Div, Load, Store, Branch, PgasLoad, PgasStore, PgasIncImm, PgasIncReg, PgasSetup,
  PgasBranch, Halt
};
inline constexpr unsigned kNumClasses = 13;

inline const char* class_name(InstrClass c) {
  static constexpr const char* kNames[kNumClasses] = {
      "alu",       "mul",        "div",          "load",         "store",
      "branch",    "pgas_load",  "pgas_store",   "pgas_inc_imm", "pgas_inc_reg",
      "pgas_setup", "pgas_branch", "halt"};
  return kNames[static_cast<unsigned>(c)];
}

inline InstrClass alu_class(AluOp op) {
  if (op == AluOp::Mul) return InstrClass::Mul;
  if (op == AluOp::Div || op == AluOp::Mod) return InstrClass::Div;
  return InstrClass::Alu;
}

inline InstrClass class_of(const Instruction& instr) {
  return std::visit(
      [](const auto& i) -> InstrClass {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, PgasLoad>) return InstrClass::PgasLoad;
        else if constexpr (std::is_same_v<T, PgasStore>) return InstrClass::PgasStore;
        else if constexpr (std::is_same_v<T, PgasIncImm>) return InstrClass::PgasIncImm;
        else if constexpr (std::is_same_v<T, PgasIncReg>) return InstrClass::PgasIncReg;
        else if constexpr (std::is_same_v<T, SetThreads> || std::is_same_v<T, SetBaseAddress>)
          return InstrClass::PgasSetup;
        else if constexpr (std::is_same_v<T, BranchLocality>) return InstrClass::PgasBranch;
        else if constexpr (std::is_same_v<T, AluReg> || std::is_same_v<T, AluImm>)
          return alu_class(i.op);
        else if constexpr (std::is_same_v<T, LoadImm> || std::is_same_v<T, LoadImmHigh>)
          return InstrClass::Alu;
        else if constexpr (std::is_same_v<T, Load>) return InstrClass::Load;
        else if constexpr (std::is_same_v<T, Store>) return InstrClass::Store;
        else if constexpr (std::is_same_v<T, Branch>) return InstrClass::Branch;
        else return InstrClass::Halt;
      },
      instr);
}

// Log2 field for a power-of-two immediate: any 32-bit value with one bit set.
inline std::uint8_t encode_pow2(std::uint64_t value) {
  if (value == 0 || value > 0x8000'0000ull || !std::has_single_bit(value)) {
    throw EncodingError("immediate " + std::to_string(value) + " is not a 32-bit power of two");
  }
  return static_cast<std::uint8_t>(std::countr_zero(value));
}

inline std::uint64_t decode_pow2(std::uint8_t field) {
  if (field >= 32) throw EncodingError("power-of-two field exceeds 5 bits");
  return std::uint64_t{1} << field;
}

struct EncodedInstruction {
  std::uint32_t word = 0;
  friend bool operator==(const EncodedInstruction&, const EncodedInstruction&) = default;
};

namespace opcode {
inline constexpr std::uint32_t kPgasLoad = 0x01;
inline constexpr std::uint32_t kPgasStore = 0x02;
inline constexpr std::uint32_t kPgasIncImm = 0x03;
inline constexpr std::uint32_t kPgasIncReg = 0x04;
inline constexpr std::uint32_t kSetThreads = 0x05;
inline constexpr std::uint32_t kSetBaseAddress = 0x06;
inline constexpr std::uint32_t kBranchLocality = 0x07;
inline constexpr std::uint32_t kAluReg = 0x10;
inline constexpr std::uint32_t kAluImm = 0x11;
inline constexpr std::uint32_t kLoadImm = 0x12;
inline constexpr std::uint32_t kLoadImmHigh = 0x13;
inline constexpr std::uint32_t kLoad = 0x14;
inline constexpr std::uint32_t kStore = 0x15;
inline constexpr std::uint32_t kBranch = 0x18;
inline constexpr std::uint32_t kBranchZero = 0x19;
inline constexpr std::uint32_t kBranchNonZero = 0x1A;
inline constexpr std::uint32_t kHalt = 0x3F;
}  // namespace opcode

namespace detail {

inline bool fits_signed(std::int64_t v, unsigned bits) {
  const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  return v >= lo && v <= hi;
}

inline std::int32_t sign_extend(std::uint32_t v, unsigned bits) {
  const std::uint32_t sign = 1u << (bits - 1);
  v &= (sign << 1) - 1;
  return static_cast<std::int32_t>(v ^ sign) - static_cast<std::int32_t>(sign);
}

inline std::uint32_t field(std::uint32_t word, unsigned hi, unsigned lo) {
  return (word >> lo) & ((1u << (hi - lo + 1)) - 1);
}

class Encoder {
 public:
  explicit Encoder(std::uint32_t op) : word_(op << 26) {}

  Encoder& reg(Reg r, unsigned lo) {
    if (r >= kNumRegs) throw EncodingError("register index " + std::to_string(r) + " >= 32");
    word_ |= std::uint32_t{r} << lo;
    return *this;
  }
  Encoder& bits(std::uint32_t v, unsigned width, unsigned lo, const char* what) {
    if (v >= (1u << width)) throw EncodingError(std::string(what) + " does not fit its field");
    word_ |= v << lo;
    return *this;
  }
  Encoder& signed_bits(std::int64_t v, unsigned width, unsigned lo, const char* what) {
    if (!fits_signed(v, width)) throw EncodingError(std::string(what) + " does not fit its field");
    word_ |= (static_cast<std::uint32_t>(v) & ((1u << width) - 1)) << lo;
    return *this;
  }
  EncodedInstruction done() const { return {word_}; }

 private:
  std::uint32_t word_;
};

inline std::uint32_t mem_func(MemKind k) { return static_cast<std::uint32_t>(k); }

}  // namespace detail

inline EncodedInstruction encode(const Instruction& instr) {
  using detail::Encoder;
  return std::visit(
      [](const auto& i) -> EncodedInstruction {
        using T = std::decay_t<decltype(i)>;
        const auto mem = [](std::uint32_t op, MemKind kind, Reg ra, Reg rb, std::int32_t disp) {
          return Encoder(op).reg(ra, 21).reg(rb, 16).bits(detail::mem_func(kind), 5, 11, "func")
              .signed_bits(disp, 11, 0, "displacement").done();
        };
        if constexpr (std::is_same_v<T, PgasLoad>) {
          return mem(opcode::kPgasLoad, i.kind, i.ra, i.rb, i.disp);
        } else if constexpr (std::is_same_v<T, PgasStore>) {
          return mem(opcode::kPgasStore, i.kind, i.ra, i.rb, i.disp);
        } else if constexpr (std::is_same_v<T, PgasIncImm>) {
          return Encoder(opcode::kPgasIncImm).reg(i.ra, 21).reg(i.rc, 16)
              .bits(i.esize_log2, 5, 11, "esize").bits(i.bsize_log2, 5, 6, "bsize")
              .bits(i.increm_log2, 5, 1, "increm").done();
        } else if constexpr (std::is_same_v<T, PgasIncReg>) {
          return Encoder(opcode::kPgasIncReg).reg(i.ra, 21).reg(i.rc, 16)
              .bits(i.esize_log2, 5, 11, "esize").bits(i.bsize_log2, 5, 6, "bsize")
              .reg(i.rb, 1).done();
        } else if constexpr (std::is_same_v<T, SetThreads>) {
          return Encoder(opcode::kSetThreads).reg(i.ra, 21).done();
        } else if constexpr (std::is_same_v<T, SetBaseAddress>) {
          return Encoder(opcode::kSetBaseAddress).reg(i.ra, 21).reg(i.rb, 16).done();
        } else if constexpr (std::is_same_v<T, BranchLocality>) {
          return Encoder(opcode::kBranchLocality).bits(i.mask, 4, 22, "locality mask")
              .signed_bits(i.offset, 22, 0, "branch offset").done();
        } else if constexpr (std::is_same_v<T, AluReg>) {
          return Encoder(opcode::kAluReg).reg(i.ra, 21).reg(i.rb, 16).reg(i.rc, 11)
              .bits(static_cast<std::uint32_t>(i.op), 11, 0, "alu func").done();
        } else if constexpr (std::is_same_v<T, AluImm>) {
          return Encoder(opcode::kAluImm).reg(i.ra, 21).reg(i.rc, 16)
              .bits(static_cast<std::uint32_t>(i.op), 5, 11, "alu func")
              .signed_bits(i.imm, 11, 0, "immediate").done();
        } else if constexpr (std::is_same_v<T, LoadImm>) {
          return Encoder(opcode::kLoadImm).reg(i.rc, 21).signed_bits(i.imm, 21, 0, "immediate").done();
        } else if constexpr (std::is_same_v<T, LoadImmHigh>) {
          return Encoder(opcode::kLoadImmHigh).reg(i.rc, 21).bits(i.imm, 16, 0, "immediate").done();
        } else if constexpr (std::is_same_v<T, Load>) {
          return mem(opcode::kLoad, i.kind, i.ra, i.rb, i.disp);
        } else if constexpr (std::is_same_v<T, Store>) {
          return mem(opcode::kStore, i.kind, i.ra, i.rb, i.disp);
        } else if constexpr (std::is_same_v<T, Branch>) {
          switch (i.cond) {
            case BranchCond::Always:
              if (i.ra != 0) throw EncodingError("unconditional branch takes no register");
              return Encoder(opcode::kBranch).signed_bits(i.offset, 26, 0, "branch offset").done();
            case BranchCond::Zero:
              return Encoder(opcode::kBranchZero).reg(i.ra, 21)
                  .signed_bits(i.offset, 21, 0, "branch offset").done();
            case BranchCond::NonZero:
              return Encoder(opcode::kBranchNonZero).reg(i.ra, 21)
                  .signed_bits(i.offset, 21, 0, "branch offset").done();
          }
          throw EncodingError("bad branch condition");
        } else {
          return Encoder(opcode::kHalt).done();
        }
      },
      instr);
}

inline Instruction decode(EncodedInstruction enc) {
  using detail::field;
  using detail::sign_extend;
  const std::uint32_t w = enc.word;
  const auto illegal = [&](const char* why) -> IllegalInstruction {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", w);
    return IllegalInstruction(std::string("illegal instruction ") + buf + ": " + why);
  };
  const auto reserved_zero = [&](unsigned hi, unsigned lo) {
    if (field(w, hi, lo) != 0) throw illegal("reserved bits set");
  };
  const auto ra = static_cast<Reg>(field(w, 25, 21));
  const auto rb = static_cast<Reg>(field(w, 20, 16));
  const auto mem_kind = [&] {
    const std::uint32_t func = field(w, 15, 11);
    if (func > static_cast<std::uint32_t>(MemKind::T)) throw illegal("unknown load/store func");
    return static_cast<MemKind>(func);
  };
  const auto disp = [&] { return sign_extend(field(w, 10, 0), 11); };

  switch (w >> 26) {
    case opcode::kPgasLoad: return PgasLoad{mem_kind(), ra, rb, disp()};
    case opcode::kPgasStore: return PgasStore{mem_kind(), ra, rb, disp()};
    case opcode::kPgasIncImm:
      reserved_zero(0, 0);
      return PgasIncImm{ra, rb, static_cast<std::uint8_t>(field(w, 15, 11)),
                        static_cast<std::uint8_t>(field(w, 10, 6)),
                        static_cast<std::uint8_t>(field(w, 5, 1))};
    case opcode::kPgasIncReg:
      reserved_zero(0, 0);
      return PgasIncReg{ra, static_cast<Reg>(field(w, 5, 1)), rb,
                        static_cast<std::uint8_t>(field(w, 15, 11)),
                        static_cast<std::uint8_t>(field(w, 10, 6))};
    case opcode::kSetThreads:
      reserved_zero(20, 0);
      return SetThreads{ra};
    case opcode::kSetBaseAddress:
      reserved_zero(15, 0);
      return SetBaseAddress{ra, rb};
    case opcode::kBranchLocality:
      return BranchLocality{static_cast<std::uint8_t>(field(w, 25, 22)),
                            sign_extend(field(w, 21, 0), 22)};
    case opcode::kAluReg: {
      const std::uint32_t func = field(w, 10, 0);
      if (func >= kNumAluOps) throw illegal("unknown alu func");
      return AluReg{static_cast<AluOp>(func), ra, rb, static_cast<Reg>(field(w, 15, 11))};
    }
    case opcode::kAluImm: {
      const std::uint32_t func = field(w, 15, 11);
      if (func >= kNumAluOps) throw illegal("unknown alu func");
      return AluImm{static_cast<AluOp>(func), ra, disp(), rb};
    }
    case opcode::kLoadImm: return LoadImm{ra, sign_extend(field(w, 20, 0), 21)};
    case opcode::kLoadImmHigh:
      reserved_zero(20, 16);
      return LoadImmHigh{ra, static_cast<std::uint16_t>(field(w, 15, 0))};
    case opcode::kLoad: return Load{mem_kind(), ra, rb, disp()};
    case opcode::kStore: return Store{mem_kind(), ra, rb, disp()};
    case opcode::kBranch: return Branch{BranchCond::Always, 0, sign_extend(field(w, 25, 0), 26)};
    case opcode::kBranchZero:
      return Branch{BranchCond::Zero, ra, sign_extend(field(w, 20, 0), 21)};
    case opcode::kBranchNonZero:
      return Branch{BranchCond::NonZero, ra, sign_extend(field(w, 20, 0), 21)};
    case opcode::kHalt:
      reserved_zero(25, 0);
      return Halt{};
    default: throw illegal("unknown opcode");
  }
}

}  // namespace pgas
