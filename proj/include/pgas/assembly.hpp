#pragma once

// Line-oriented assembly text for the instruction set. One instruction per
// line, mnemonic then space-separated operands; '#' starts a comment.
//
//   pgas_ldl r5 r4 8          ra rb disp     (f-registers for lds/ldt/sts/stt)
//   pgas_inc_imm r4 r4 4 4 1  ra rc esize bsize increm   (power-of-two values)
//   pgas_inc_reg r4 r9 r4 4 4 ra rb rc esize bsize
//   set_threads r2
//   set_base_address r5 r6    thread-index-reg base-reg
//   bloc 1 3                  mask offset
//   add r1 r2 r3              r3 = r1 + r2
//   addi r1 -1 r3             r3 = r1 + -1
//   ldi r3 100 / ldih r3 0xff
//   ldq r5 r4 0 / stq r5 r4 0 plain loads and stores on absolute addresses
//   br -5 / beq r3 -5 / bne r3 -5
//   halt

#include <array>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pgas/error.hpp"
#include "pgas/isa.hpp"

namespace pgas {

namespace detail {

inline constexpr std::array<const char*, 6> kMemSuffix = {"bu", "wu", "l", "q", "s", "t"};
inline constexpr std::array<const char*, 6> kStoreSuffix = {"b", "w", "l", "q", "s", "t"};
inline constexpr std::array<const char*, kNumAluOps> kAluNames = {
    "add", "sub", "mul", "div", "mod", "and", "or", "xor", "shl", "shr", "sra", "cmpeq", "cmplt",
    "cmpult"};

inline std::string reg_name(Reg r, bool fp = false) {
  return (fp ? "f" : "r") + std::to_string(r);
}

}  // namespace detail

inline std::string mnemonic(const Instruction& instr) {
  using namespace detail;
  return std::visit(
      [](const auto& i) -> std::string {
        using T = std::decay_t<decltype(i)>;
        const auto k = [](MemKind kind) { return static_cast<unsigned>(kind); };
        if constexpr (std::is_same_v<T, PgasLoad>) return std::string("pgas_ld") + kMemSuffix[k(i.kind)];
        else if constexpr (std::is_same_v<T, PgasStore>) return std::string("pgas_st") + kStoreSuffix[k(i.kind)];
        else if constexpr (std::is_same_v<T, PgasIncImm>) return "pgas_inc_imm";
        else if constexpr (std::is_same_v<T, PgasIncReg>) return "pgas_inc_reg";
        else if constexpr (std::is_same_v<T, SetThreads>) return "set_threads";
        else if constexpr (std::is_same_v<T, SetBaseAddress>) return "set_base_address";
        else if constexpr (std::is_same_v<T, BranchLocality>) return "bloc";
        else if constexpr (std::is_same_v<T, AluReg>) return kAluNames[static_cast<unsigned>(i.op)];
        else if constexpr (std::is_same_v<T, AluImm>) return std::string(kAluNames[static_cast<unsigned>(i.op)]) + "i";
        else if constexpr (std::is_same_v<T, LoadImm>) return "ldi";
        else if constexpr (std::is_same_v<T, LoadImmHigh>) return "ldih";
        else if constexpr (std::is_same_v<T, Load>) return std::string("ld") + kMemSuffix[k(i.kind)];
        else if constexpr (std::is_same_v<T, Store>) return std::string("st") + kStoreSuffix[k(i.kind)];
        else if constexpr (std::is_same_v<T, Branch>) {
          switch (i.cond) {
            case BranchCond::Always: return "br";
            case BranchCond::Zero: return "beq";
            case BranchCond::NonZero: return "bne";
          }
          return "br";
        } else return "halt";
      },
      instr);
}

inline std::string format_instruction(const Instruction& instr) {
  using detail::reg_name;
  std::ostringstream os;
  os << mnemonic(instr);
  std::visit(
      [&os](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, PgasLoad> || std::is_same_v<T, PgasStore> ||
                      std::is_same_v<T, Load> || std::is_same_v<T, Store>) {
          os << ' ' << reg_name(i.ra, is_float(i.kind)) << ' ' << reg_name(i.rb) << ' ' << i.disp;
        } else if constexpr (std::is_same_v<T, PgasIncImm>) {
          os << ' ' << reg_name(i.ra) << ' ' << reg_name(i.rc) << ' ' << decode_pow2(i.esize_log2)
             << ' ' << decode_pow2(i.bsize_log2) << ' ' << decode_pow2(i.increm_log2);
        } else if constexpr (std::is_same_v<T, PgasIncReg>) {
          os << ' ' << reg_name(i.ra) << ' ' << reg_name(i.rb) << ' ' << reg_name(i.rc) << ' '
             << decode_pow2(i.esize_log2) << ' ' << decode_pow2(i.bsize_log2);
        } else if constexpr (std::is_same_v<T, SetThreads>) {
          os << ' ' << reg_name(i.ra);
        } else if constexpr (std::is_same_v<T, SetBaseAddress>) {
          os << ' ' << reg_name(i.ra) << ' ' << reg_name(i.rb);
        } else if constexpr (std::is_same_v<T, BranchLocality>) {
          os << ' ' << unsigned{i.mask} << ' ' << i.offset;
        } else if constexpr (std::is_same_v<T, AluReg>) {
          os << ' ' << reg_name(i.ra) << ' ' << reg_name(i.rb) << ' ' << reg_name(i.rc);
        } else if constexpr (std::is_same_v<T, AluImm>) {
          os << ' ' << reg_name(i.ra) << ' ' << i.imm << ' ' << reg_name(i.rc);
        } else if constexpr (std::is_same_v<T, LoadImm>) {
          os << ' ' << reg_name(i.rc) << ' ' << i.imm;
        } else if constexpr (std::is_same_v<T, LoadImmHigh>) {
          os << ' ' << reg_name(i.rc) << ' ' << i.imm;
        } else if constexpr (std::is_same_v<T, Branch>) {
          if (i.cond != BranchCond::Always) os << ' ' << reg_name(i.ra);
          os << ' ' << i.offset;
        }
      },
      instr);
  return os.str();
}

namespace detail {

class OperandReader {
 public:
  OperandReader(std::vector<std::string> tokens, int lineno)
      : tokens_(std::move(tokens)), lineno_(lineno) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("assembly line " + std::to_string(lineno_) + ": " + why);
  }

  const std::string& next() {
    if (pos_ >= tokens_.size()) fail("missing operand for '" + tokens_[0] + "'");
    return tokens_[pos_++];
  }

  Reg reg(char prefix = 'r') {
    const std::string& t = next();
    if (t.size() < 2 || t[0] != prefix) fail("expected " + std::string(1, prefix) + "-register, got '" + t + "'");
    const std::int64_t v = parse_int(t.substr(1));
    if (v < 0 || v >= static_cast<std::int64_t>(kNumRegs)) fail("register out of range: " + t);
    return static_cast<Reg>(v);
  }

  std::int64_t number() { return parse_int(next()); }

  std::uint8_t pow2() {
    const std::int64_t v = number();
    try {
      return encode_pow2(static_cast<std::uint64_t>(v));
    } catch (const EncodingError& e) {
      fail(e.what());
    }
  }

  void finish() const {
    if (pos_ != tokens_.size()) fail("unexpected operand '" + tokens_[pos_] + "'");
  }

 private:
  std::int64_t parse_int(const std::string& s) const {
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(s, &used, 0);
      if (used != s.size()) fail("bad number '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + s + "'");
    }
  }

  std::vector<std::string> tokens_;
  int lineno_;
  std::size_t pos_ = 1;
};

template <typename T>
T checked_imm(OperandReader& in, std::int64_t v) {
  if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) {
    in.fail("immediate out of range");
  }
  return static_cast<T>(v);
}

}  // namespace detail

// Parses one instruction; returns false for a blank or comment-only line.
inline bool parse_instruction(std::string_view line, Instruction& out, int lineno = 0) {
  using namespace detail;
  std::string text(line.substr(0, line.find('#')));
  std::istringstream ss(text);
  std::vector<std::string> tokens;
  for (std::string t; ss >> t;) tokens.push_back(t);
  if (tokens.empty()) return false;

  OperandReader in(tokens, lineno);
  const std::string& m = tokens[0];

  const auto mem_operands = [&](MemKind kind, auto make) {
    const Reg ra = in.reg(is_float(kind) ? 'f' : 'r');
    const Reg rb = in.reg();
    const auto disp = checked_imm<std::int32_t>(in, in.number());
    return make(kind, ra, rb, disp);
  };
  const auto match_mem = [&](std::string_view prefix, const auto& suffixes, auto make) -> bool {
    if (!m.starts_with(prefix)) return false;
    const std::string_view rest = std::string_view(m).substr(prefix.size());
    for (unsigned k = 0; k < suffixes.size(); ++k) {
      if (rest == suffixes[k]) {
        out = mem_operands(static_cast<MemKind>(k), make);
        return true;
      }
    }
    return false;
  };

  bool matched =
      match_mem("pgas_ld", kMemSuffix,
                [](MemKind k, Reg a, Reg b, std::int32_t d) -> Instruction { return PgasLoad{k, a, b, d}; }) ||
      match_mem("pgas_st", kStoreSuffix,
                [](MemKind k, Reg a, Reg b, std::int32_t d) -> Instruction { return PgasStore{k, a, b, d}; }) ||
      match_mem("ld", kMemSuffix,
                [](MemKind k, Reg a, Reg b, std::int32_t d) -> Instruction { return Load{k, a, b, d}; }) ||
      match_mem("st", kStoreSuffix,
                [](MemKind k, Reg a, Reg b, std::int32_t d) -> Instruction { return Store{k, a, b, d}; });

  if (!matched) {
    matched = true;
    if (m == "pgas_inc_imm") {
      PgasIncImm i;
      i.ra = in.reg();
      i.rc = in.reg();
      i.esize_log2 = in.pow2();
      i.bsize_log2 = in.pow2();
      i.increm_log2 = in.pow2();
      out = i;
    } else if (m == "pgas_inc_reg") {
      PgasIncReg i;
      i.ra = in.reg();
      i.rb = in.reg();
      i.rc = in.reg();
      i.esize_log2 = in.pow2();
      i.bsize_log2 = in.pow2();
      out = i;
    } else if (m == "set_threads") {
      out = SetThreads{in.reg()};
    } else if (m == "set_base_address") {
      const Reg a = in.reg();
      out = SetBaseAddress{a, in.reg()};
    } else if (m == "bloc") {
      const auto mask = in.number();
      if (mask < 0 || mask > 15) in.fail("locality mask must be in [0, 15]");
      out = BranchLocality{static_cast<std::uint8_t>(mask), checked_imm<std::int32_t>(in, in.number())};
    } else if (m == "ldi") {
      const Reg rc = in.reg();
      out = LoadImm{rc, checked_imm<std::int32_t>(in, in.number())};
    } else if (m == "ldih") {
      const Reg rc = in.reg();
      out = LoadImmHigh{rc, checked_imm<std::uint16_t>(in, in.number())};
    } else if (m == "br") {
      out = Branch{BranchCond::Always, 0, checked_imm<std::int32_t>(in, in.number())};
    } else if (m == "beq" || m == "bne") {
      const Reg ra = in.reg();
      out = Branch{m == "beq" ? BranchCond::Zero : BranchCond::NonZero, ra,
                   checked_imm<std::int32_t>(in, in.number())};
    } else if (m == "halt") {
      out = Halt{};
    } else {
      matched = false;
      for (unsigned op = 0; op < kNumAluOps; ++op) {
        if (m == kAluNames[op]) {
          AluReg i{static_cast<AluOp>(op)};
          i.ra = in.reg();
          i.rb = in.reg();
          i.rc = in.reg();
          out = i;
          matched = true;
        } else if (m == std::string(kAluNames[op]) + "i") {
          AluImm i{static_cast<AluOp>(op)};
          i.ra = in.reg();
          i.imm = checked_imm<std::int32_t>(in, in.number());
          i.rc = in.reg();
          out = i;
          matched = true;
        }
        if (matched) break;
      }
    }
  }
  if (!matched) in.fail("unknown mnemonic '" + m + "'");
  in.finish();
  try {
    encode(out);  // every accepted line must fit its encoding
  } catch (const EncodingError& e) {
    in.fail(e.what());
  }
  return true;
}

inline Instruction parse_instruction(std::string_view line) {
  Instruction i;
  if (!parse_instruction(line, i, 0)) throw ParseError("empty instruction");
  return i;
}

inline std::vector<Instruction> parse_program(std::istream& in) {
  std::vector<Instruction> program;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    Instruction i;
    if (parse_instruction(line, i, lineno)) program.push_back(i);
  }
  return program;
}

inline void write_program(std::ostream& os, const std::vector<Instruction>& program) {
  for (const auto& i : program) os << format_instruction(i) << '\n';
}

}  // namespace pgas
