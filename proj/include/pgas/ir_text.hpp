#pragma once

// Line-oriented text form of the traversal IR.
//
//   threads <n>
//   array p<id> <blocksize> <elemsize> <numelems>
//   seek p<id> <operand>
//   inc p<id> <amount>
//   load v<d> p<id> [<disp> [<kind>]]
//   store v<s> p<id> [<disp> [<kind>]]
//   <aluop> v<d> <operand> <operand>      add sub mul div mod and or xor shl shr
//                                         sra cmpeq cmplt cmpult
//   loop <count>
//   end
//
// Operands are v<n>, tid, nthreads or an integer. Kinds are b w l q s t.
// '#' starts a comment. Every array must be declared before the first op.

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pgas/assembly.hpp"
#include "pgas/error.hpp"
#include "pgas/lowering.hpp"

namespace pgas {

namespace detail {

class IrParser {
 public:
  explicit IrParser(std::istream& in) : in_(in) {}

  TraversalIR parse() {
    TraversalIR ir;
    std::vector<Loop> loops;  // open loops, innermost last
    const auto current = [&]() -> std::vector<IrOp>& {
      return loops.empty() ? ir.ops : loops.back().body;
    };
    bool seen_op = false;
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      tokens_.clear();
      pos_ = 0;
      for (std::string t; ss >> t;) tokens_.push_back(t);
      if (tokens_.empty()) continue;
      const std::string head = next();

      if (head == "threads") {
        if (seen_op) fail("threads must precede all ops");
        ir.threads = unsigned_number();
      } else if (head == "array") {
        if (seen_op) fail("arrays must be declared before all ops");
        const unsigned id = prefixed('p');
        IrArray arr;
        arr.blocksize = unsigned_number();
        arr.elemsize = unsigned_number();
        arr.numelems = unsigned_number();
        if (!ir.arrays.emplace(id, arr).second) fail("pointer declared twice");
      } else if (head == "loop") {
        seen_op = true;
        loops.push_back(Loop{unsigned_number(), {}});
        done();
        continue;
      } else if (head == "end") {
        if (loops.empty()) fail("'end' without 'loop'");
        done();
        Loop loop = std::move(loops.back());
        loops.pop_back();
        current().push_back(std::move(loop));
        continue;
      } else {
        seen_op = true;
        current().push_back(op(head));
      }
      done();
    }
    if (!loops.empty()) fail("unterminated loop");
    return ir;
  }

 private:
  IrOp op(const std::string& head) {
    if (head == "seek") {
      const unsigned p = prefixed('p');
      return Seek{p, operand()};
    }
    if (head == "inc") {
      const unsigned p = prefixed('p');
      return IncPtr{p, number()};
    }
    if (head == "load" || head == "store") {
      const unsigned v = prefixed('v');
      const unsigned p = prefixed('p');
      std::int32_t disp = 0;
      std::optional<MemKind> kind;
      if (more()) disp = static_cast<std::int32_t>(number());
      if (more()) kind = mem_kind(next());
      if (head == "load") return IrLoad{v, p, disp, kind};
      return IrStore{v, p, disp, kind};
    }
    for (unsigned a = 0; a < kNumAluOps; ++a) {
      if (head == kAluNames[a]) {
        const unsigned dst = prefixed('v');
        const Operand x = operand();
        return IrAlu{static_cast<AluOp>(a), dst, x, operand()};
      }
    }
    fail("unknown op '" + head + "'");
  }

  MemKind mem_kind(const std::string& s) {
    static const char* kKinds[] = {"b", "w", "l", "q", "s", "t"};
    for (unsigned k = 0; k < 6; ++k) {
      if (s == kKinds[k]) return static_cast<MemKind>(k);
    }
    fail("unknown access kind '" + s + "'");
  }

  Operand operand() {
    const std::string t = next();
    if (t == "tid") return Operand::thread_id();
    if (t == "nthreads") return Operand::num_threads();
    if (!t.empty() && t[0] == 'v') return Operand::reg(static_cast<unsigned>(parse_int(t.substr(1))));
    return Operand::imm(parse_int(t));
  }

  unsigned prefixed(char prefix) {
    const std::string t = next();
    if (t.size() < 2 || t[0] != prefix) fail("expected " + std::string(1, prefix) + "<n>, got '" + t + "'");
    const std::int64_t v = parse_int(t.substr(1));
    if (v < 0) fail("negative index");
    return static_cast<unsigned>(v);
  }

  std::uint64_t unsigned_number() {
    const std::int64_t v = number();
    if (v < 0) fail("expected a non-negative number");
    return static_cast<std::uint64_t>(v);
  }

  std::int64_t number() { return parse_int(next()); }

  std::int64_t parse_int(const std::string& s) {
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(s, &used, 0);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    fail("bad number '" + s + "'");
  }

  bool more() const { return pos_ < tokens_.size(); }
  const std::string& next() {
    if (!more()) fail("missing operand");
    return tokens_[pos_++];
  }
  void done() {
    if (more()) fail("unexpected '" + tokens_[pos_] + "'");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("IR line " + std::to_string(lineno_) + ": " + why);
  }

  std::istream& in_;
  int lineno_ = 0;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

inline std::string operand_text(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Value: return "v" + std::to_string(o.value);
    case Operand::Kind::ThreadId: return "tid";
    case Operand::Kind::NumThreads: return "nthreads";
    case Operand::Kind::Imm: return std::to_string(o.value);
  }
  return "?";
}

inline void write_ops(std::ostream& os, const std::vector<IrOp>& ops, unsigned depth) {
  static const char* kKinds[] = {"b", "w", "l", "q", "s", "t"};
  const std::string indent(2 * depth, ' ');
  for (const IrOp& op : ops) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          os << indent;
          if constexpr (std::is_same_v<T, IncPtr>) {
            os << "inc p" << o.ptr << ' ' << o.amount << '\n';
          } else if constexpr (std::is_same_v<T, Seek>) {
            os << "seek p" << o.ptr << ' ' << operand_text(o.index) << '\n';
          } else if constexpr (std::is_same_v<T, IrLoad> || std::is_same_v<T, IrStore>) {
            if constexpr (std::is_same_v<T, IrLoad>) {
              os << "load v" << o.dst;
            } else {
              os << "store v" << o.src;
            }
            os << " p" << o.ptr << ' ' << o.disp;
            if (o.kind) os << ' ' << kKinds[static_cast<unsigned>(*o.kind)];
            os << '\n';
          } else if constexpr (std::is_same_v<T, IrAlu>) {
            os << kAluNames[static_cast<unsigned>(o.op)] << " v" << o.dst << ' ' << operand_text(o.a)
               << ' ' << operand_text(o.b) << '\n';
          } else {
            os << "loop " << o.count << '\n';
            write_ops(os, o.body, depth + 1);
            os << indent << "end\n";
          }
        },
        op);
  }
}

}  // namespace detail

inline TraversalIR parse_ir(std::istream& in) { return detail::IrParser(in).parse(); }

inline TraversalIR parse_ir(const std::string& text) {
  std::istringstream in(text);
  return parse_ir(in);
}

inline void write_ir(std::ostream& os, const TraversalIR& ir) {
  os << "threads " << ir.threads << '\n';
  for (const auto& [id, a] : ir.arrays) {
    os << "array p" << id << ' ' << a.blocksize << ' ' << a.elemsize << ' ' << a.numelems << '\n';
  }
  detail::write_ops(os, ir.ops, 0);
}

}  // namespace pgas
