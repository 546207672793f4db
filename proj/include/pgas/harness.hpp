#pragma once

// Benchmark kernels run as SPMD programs on simulated threads, costed with a
// per-instruction-class cycle model.
//
// Each kernel is emitted as traversal IR, lowered in software and/or hardware
// mode, and executed on one MachineState per thread over a shared
// PartitionedMemory with strict round-robin scheduling (one instruction per
// thread per turn). Outputs are checked against a direct computation before
// any report is produced.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pgas/error.hpp"
#include "pgas/increment.hpp"
#include "pgas/isa.hpp"
#include "pgas/lowering.hpp"
#include "pgas/machine.hpp"
#include "pgas/memory.hpp"
#include "pgas/shared_pointer.hpp"
#include "pgas/translation.hpp"

namespace pgas {

// Cycles charged per executed instruction, by class. The default charges 1
// for everything (one instruction per clock).
class CostModel {
 public:
  CostModel() { cycles_.fill(1); }

  void set(InstrClass c, std::uint64_t cycles) {
    if (cycles < 1) throw ValidationError("instruction costs must be >= 1");
    cycles_[static_cast<unsigned>(c)] = cycles;
  }
  std::uint64_t cost(InstrClass c) const { return cycles_[static_cast<unsigned>(c)]; }

  std::uint64_t cycles(const Counters& counts) const {
    std::uint64_t total = 0;
    for (unsigned c = 0; c < kNumClasses; ++c) total += counts[c] * cycles_[c];
    return total;
  }

  bool is_atomic() const {
    for (auto c : cycles_) {
      if (c != 1) return false;
    }
    return true;
  }

 private:
  std::array<std::uint64_t, kNumClasses> cycles_{};
};

enum class Kernel : std::uint8_t { VecAdd, MatMul, Traverse };

inline const char* kernel_name(Kernel k) {
  switch (k) {
    case Kernel::VecAdd: return "vecadd";
    case Kernel::MatMul: return "matmul";
    case Kernel::Traverse: return "traverse";
  }
  return "?";
}

inline Kernel parse_kernel(const std::string& name) {
  if (name == "vecadd") return Kernel::VecAdd;
  if (name == "matmul") return Kernel::MatMul;
  if (name == "traverse") return Kernel::Traverse;
  throw ValidationError("unknown kernel '" + name + "'");
}

struct ThreadCost {
  std::uint64_t instructions = 0;
  std::uint64_t cycles = 0;
};

struct ModeReport {
  LowerMode mode = LowerMode::Hw;
  Counters counts{};
  std::array<Counters, kNumRegions> region_counts{};
  std::uint64_t cycles = 0;
  std::vector<ThreadCost> per_thread;
  LoweringReport lowering;

  std::uint64_t instructions() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  std::uint64_t count(InstrClass c) const { return counts[static_cast<unsigned>(c)]; }
  std::uint64_t region_instructions(Region r) const {
    std::uint64_t n = 0;
    for (auto c : region_counts[static_cast<unsigned>(r)]) n += c;
    return n;
  }
};

struct CostReport {
  std::string kernel;
  std::uint64_t threads = 0;
  std::uint64_t size = 0;
  CostModel cost;
  std::optional<ModeReport> sw;
  std::optional<ModeReport> hw;

  std::optional<double> speedup() const {
    if (!sw || !hw || hw->cycles == 0) return std::nullopt;
    return static_cast<double>(sw->cycles) / static_cast<double>(hw->cycles);
  }
};

enum class ModeSelection : std::uint8_t { Sw, Hw, Both };

inline ModeSelection parse_mode(const std::string& s) {
  if (s == "sw") return ModeSelection::Sw;
  if (s == "hw") return ModeSelection::Hw;
  if (s == "both") return ModeSelection::Both;
  throw ValidationError("unknown mode '" + s + "'");
}

struct KernelConfig {
  Kernel kernel = Kernel::VecAdd;
  std::uint64_t threads = 1;
  std::uint64_t elems = 1024;  // matmul: elements per matrix, a perfect square
  CostModel cost;
  Topology topology;
  std::uint64_t fuel = 1'000'000'000;  // per thread
  std::ostream* trace = nullptr;
};

// Deterministic input contents of element `index` of input array `array`.
inline std::uint32_t kernel_input(unsigned array, std::uint64_t index) {
  return static_cast<std::uint32_t>((7 * index + 13 * array + 3) % 101);
}

namespace detail {

inline std::uint64_t matrix_dim(std::uint64_t elems) {
  const auto n = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(elems))));
  if (n * n != elems) throw ValidationError("matmul size must be a perfect square");
  return n;
}

inline std::uint64_t chunk_of(std::uint64_t elems, std::uint64_t threads) {
  if (threads == 0 || threads > 0x10000) throw ValidationError("thread count out of range");
  if (elems == 0 || elems % threads != 0) {
    throw ValidationError("size must be a positive multiple of the thread count");
  }
  const std::uint64_t chunk = elems / threads;
  if (chunk > 0x10000) throw ValidationError("per-thread block exceeds the 16-bit phase field");
  return chunk;
}

inline IrLoad ld(unsigned dst, unsigned ptr) { return IrLoad{dst, ptr, 0, std::nullopt}; }
inline IrStore st(unsigned src, unsigned ptr, std::optional<MemKind> kind = std::nullopt) {
  return IrStore{src, ptr, 0, kind};
}
inline IrAlu alu(AluOp op, unsigned dst, Operand a, Operand b) { return IrAlu{op, dst, a, b}; }
inline Operand v(unsigned r) { return Operand::reg(r); }
inline Operand imm(std::int64_t x) { return Operand::imm(x); }

}  // namespace detail

// c[i] = a[i] + b[i]; each thread owns one contiguous block of every array.
inline TraversalIR vecadd_ir(std::uint64_t threads, std::uint64_t elems) {
  using namespace detail;
  const std::uint64_t chunk = chunk_of(elems, threads);
  TraversalIR ir;
  ir.threads = threads;
  for (unsigned p = 0; p < 3; ++p) ir.arrays[p] = IrArray{chunk, 4, elems};
  ir.ops = {
      alu(AluOp::Mul, 0, Operand::thread_id(), imm(static_cast<std::int64_t>(chunk))),
      Seek{0, v(0)},
      Seek{1, v(0)},
      Seek{2, v(0)},
      Loop{chunk,
           {ld(1, 0), ld(2, 1), alu(AluOp::Add, 3, v(1), v(2)), st(3, 2), IncPtr{0, 1},
            IncPtr{1, 1}, IncPtr{2, 1}}},
  };
  return ir;
}

// Row-blocked c = a * b on n x n matrices; b is walked down its columns.
inline TraversalIR matmul_ir(std::uint64_t threads, std::uint64_t elems) {
  using namespace detail;
  const std::uint64_t n = matrix_dim(elems);
  if (n % threads != 0) throw ValidationError("matrix dimension must be a multiple of the thread count");
  const std::uint64_t chunk = chunk_of(elems, threads);
  const std::uint64_t rows = n / threads;
  const auto sn = static_cast<std::int64_t>(n);
  TraversalIR ir;
  ir.threads = threads;
  for (unsigned p = 0; p < 3; ++p) ir.arrays[p] = IrArray{chunk, 4, elems};
  Loop inner{n,
             {ld(2, 0), ld(3, 1), alu(AluOp::Mul, 4, v(2), v(3)), alu(AluOp::Add, 1, v(1), v(4)),
              IncPtr{0, 1}, IncPtr{1, sn}}};
  Loop column{n,
              {alu(AluOp::Add, 1, imm(0), imm(0)), inner, st(1, 2), IncPtr{2, 1}, IncPtr{0, -sn},
               IncPtr{1, 1 - sn * sn}}};
  Loop row{rows, {column, IncPtr{0, sn}, IncPtr{1, -sn}}};
  ir.ops = {
      alu(AluOp::Mul, 0, Operand::thread_id(), imm(static_cast<std::int64_t>(chunk))),
      Seek{0, v(0)},
      Seek{1, imm(0)},
      Seek{2, v(0)},
      row,
  };
  return ir;
}

// Sums each thread's block of an array into one quad per thread.
inline TraversalIR traverse_ir(std::uint64_t threads, std::uint64_t elems) {
  using namespace detail;
  const std::uint64_t chunk = chunk_of(elems, threads);
  TraversalIR ir;
  ir.threads = threads;
  ir.arrays[0] = IrArray{chunk, 4, elems};
  ir.arrays[1] = IrArray{1, 8, threads};
  ir.ops = {
      alu(AluOp::Mul, 0, Operand::thread_id(), imm(static_cast<std::int64_t>(chunk))),
      Seek{0, v(0)},
      Seek{1, Operand::thread_id()},
      alu(AluOp::Add, 1, imm(0), imm(0)),
      Loop{chunk, {ld(2, 0), alu(AluOp::Add, 1, v(1), v(2)), IncPtr{0, 1}}},
      st(1, 1, MemKind::Q),
  };
  return ir;
}

inline TraversalIR kernel_ir(Kernel k, std::uint64_t threads, std::uint64_t elems) {
  switch (k) {
    case Kernel::VecAdd: return vecadd_ir(threads, elems);
    case Kernel::MatMul: return matmul_ir(threads, elems);
    case Kernel::Traverse: return traverse_ir(threads, elems);
  }
  throw ValidationError("unknown kernel");
}

// Host-side access to shared array elements by logical index.
inline std::uint64_t element_address(const SharedArrayHandle& h, std::uint64_t index,
                                     const PartitionedMemory& mem) {
  return translate_lut(h.pointer_to(index), mem.base_table());
}

// Segment size large enough for every array of `ir`, rounded to a power of two.
inline MemoryConfig memory_for(const TraversalIR& ir) {
  std::uint64_t bytes = 0;
  for (const auto& [id, arr] : ir.arrays) bytes += ir.spec_of(id).bytes_of_thread(0) + 8;
  MemoryConfig config;
  config.segment_size = std::max<std::uint64_t>(config.segment_size, std::bit_ceil(bytes));
  return config;
}

// Runs every machine to completion, one instruction per machine per turn.
inline void run_round_robin(std::vector<MachineState>& machines, const Program& program,
                            std::uint64_t fuel, std::ostream* trace = nullptr) {
  std::vector<std::uint64_t> start(machines.size());
  for (std::size_t t = 0; t < machines.size(); ++t) start[t] = machines[t].steps();
  std::vector<std::string> prefixes;
  for (std::size_t t = 0; t < machines.size(); ++t) prefixes.push_back("t" + std::to_string(t) + ' ');
  bool live = true;
  while (live) {
    live = false;
    for (std::size_t t = 0; t < machines.size(); ++t) {
      MachineState& m = machines[t];
      if (m.halted) continue;
      if (m.steps() - start[t] == fuel) {
        throw TimeoutError("thread " + std::to_string(t) + " exhausted its fuel");
      }
      if (step_program(m, program, trace, prefixes[t].c_str())) live = true;
    }
  }
}

namespace detail {

inline void check_outputs(Kernel k, std::uint64_t threads, std::uint64_t elems,
                          const std::map<unsigned, SharedArrayHandle>& arrays,
                          const PartitionedMemory& mem) {
  const auto read = [&](unsigned array, std::uint64_t index, unsigned width) {
    return mem.read(element_address(arrays.at(array), index, mem), width);
  };
  const auto mismatch = [&](std::uint64_t index, std::uint64_t got, std::uint64_t want) {
    throw CorrectnessFailure(std::string(kernel_name(k)) + " output mismatch at element " +
                             std::to_string(index) + ": got " + std::to_string(got) +
                             ", expected " + std::to_string(want));
  };
  switch (k) {
    case Kernel::VecAdd:
      for (std::uint64_t i = 0; i < elems; ++i) {
        const std::uint64_t want = (std::uint64_t{kernel_input(0, i)} + kernel_input(1, i)) & 0xFFFF'FFFFu;
        if (const auto got = read(2, i, 4); got != want) mismatch(i, got, want);
      }
      break;
    case Kernel::MatMul: {
      const std::uint64_t n = matrix_dim(elems);
      for (std::uint64_t i = 0; i < n; ++i) {
        for (std::uint64_t j = 0; j < n; ++j) {
          std::uint64_t want = 0;
          for (std::uint64_t x = 0; x < n; ++x) {
            want += std::uint64_t{kernel_input(0, i * n + x)} * kernel_input(1, x * n + j);
          }
          want &= 0xFFFF'FFFFu;
          if (const auto got = read(2, i * n + j, 4); got != want) mismatch(i * n + j, got, want);
        }
      }
      break;
    }
    case Kernel::Traverse: {
      const std::uint64_t chunk = elems / threads;
      for (std::uint64_t t = 0; t < threads; ++t) {
        std::uint64_t want = 0;
        for (std::uint64_t i = t * chunk; i < (t + 1) * chunk; ++i) want += kernel_input(0, i);
        if (const auto got = read(1, t, 8); got != want) mismatch(t, got, want);
      }
      break;
    }
  }
}

}  // namespace detail

// A finished kernel run: its cost figures plus the final memory image.
struct KernelExecution {
  ModeReport report;
  PartitionedMemory memory;
  std::map<unsigned, SharedArrayHandle> arrays;  // by pointer id, as in kernel_ir
};

// Runs the kernel without checking its outputs.
inline KernelExecution execute_kernel(const KernelConfig& config, LowerMode mode) {
  const TraversalIR ir = kernel_ir(config.kernel, config.threads, config.elems);
  config.topology.validate(config.threads);
  PartitionedMemory mem(config.threads, memory_for(ir));
  const auto arrays = allocate_arrays(ir, mem);
  const unsigned inputs = config.kernel == Kernel::Traverse ? 1 : 2;
  for (unsigned a = 0; a < inputs; ++a) {
    const auto& h = arrays.at(a);
    for (std::uint64_t i = 0; i < h.spec.numelems; ++i) {
      mem.write(element_address(h, i, mem), 4, kernel_input(a, i));
    }
  }
  const std::uint64_t table = install_base_table(mem);
  const LoweredProgram lowered = lower(ir, mode, options_for(arrays));

  std::vector<MachineState> machines;
  for (std::uint32_t t = 0; t < config.threads; ++t) {
    machines.push_back(load_thread(mem, t, table, config.topology));
  }
  run_round_robin(machines, lowered.program, config.fuel, config.trace);

  ModeReport report;
  report.mode = mode;
  report.lowering = lowered.report;
  for (const auto& m : machines) {
    for (unsigned c = 0; c < kNumClasses; ++c) report.counts[c] += m.counters[c];
    for (unsigned r = 0; r < kNumRegions; ++r) {
      for (unsigned c = 0; c < kNumClasses; ++c) report.region_counts[r][c] += m.region_counters[r][c];
    }
    report.per_thread.push_back({m.steps(), config.cost.cycles(m.counters)});
  }
  report.cycles = config.cost.cycles(report.counts);
  return {std::move(report), std::move(mem), arrays};
}

// Runs the kernel and verifies its outputs; throws CorrectnessFailure on any
// mismatch, so no report exists for a wrong result.
inline ModeReport run_kernel_mode(const KernelConfig& config, LowerMode mode) {
  KernelExecution run = execute_kernel(config, mode);
  detail::check_outputs(config.kernel, config.threads, config.elems, run.arrays, run.memory);
  return std::move(run.report);
}

inline CostReport run_kernel(const KernelConfig& config, ModeSelection modes = ModeSelection::Both) {
  CostReport report;
  report.kernel = kernel_name(config.kernel);
  report.threads = config.threads;
  report.size = config.elems;
  report.cost = config.cost;
  if (modes != ModeSelection::Hw) report.sw = run_kernel_mode(config, LowerMode::Sw);
  if (modes != ModeSelection::Sw) report.hw = run_kernel_mode(config, LowerMode::Hw);
  return report;
}

inline constexpr const char* kCsvHeader = "kernel,mode,threads,size,class,count,cycles,speedup";

// One row per instruction class and a "total" row for each mode present;
// software rows first.
inline void write_csv(std::ostream& os, const std::vector<CostReport>& reports) {
  os << kCsvHeader << '\n';
  for (const CostReport& r : reports) {
    std::string speedup;
    if (const auto s = r.speedup()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", *s);
      speedup = buf;
    }
    for (const auto* m : {&r.sw, &r.hw}) {
      if (!*m) continue;
      const ModeReport& mr = **m;
      const std::string prefix = r.kernel + ',' + mode_name(mr.mode) + ',' +
                                 std::to_string(r.threads) + ',' + std::to_string(r.size) + ',';
      for (unsigned c = 0; c < kNumClasses; ++c) {
        const auto cls = static_cast<InstrClass>(c);
        os << prefix << class_name(cls) << ',' << mr.counts[c] << ',' << mr.counts[c] * r.cost.cost(cls)
           << ',' << speedup << '\n';
      }
      os << prefix << "total," << mr.instructions() << ',' << mr.cycles << ',' << speedup << '\n';
    }
  }
}

inline void emit_csv(const CostReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(out, {report});
  if (!out) throw IoError("failed writing " + path);
}

inline void emit_csv(const std::vector<CostReport>& reports, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(out, reports);
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace pgas
