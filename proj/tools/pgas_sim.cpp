// pgas-sim: runs the benchmark kernels, lowers IR files and executes
// assembly programs on the simulated machine.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pgas/pgas.hpp"

namespace {

constexpr int kExitCorrectness = 2;
constexpr int kExitError = 1;

// Relative output paths land in $PGAS_OUTPUT_DIR when it is set.
std::string output_path(const std::string& path) {
  const char* dir = std::getenv("PGAS_OUTPUT_DIR");
  if (path.empty() || dir == nullptr || *dir == '\0') return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / p).string();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pgas::IoError("cannot open " + path + " for writing");
  return out;
}

void print_mode(const pgas::ModeReport& m) {
  using pgas::Region;
  std::printf("  %s: %llu instructions, %llu cycles, pointer_inc %llu, access %llu\n",
              pgas::mode_name(m.mode), static_cast<unsigned long long>(m.instructions()),
              static_cast<unsigned long long>(m.cycles),
              static_cast<unsigned long long>(m.region_instructions(Region::PointerInc)),
              static_cast<unsigned long long>(m.region_instructions(Region::Access)));
  std::printf("    lowering: %llu hw increments, %llu sw increments\n",
              static_cast<unsigned long long>(m.lowering.hw_lowered),
              static_cast<unsigned long long>(m.lowering.sw_fallback));
  for (std::size_t t = 0; t < m.per_thread.size(); ++t) {
    std::printf("    thread %zu: %llu instructions, %llu cycles\n", t,
                static_cast<unsigned long long>(m.per_thread[t].instructions),
                static_cast<unsigned long long>(m.per_thread[t].cycles));
  }
}

struct RunArgs {
  std::string kernel = "vecadd";
  std::uint64_t threads = 4;
  std::uint64_t elems = 1024;
  std::string mode = "both";
  std::string topology;
  std::string csv;
  std::string trace;
  std::uint64_t div_cost = 1;
};

int do_run(const RunArgs& a) {
  pgas::KernelConfig config;
  config.kernel = pgas::parse_kernel(a.kernel);
  config.threads = a.threads;
  config.elems = a.elems;
  config.cost.set(pgas::InstrClass::Div, a.div_cost);
  if (!a.topology.empty()) config.topology = pgas::load_topology(a.topology);

  std::optional<std::ofstream> trace;
  if (!a.trace.empty()) {
    trace = open_output(output_path(a.trace));
    config.trace = &*trace;
  }
  const pgas::CostReport report = pgas::run_kernel(config, pgas::parse_mode(a.mode));

  std::printf("%s threads=%llu elems=%llu div-cost=%llu\n", report.kernel.c_str(),
              static_cast<unsigned long long>(report.threads),
              static_cast<unsigned long long>(report.size),
              static_cast<unsigned long long>(a.div_cost));
  if (report.sw) print_mode(*report.sw);
  if (report.hw) print_mode(*report.hw);
  if (const auto s = report.speedup()) std::printf("  speedup: %.6f\n", *s);
  std::printf("  output: verified\n");
  if (!a.csv.empty()) pgas::emit_csv(report, output_path(a.csv));
  return 0;
}

int do_lower(const std::string& ir_path, const std::string& mode, const std::string& out_path) {
  std::ifstream in(ir_path);
  if (!in) throw pgas::IoError("cannot open " + ir_path);
  const pgas::TraversalIR ir = pgas::parse_ir(in);
  pgas::PartitionedMemory mem(ir.threads, pgas::memory_for(ir));
  const auto arrays = pgas::allocate_arrays(ir, mem);
  const pgas::LowerMode m = mode == "sw" ? pgas::LowerMode::Sw : pgas::LowerMode::Hw;
  const pgas::LoweredProgram lowered = pgas::lower(ir, m, pgas::options_for(arrays));

  std::unique_ptr<std::ofstream> file;
  std::ostream* os = &std::cout;
  if (!out_path.empty()) {
    file = std::make_unique<std::ofstream>(open_output(output_path(out_path)));
    os = file.get();
  }
  pgas::write_program(*os, lowered.program.code);
  std::fprintf(stderr, "%zu instructions, %llu hw increments, %llu sw increments\n",
               lowered.program.size(), static_cast<unsigned long long>(lowered.report.hw_lowered),
               static_cast<unsigned long long>(lowered.report.sw_fallback));
  for (const auto& f : lowered.report.reasons) {
    std::fprintf(stderr, "  p%u: %s\n", f.ptr, f.reason.c_str());
  }
  return 0;
}

// Executes an assembly program as thread 0 of `threads`, with the loader
// conventions of lowered programs, and prints the instruction counts.
int do_exec(const std::string& asm_path, std::uint64_t threads, std::uint64_t fuel,
            const std::string& trace_path) {
  std::ifstream in(asm_path);
  if (!in) throw pgas::IoError("cannot open " + asm_path);
  const pgas::Program program(pgas::parse_program(in));
  pgas::PartitionedMemory mem(threads);
  const std::uint64_t table = pgas::install_base_table(mem);
  pgas::MachineState s = pgas::load_thread(mem, 0, table);
  std::optional<std::ofstream> trace;
  if (!trace_path.empty()) trace = open_output(output_path(trace_path));
  pgas::run(s, program, fuel, trace ? &*trace : nullptr);
  for (unsigned c = 0; c < pgas::kNumClasses; ++c) {
    if (s.counters[c] == 0) continue;
    std::printf("%s %llu\n", pgas::class_name(static_cast<pgas::InstrClass>(c)),
                static_cast<unsigned long long>(s.counters[c]));
  }
  std::printf("total %llu\n", static_cast<unsigned long long>(s.steps()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for hardware-assisted PGAS shared-address handling"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a benchmark kernel and report instruction costs");
  run->add_option("--kernel", run_args.kernel, "vecadd, matmul or traverse")
      ->check(CLI::IsMember({"vecadd", "matmul", "traverse"}))
      ->capture_default_str();
  run->add_option("--threads", run_args.threads, "Simulated SPMD threads")
      ->check(CLI::Range(1, 65536))
      ->capture_default_str();
  run->add_option("--elems", run_args.elems, "Elements per array (matmul: per matrix)")
      ->capture_default_str();
  run->add_option("--mode", run_args.mode, "sw, hw or both")
      ->check(CLI::IsMember({"sw", "hw", "both"}))
      ->capture_default_str();
  run->add_option("--topology", run_args.topology, "Thread placement file")->check(CLI::ExistingFile);
  run->add_option("--csv", run_args.csv, "Write the cost report as CSV");
  run->add_option("--trace", run_args.trace, "Write a per-instruction trace");
  run->add_option("--div-cost", run_args.div_cost, "Cycles per division")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::string ir_path, lower_mode = "hw", lower_out;
  auto* lower = app.add_subcommand("lower", "Lower a traversal IR file to assembly");
  lower->add_option("--ir", ir_path, "IR file")->required()->check(CLI::ExistingFile);
  lower->add_option("--mode", lower_mode, "hw or sw")
      ->check(CLI::IsMember({"sw", "hw"}))
      ->capture_default_str();
  lower->add_option("-o,--output", lower_out, "Output file (default stdout)");

  std::string asm_path, exec_trace;
  std::uint64_t exec_threads = 1, exec_fuel = 100'000'000;
  auto* exec = app.add_subcommand("exec", "Execute an assembly program as thread 0");
  exec->add_option("program", asm_path, "Assembly file")->required()->check(CLI::ExistingFile);
  exec->add_option("--threads", exec_threads, "Thread count")
      ->check(CLI::Range(1, 65536))
      ->capture_default_str();
  exec->add_option("--fuel", exec_fuel, "Step limit")->capture_default_str();
  exec->add_option("--trace", exec_trace, "Write a per-instruction trace");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(run_args);
    if (*lower) return do_lower(ir_path, lower_mode, lower_out);
    if (*exec) return do_exec(asm_path, exec_threads, exec_fuel, exec_trace);
  } catch (const pgas::CorrectnessFailure& e) {
    std::fprintf(stderr, "correctness failure: %s\n", e.what());
    return kExitCorrectness;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return 0;
}
