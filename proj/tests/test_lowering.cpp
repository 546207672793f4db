#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pgas/pgas.hpp"

using namespace pgas;

namespace {

TraversalIR single_pointer(IrArray array, std::vector<IrOp> ops, std::uint64_t threads = 4) {
  TraversalIR ir;
  ir.threads = threads;
  ir.arrays[0] = array;
  ir.ops = std::move(ops);
  return ir;
}

std::vector<Instruction> region_code(const LoweredProgram& lowered, Region r) {
  std::vector<Instruction> out;
  for (std::size_t i = 0; i < lowered.program.size(); ++i) {
    if (lowered.program.regions[i] == r) out.push_back(lowered.program.code[i]);
  }
  return out;
}

std::size_t count_class(const std::vector<Instruction>& code, InstrClass c) {
  std::size_t n = 0;
  for (const auto& i : code) n += class_of(i) == c;
  return n;
}

}  // namespace

TEST(LowerHw, AmountWithTwoBitsBecomesTwoImmediates) {
  const auto lowered = lower(single_pointer({4, 4, 64}, {IncPtr{0, 3}}), LowerMode::Hw);
  const auto code = region_code(lowered, Region::PointerInc);
  ASSERT_EQ(code.size(), 2u);
  EXPECT_EQ(std::get<PgasIncImm>(code[0]).increm_log2, 0);  // 1
  EXPECT_EQ(std::get<PgasIncImm>(code[1]).increm_log2, 1);  // 2
  EXPECT_EQ(lowered.report.hw_lowered, 1u);
}

TEST(LowerHw, PowerOfTwoAmountIsOneImmediate) {
  const auto lowered = lower(single_pointer({4, 8, 64}, {IncPtr{0, 16}}), LowerMode::Hw);
  const auto code = region_code(lowered, Region::PointerInc);
  ASSERT_EQ(code.size(), 1u);
  EXPECT_EQ(std::get<PgasIncImm>(code[0]), (PgasIncImm{4, 4, 3, 2, 4}));
}

TEST(LowerHw, OtherAmountsUseTheRegisterForm) {
  for (std::int64_t amount : {7, -1, -4, 100000}) {
    const auto lowered = lower(single_pointer({4, 4, 64}, {IncPtr{0, amount}}), LowerMode::Hw);
    const auto code = region_code(lowered, Region::PointerInc);
    EXPECT_EQ(count_class(code, InstrClass::PgasIncReg), 1u) << amount;
    EXPECT_EQ(count_class(code, InstrClass::PgasIncImm), 0u) << amount;
  }
}

TEST(LowerHw, ZeroAmountEmitsNothing) {
  const auto lowered = lower(single_pointer({4, 4, 64}, {IncPtr{0, 0}}), LowerMode::Hw);
  EXPECT_TRUE(region_code(lowered, Region::PointerInc).empty());
  EXPECT_EQ(lowered.report.total(), 0u);
}

TEST(LowerHw, OddElementSizeFallsBackToSoftware) {
  TraversalIR ir;
  ir.threads = 4;
  ir.arrays[0] = {4, 4, 64};
  ir.arrays[1] = {1, 56016, 8};
  ir.ops = {IncPtr{0, 1}, IncPtr{1, 1}, Loop{3, {IncPtr{1, 2}, IncPtr{0, 2}}}};
  const auto lowered = lower(ir, LowerMode::Hw);
  EXPECT_EQ(lowered.report.hw_lowered, 2u);
  EXPECT_EQ(lowered.report.sw_fallback, 2u);
  ASSERT_EQ(lowered.report.reasons.size(), 2u);
  for (const auto& f : lowered.report.reasons) {
    EXPECT_EQ(f.ptr, 1u);
    EXPECT_EQ(f.reason, "non-power-of-2 element size");
  }
  EXPECT_GT(count_class(region_code(lowered, Region::PointerInc), InstrClass::Div), 0u);
}

TEST(LowerHw, PowerOfTwoProgramsContainNoDivision) {
  oracle::IrGenerator gen(41);
  int checked = 0;
  while (checked < 50) {
    const TraversalIR ir = gen.next();
    bool pow2 = is_pow2(ir.threads);
    for (const auto& [id, a] : ir.arrays) pow2 = pow2 && hw_eligible(ir.spec_of(id));
    if (!pow2) continue;
    const auto lowered = lower(ir, LowerMode::Hw);
    EXPECT_EQ(count_class(lowered.program.code, InstrClass::Div), 0u);
    EXPECT_EQ(lowered.report.sw_fallback, 0u);
    ++checked;
  }
}

TEST(LowerSw, EveryIncrementIsCountedAsFallback) {
  const auto lowered = lower(single_pointer({4, 4, 64}, {IncPtr{0, 1}, Seek{0, Operand::imm(3)}}),
                             LowerMode::Sw);
  EXPECT_EQ(lowered.report.sw_fallback, 2u);
  EXPECT_EQ(lowered.report.hw_lowered, 0u);
  EXPECT_EQ(lowered.report.reasons[0].reason, "software mode");
  EXPECT_EQ(count_class(lowered.program.code, InstrClass::PgasIncImm), 0u);
  EXPECT_EQ(count_class(lowered.program.code, InstrClass::PgasLoad), 0u);
}

TEST(LowerSw, AccessesTranslateExplicitly) {
  const auto hw = lower(single_pointer({4, 4, 64}, {IrLoad{0, 0, 0, {}}}), LowerMode::Hw);
  const auto sw = lower(single_pointer({4, 4, 64}, {IrLoad{0, 0, 0, {}}}), LowerMode::Sw);
  EXPECT_EQ(hw.report.hw_accesses, 1u);
  EXPECT_EQ(sw.report.sw_accesses, 1u);
  EXPECT_EQ(region_code(hw, Region::Access).size(), 1u);
  EXPECT_EQ(count_class(region_code(sw, Region::Access), InstrClass::Load), 2u);
}

TEST(SoftwareIncrement, SequenceLengthDoesNotDependOnLayout) {
  const std::size_t len = lower_software_increment(ArraySpec{1, 1, 1, 1}).size();
  std::mt19937_64 rng(4);
  for (int n = 0; n < 200; ++n) {
    const ArraySpec spec{1 + rng() % 65536, 1 + rng() % 100000, 1, 1 + rng() % 64};
    const auto seq = lower_software_increment(spec);
    EXPECT_EQ(seq.size(), len);
    EXPECT_GE(count_class(seq, InstrClass::Div), 2u);
  }
}

TEST(SoftwareIncrement, ExecutesLikeTheHardwareInstruction) {
  std::mt19937_64 rng(6);
  PartitionedMemory mem(1);
  for (int n = 0; n < 3000; ++n) {
    const ArraySpec spec{1ull << (rng() % 5), 1ull << (rng() % 4), 1, 1ull << (rng() % 4)};
    const SharedPointer p{static_cast<std::uint32_t>(rng() % spec.numthreads),
                          static_cast<std::uint32_t>(rng() % spec.blocksize),
                          (100 + rng() % 1000) * spec.elemsize * spec.blocksize};
    const auto amount = static_cast<std::int64_t>(rng() % 64) - 16;

    MachineState sw(mem);
    sw.set_reg(pgas::abi::kThreads, spec.numthreads);
    sw.set_reg(pgas::abi::pointer(0), pack(p).word);
    sw.set_reg(pgas::abi::kAmount, static_cast<std::uint64_t>(amount));
    for (const auto& i : lower_software_increment(spec)) step(sw, i);

    MachineState hw(mem);
    hw.set_reg(pgas::abi::kThreads, spec.numthreads);
    hw.set_reg(pgas::abi::pointer(0), pack(p).word);
    hw.set_reg(pgas::abi::kAmount, static_cast<std::uint64_t>(amount));
    const Pow2Layout layout = Pow2Layout::of(spec);
    step(hw, SetThreads{pgas::abi::kThreads});
    step(hw, PgasIncReg{pgas::abi::pointer(0), pgas::abi::kAmount, pgas::abi::pointer(0),
                        static_cast<std::uint8_t>(layout.elemsize_log2),
                        static_cast<std::uint8_t>(layout.blocksize_log2)});
    ASSERT_EQ(sw.reg(pgas::abi::pointer(0)), hw.reg(pgas::abi::pointer(0)));
  }
}

TEST(SoftwareIncrement, HandlesLayoutsTheHardwareCannot) {
  const ArraySpec spec{3, 56016, 100, 5};
  PartitionedMemory mem(1);
  const auto layout = oracle::dealt_layout(spec);
  for (std::uint64_t i = 0; i < 60; i += 7) {
    MachineState s(mem);
    s.set_reg(pgas::abi::kThreads, 5);
    s.set_reg(pgas::abi::pointer(0), pack(layout[i]).word);
    s.set_reg(pgas::abi::kAmount, 33);
    for (const auto& ins : lower_software_increment(spec)) step(s, ins);
    EXPECT_EQ(unpack(PackedSharedPointer{s.reg(pgas::abi::pointer(0))}), layout[i + 33]);
  }
}

TEST(Lowering, ReportConservation) {
  oracle::IrGenerator gen(43);
  for (int n = 0; n < 200; ++n) {
    const TraversalIR ir = gen.next();
    for (LowerMode m : {LowerMode::Hw, LowerMode::Sw}) {
      const auto r = lower(ir, m).report;
      EXPECT_EQ(r.hw_lowered + r.sw_fallback, r.total());
      EXPECT_EQ(r.reasons.size(), r.sw_fallback);
    }
  }
}

TEST(Lowering, BothModesMatchTheReferenceModel) {
  oracle::IrGenerator gen(44);
  int checked = 0;
  for (int attempt = 0; attempt < 2000 && checked < 60; ++attempt) {
    const TraversalIR ir = gen.next();
    oracle::IrModel model(ir);
    model.fill(oracle::fill_byte);
    model.run_all();
    if (!model.valid) continue;
    for (LowerMode m : {LowerMode::Hw, LowerMode::Sw}) {
      const auto run = oracle::run_lowered(ir, m, oracle::fill_byte);
      for (const auto& [id, bytes] : model.arrays) {
        ASSERT_EQ(oracle::logical_bytes(run, id), bytes) << mode_name(m) << " array p" << id;
      }
    }
    ++checked;
  }
  EXPECT_EQ(checked, 60);
}

TEST(Lowering, ValidationRejectsBadPrograms) {
  EXPECT_THROW(lower(single_pointer({4, 4, 64}, {IncPtr{1, 1}}), LowerMode::Hw), ValidationError);
  EXPECT_THROW(lower(single_pointer({4, 4, 64}, {IrLoad{8, 0, 0, {}}}), LowerMode::Hw), ValidationError);
  EXPECT_THROW(lower(single_pointer({4, 4, 64}, {IrLoad{0, 0, 4096, {}}}), LowerMode::Hw), ValidationError);
  EXPECT_THROW(lower(single_pointer({4, 12, 64}, {IrLoad{0, 0, 0, {}}}), LowerMode::Hw), ValidationError);
  Loop deep{1, {}};
  for (int d = 0; d < 4; ++d) deep = Loop{1, {deep}};
  EXPECT_THROW(lower(single_pointer({4, 4, 64}, {deep}), LowerMode::Hw), ValidationError);
}

TEST(Lowering, PrologueSetsThreadsAndBaseTableInHardwareMode) {
  const auto lowered = lower(single_pointer({4, 4, 64}, {}), LowerMode::Hw);
  const auto prologue = region_code(lowered, Region::Prologue);
  ASSERT_FALSE(prologue.empty());
  EXPECT_TRUE(std::holds_alternative<SetThreads>(prologue[0]));
  EXPECT_EQ(count_class(prologue, InstrClass::PgasSetup), 2u);
}

TEST(IrText, ParsesAndRoundtrips) {
  const std::string text =
      "threads 4\n"
      "array p0 4 4 64\n"
      "array p1 1 8 4   # one quad per thread\n"
      "mul v0 tid 16\n"
      "seek p0 v0\n"
      "seek p1 tid\n"
      "loop 16\n"
      "  load v1 p0\n"
      "  add v2 v2 v1\n"
      "  inc p0 1\n"
      "end\n"
      "store v2 p1 0 q\n";
  const TraversalIR ir = parse_ir(text);
  EXPECT_EQ(ir.threads, 4u);
  EXPECT_EQ(ir.arrays.at(1).elemsize, 8u);
  ASSERT_EQ(ir.ops.size(), 5u);
  EXPECT_EQ(std::get<Loop>(ir.ops[3]).body.size(), 3u);
  std::ostringstream os;
  write_ir(os, ir);
  std::ostringstream again;
  write_ir(again, parse_ir(os.str()));
  EXPECT_EQ(os.str(), again.str());
}

TEST(IrText, ReportsErrorsWithLineNumbers) {
  for (const char* text : {"threads 2\nloop 3\n", "end\n", "threads 2\nfrob p0\n",
                           "inc p0 1\narray p0 1 1 1\n", "load v1\n", "store v1 p0 0 z\n"}) {
    EXPECT_THROW(parse_ir(std::string(text)), ParseError) << text;
  }
}
