#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pgas/pgas.hpp"

using namespace pgas;

namespace {

std::vector<Instruction> assemble(const std::string& text) {
  std::istringstream in(text);
  return parse_program(in);
}

}  // namespace

TEST(Step, IncrementThroughExecutorMatchesEngine) {
  PartitionedMemory mem(4);
  MachineState s(mem);
  s.set_reg(2, 4);
  s.set_reg(4, pack(SharedPointer{3, 3, 12}).word);
  step(s, SetThreads{2});
  step(s, PgasIncImm{4, 5, encode_pow2(4), encode_pow2(4), encode_pow2(1)});
  EXPECT_EQ(unpack(PackedSharedPointer{s.reg(5)}), (SharedPointer{0, 0, 16}));
  EXPECT_EQ(s.pc, 2);
}

TEST(Step, PgasLoadUsesTranslatedAddress) {
  // thread 1's segment starts at the worked-example base
  PartitionedMemory mem(2, MemoryConfig{0xff0b00000000ull - (1ull << 20), 1ull << 20});
  ASSERT_EQ(mem.segment_base(1), 0xff0b00000000ull);
  mem.write(0xff0b00003f00ull, 4, 0xcafef00d);
  mem.write(0xff0b00003f08ull, 4, 0x12345678);
  MachineState s(mem);
  s.set_reg(6, 1);
  s.set_reg(7, 0xff0b00000000ull);
  step(s, SetBaseAddress{6, 7});
  s.set_reg(4, pack(SharedPointer{1, 0, 0x3f00}).word);
  step(s, PgasLoad{MemKind::L, 12, 4, 0});
  EXPECT_EQ(s.reg(12), 0xcafef00du);
  step(s, PgasLoad{MemKind::L, 13, 4, 8});
  EXPECT_EQ(s.reg(13), 0x12345678u);
}

TEST(Step, StoreThenLoadReturnsValueForEveryKind) {
  PartitionedMemory mem(2);
  MachineState s(mem);
  s.base_table = mem.base_table();
  s.set_reg(4, pack(SharedPointer{1, 0, 0x80}).word);
  const std::uint64_t pattern = 0xF1E2D3C4B5A69788ull;
  for (MemKind k : {MemKind::B, MemKind::W, MemKind::L, MemKind::Q, MemKind::S, MemKind::T}) {
    const unsigned w = width_of(k);
    const std::uint64_t expect = w == 8 ? pattern : pattern & ((1ull << (8 * w)) - 1);
    if (is_float(k)) {
      s.float_regs[3] = expect;
      step(s, PgasStore{k, 3, 4, 16});
      step(s, PgasLoad{k, 9, 4, 16});
      EXPECT_EQ(s.float_regs[9], expect) << mnemonic(PgasLoad{k});
    } else {
      s.set_reg(12, pattern);
      step(s, PgasStore{k, 12, 4, 16});
      step(s, PgasLoad{k, 13, 4, 16});
      EXPECT_EQ(s.reg(13), expect) << mnemonic(PgasLoad{k});
    }
  }
}

TEST(Step, ExecutorAgreesWithEngineOnRandomIncrements) {
  std::mt19937_64 rng(9);
  PartitionedMemory mem(1);
  for (int n = 0; n < 5000; ++n) {
    const unsigned bl = rng() % 5, el = rng() % 4, tl = rng() % 4;
    const ArraySpec spec{1ull << bl, 1ull << el, 1, 1ull << tl};
    const SharedPointer p{static_cast<std::uint32_t>(rng() % spec.numthreads),
                          static_cast<std::uint32_t>(rng() % spec.blocksize),
                          (rng() % 4096) * spec.elemsize * spec.blocksize};
    MachineState s(mem);
    s.set_reg(2, spec.numthreads);
    s.set_reg(4, pack(p).word);
    step(s, SetThreads{2});
    const auto inc_log2 = static_cast<std::uint8_t>(rng() % 10);
    step(s, PgasIncImm{4, 5, static_cast<std::uint8_t>(el), static_cast<std::uint8_t>(bl), inc_log2});
    ASSERT_EQ(s.reg(5), pack(increment_hw(p, std::int64_t{1} << inc_log2, spec)).word);
    const auto amount = static_cast<std::int64_t>(rng() % 200) - 100;
    s.set_reg(30, static_cast<std::uint64_t>(amount));
    const SharedPointer from = unpack(PackedSharedPointer{s.reg(5)});
    if (static_cast<std::int64_t>(from.va) + amount * static_cast<std::int64_t>(spec.elemsize) < 0) continue;
    step(s, PgasIncReg{5, 30, 6, static_cast<std::uint8_t>(el), static_cast<std::uint8_t>(bl)});
    ASSERT_EQ(s.reg(6), pack(increment_hw(from, amount, spec)).word);
  }
}

TEST(Step, IncrementBeforeSetThreadsIsAnError) {
  PartitionedMemory mem(1);
  MachineState s(mem);
  EXPECT_THROW(step(s, PgasIncImm{4, 4, 0, 0, 0}), UninitializedError);
}

TEST(Step, ZeroRegisterDiscardsWrites) {
  PartitionedMemory mem(1);
  MachineState s(mem);
  step(s, LoadImm{kZeroReg, 5});
  EXPECT_EQ(s.reg(kZeroReg), 0u);
}

TEST(Step, StraightLineCodeAdvancesPcOneByOne) {
  PartitionedMemory mem(1);
  MachineState s(mem);
  for (int k = 0; k < 7; ++k) step(s, AluImm{AluOp::Add, 1, 1, 1});
  EXPECT_EQ(s.pc, 7);
  EXPECT_EQ(s.reg(1), 7u);
}

TEST(Step, DivisionUsesFloorSemanticsAndRejectsZero) {
  PartitionedMemory mem(1);
  MachineState s(mem);
  s.set_reg(1, static_cast<std::uint64_t>(-7));
  step(s, AluImm{AluOp::Div, 1, 2, 2});
  step(s, AluImm{AluOp::Mod, 1, 2, 3});
  EXPECT_EQ(static_cast<std::int64_t>(s.reg(2)), -4);
  EXPECT_EQ(s.reg(3), 1u);
  EXPECT_THROW(step(s, AluReg{AluOp::Div, 1, kZeroReg, 2}), ArithmeticError);
}

TEST(Run, CountersAddUpToSteps) {
  PartitionedMemory mem(2);
  MachineState s(mem);
  s.base_table = mem.base_table();
  s.set_reg(2, 2);
  const auto program = assemble(
      "set_threads r2\n"
      "ldi r20 5\n"
      "pgas_ldq r12 r4 0\n"
      "pgas_inc_imm r4 r4 8 2 1\n"
      "mul r12 r12 r13\n"
      "subi r20 1 r20\n"
      "bne r20 -4\n"
      "halt\n");
  const std::uint64_t steps = run(s, program, 1000);
  std::uint64_t sum = 0;
  for (auto c : s.counters) sum += c;
  EXPECT_EQ(sum, steps);
  EXPECT_EQ(steps, 2 + 5 * 5 + 1);
  EXPECT_EQ(s.count(InstrClass::PgasIncImm), 5u);
  EXPECT_EQ(s.count(InstrClass::Mul), 5u);
}

TEST(Run, ExhaustedFuelTimesOut) {
  PartitionedMemory mem(1);
  MachineState s(mem);
  EXPECT_THROW(run(s, std::vector<Instruction>{Branch{BranchCond::Always, 0, 0}}, 100), TimeoutError);
  EXPECT_EQ(s.steps(), 100u);
}

TEST(Run, HandWrittenVectorAddOverSixteenElements) {
  const ArraySpec spec{4, 4, 16, 2};
  PartitionedMemory mem(2);
  const auto a = mem.alloc_shared(spec), b = mem.alloc_shared(spec), c = mem.alloc_shared(spec);
  const auto addr_a = oracle::element_addresses(a, mem), addr_b = oracle::element_addresses(b, mem),
             addr_c = oracle::element_addresses(c, mem);
  for (std::uint64_t i = 0; i < 16; ++i) {
    mem.write(addr_a[i], 4, 3 * i + 1);
    mem.write(addr_b[i], 4, 100 - i);
  }
  MachineState s(mem);
  s.base_table = mem.base_table();
  s.set_reg(2, 2);
  s.set_reg(4, pack(a.origin).word);
  s.set_reg(5, pack(b.origin).word);
  s.set_reg(6, pack(c.origin).word);
  const auto program = assemble(
      "set_threads r2\n"
      "ldi r20 16\n"
      "pgas_ldl r12 r4 0\n"
      "pgas_ldl r13 r5 0\n"
      "add r12 r13 r14\n"
      "pgas_stl r14 r6 0\n"
      "pgas_inc_imm r4 r4 4 4 1\n"
      "pgas_inc_imm r5 r5 4 4 1\n"
      "pgas_inc_imm r6 r6 4 4 1\n"
      "subi r20 1 r20\n"
      "bne r20 -8\n"
      "halt\n");
  run(s, program, 10000);
  for (std::uint64_t i = 0; i < 16; ++i) EXPECT_EQ(mem.read(addr_c[i], 4), (3 * i + 1) + (100 - i));
}

TEST(Run, BranchOnLocalitySkipsRemotePathForOwnData) {
  // the increment moves the pointer onto thread 1; r10 records the path taken
  const auto program = assemble(
      "set_threads r2\n"
      "pgas_inc_imm r4 r4 4 4 1\n"
      "bloc 1 3\n"
      "ldi r10 1\n"
      "br 2\n"
      "ldi r10 2\n"
      "halt\n");
  for (std::uint32_t self : {0u, 1u}) {
    PartitionedMemory mem(2);
    Topology topo;
    topo.self_thread = self;
    MachineState s(mem, topo);
    s.set_reg(2, 2);
    s.set_reg(4, pack(SharedPointer{0, 3, 12}).word);
    run(s, program, 100);
    EXPECT_EQ(s.cc, self == 1 ? LocalityCode::Local : LocalityCode::SameController);
    EXPECT_EQ(s.reg(10), self == 1 ? 2u : 1u);
    EXPECT_EQ(s.steps(), self == 1 ? 5u : 6u);
  }
}

TEST(Run, TraceListsEveryStep) {
  PartitionedMemory mem(1);
  MachineState s(mem);
  std::ostringstream trace;
  run(s, assemble("ldi r1 3\naddi r1 1 r1\nhalt\n"), 10, &trace);
  EXPECT_EQ(trace.str(), "0 ldi r1 3 cc=0 steps=1\n1 addi r1 1 r1 cc=0 steps=2\n2 halt cc=0 steps=3\n");
}
