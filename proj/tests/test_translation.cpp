#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pgas/pgas.hpp"

using namespace pgas;

TEST(TranslateLut, WorkedExampleAddress) {
  BaseAddressTable table;
  table.set(1, 0xff0b00000000ull);
  EXPECT_EQ(translate_lut(SharedPointer{1, 0, 0x3f00}, table), 0xff0b00003f00ull);
}

TEST(TranslateLut, ZeroBaseAndOffset) {
  BaseAddressTable table;
  table.set(0, 0);
  EXPECT_EQ(translate_lut(SharedPointer{0, 3, 0}, table), 0u);
}

TEST(TranslateLut, AddsOffsetToBase) {
  BaseAddressTable table;
  table.set(2, 0x1000);
  EXPECT_EQ(translate_lut(SharedPointer{2, 0, 0x20}, table), 0x1020u);
}

TEST(TranslateLut, MissingEntryIsAConfigError) {
  BaseAddressTable table;
  table.set(0, 0x1000);
  EXPECT_THROW(translate_lut(SharedPointer{1, 0, 0}, table), ConfigError);
}

TEST(TranslateInterval, DirectArithmetic) {
  EXPECT_EQ(translate_interval(SharedPointer{0, 0, 0}, IntervalScheme{0, 0x10000}), 0u);
  EXPECT_EQ(translate_interval(SharedPointer{2, 0, 0x20}, IntervalScheme{0x1000, 0x10000}), 0x21020u);
}

TEST(Translation, SchemesAgreeOnRandomPointers) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 2000; ++n) {
    const std::uint64_t threads = 1 + rng() % 64;
    const IntervalScheme scheme{(rng() % 4096) << 20, std::uint64_t{1} << (16 + rng() % 8)};
    const BaseAddressTable table = scheme.to_table(threads);
    const SharedPointer p{static_cast<std::uint32_t>(rng() % threads),
                          static_cast<std::uint32_t>(rng() % 16), rng() % 0x10000};
    ASSERT_EQ(translate_lut(p, table), translate_interval(p, scheme));
  }
}

TEST(Translation, CanonicalPointersLandInOwnSegment) {
  PartitionedMemory mem(4, MemoryConfig{0x4000'0000, 4096});
  const auto h = mem.alloc_shared(ArraySpec{3, 8, 100, 4});
  const BaseAddressTable table = mem.base_table();
  for (std::uint64_t i = 0; i < 100; ++i) {
    const SharedPointer p = h.pointer_to(i);
    const std::uint64_t addr = translate_lut(p, table);
    EXPECT_GE(addr, mem.segment_base(p.thread));
    EXPECT_LT(addr + 8, mem.segment_base(p.thread) + mem.segment_size() + 1);
  }
}

TEST(BaseAddressTable, ValidateDetectsGapsAndOverlaps) {
  BaseAddressTable table;
  table.set(0, 0x0);
  table.set(1, 0x800);
  EXPECT_NO_THROW(table.validate(2, 0x800));
  EXPECT_THROW(table.validate(2, 0x1000), ConfigError);
  EXPECT_THROW(table.validate(3, 0x800), ConfigError);
  table.set(1, 0x0);
  EXPECT_THROW(table.validate(2, 0x10), ConfigError);
}
