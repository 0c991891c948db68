#include <doctest.h>

#include <random>

#include "oracles/lru_reference.hpp"
#include "upfcache/cache_model.hpp"
#include "upfcache/errors.hpp"

using namespace upfcache;

namespace {

LlcCache tiny(std::uint64_t sets, std::uint32_t ways, PartitionMode mode, std::uint32_t ddio,
              std::uint32_t core) {
  return LlcCache(CacheGeometry::from_sets(sets, ways, 64), PartitionPolicy{mode, ddio, core});
}

ref::LruReference reference_for(std::uint64_t sets, std::uint32_t ways, PartitionMode mode,
                                std::uint32_t ddio, std::uint32_t core) {
  std::vector<bool> d(ways, false), c(ways, false);
  for (std::uint32_t w = 0; w < ddio; ++w) d[w] = true;
  for (std::uint32_t w = 0; w < ways; ++w)
    c[w] = mode == PartitionMode::Shared || w >= ways - core;
  return ref::LruReference(sets, ways, 64, d, c);
}

}  // namespace

TEST_CASE("default geometry") {
  CacheGeometry g;
  CHECK(g.sets() == 49152);
  CHECK(g.lines() == 49152 * 11);
  PartitionPolicy p;
  CHECK(p.ddio_ways == 2);
}

TEST_CASE("geometry and partition validation name the field") {
  CacheGeometry g;
  g.line_bytes = 48;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = CacheGeometry{};
  g.total_bytes += 64;
  try {
    g.validate();
    FAIL("accepted a total size that is not a multiple of a cache row");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "geometry.total_bytes");
  }
  PartitionPolicy p{PartitionMode::Isolated, 4, 8};
  CHECK_THROWS_AS(p.validate(CacheGeometry{}), ConfigError);
  p = {PartitionMode::Isolated, 0, 8};
  CHECK_THROWS_AS(p.validate(CacheGeometry{}), ConfigError);
}

TEST_CASE("cold DDIO write is a miss with one line of fill traffic") {
  LlcCache c{CacheGeometry{}, PartitionPolicy{}};
  auto o = c.access(12345, AccessKind::DdioWrite, true);
  CHECK_FALSE(o.hit);
  CHECK_FALSE(o.evicted_line);
  CHECK(o.dram_bytes_moved == 64);
  auto s = c.snapshot_stats();
  CHECK(s[AccessKind::DdioWrite].accesses == 1);
  CHECK(s[AccessKind::DdioWrite].misses == 1);
  CHECK(s.dram_bytes_total == 64);
}

TEST_CASE("DDIO writes stay inside their single way") {
  auto c = tiny(1, 2, PartitionMode::Isolated, 1, 1);
  c.access(0, AccessKind::DdioWrite, true);
  auto o = c.access(1, AccessKind::DdioWrite, true);
  REQUIRE(o.evicted_line);
  CHECK(*o.evicted_line == 0);
  CHECK(o.dram_bytes_moved == 128);  // fill plus dirty writeback
  CHECK(*o.way == 0);
}

TEST_CASE("hits promote to most recently used") {
  auto c = tiny(1, 2, PartitionMode::Shared, 2, 0);
  c.access(0, AccessKind::CoreRead, false);
  c.access(1, AccessKind::CoreRead, false);
  CHECK(c.access(0, AccessKind::CoreRead, false).hit);
  auto o = c.access(2, AccessKind::CoreRead, false);
  REQUIRE(o.evicted_line);
  CHECK(*o.evicted_line == 1);
  CHECK(o.dram_bytes_moved == 64);  // clean victim
}

TEST_CASE("DdioRead never allocates") {
  auto c = tiny(4, 2, PartitionMode::Isolated, 1, 1);
  auto o = c.access(3, AccessKind::DdioRead, false);
  CHECK_FALSE(o.hit);
  CHECK(o.dram_bytes_moved == 64);
  CHECK_FALSE(c.resident(3));
  c.access(3, AccessKind::DdioWrite, true);
  CHECK(c.access(3, AccessKind::DdioRead, false).hit);
}

TEST_CASE("out-of-range line is rejected") {
  LlcCache c(CacheGeometry::from_sets(4, 2, 64), PartitionPolicy{PartitionMode::Shared, 1, 0}, 100);
  CHECK_THROWS_AS(c.access(100, AccessKind::CoreRead, false), std::out_of_range);
  CHECK(c.stats()[AccessKind::CoreRead].accesses == 0);
  CHECK_NOTHROW(c.access(99, AccessKind::CoreRead, false));
}

TEST_CASE("resize widens, keeps identity, and repartitions lazily") {
  SUBCASE("grow to three ways") {
    auto c = tiny(1, 8, PartitionMode::Isolated, 2, 6);
    c.resize_ddio_ways(3);
    for (LineId l = 0; l < 3; ++l) c.access(l, AccessKind::DdioWrite, true);
    for (LineId l = 0; l < 3; ++l) CHECK(c.resident(l));
    CHECK(c.ddio_mask() == 0b111);
  }
  SUBCASE("same size is a no-op") {
    auto a = tiny(2, 4, PartitionMode::Isolated, 2, 2);
    auto b = tiny(2, 4, PartitionMode::Isolated, 2, 2);
    b.resize_ddio_ways(2);
    std::mt19937_64 g(3);
    for (int i = 0; i < 200; ++i) {
      const LineId l = g() % 16;
      const auto k = AccessKind(g() % 4);
      auto x = a.access(l, k, true);
      auto y = b.access(l, k, true);
      CHECK(x.hit == y.hit);
      CHECK(x.evicted_line == y.evicted_line);
    }
  }
  SUBCASE("shrink keeps residency") {
    auto c = tiny(1, 8, PartitionMode::Isolated, 5, 3);
    for (LineId l = 0; l < 5; ++l) c.access(l, AccessKind::DdioWrite, true);
    REQUIRE(c.way_of(4) == 4u);
    c.resize_ddio_ways(2);
    CHECK(c.access(4, AccessKind::CoreRead, false).hit);
  }
  SUBCASE("out of range is rejected with the partition unchanged") {
    auto c = tiny(1, 11, PartitionMode::Isolated, 2, 9);
    CHECK(c.max_ddio_ways() == 10);
    CHECK_THROWS_AS(c.resize_ddio_ways(0), std::out_of_range);
    CHECK_THROWS_AS(c.resize_ddio_ways(11), std::out_of_range);
    CHECK(c.partition().ddio_ways == 2);
    CHECK(c.partition().core_ways == 9);
  }
}

TEST_CASE("snapshot, reset, snapshot") {
  auto c = tiny(4, 2, PartitionMode::Shared, 1, 0);
  c.access(7, AccessKind::CoreWrite, true);
  auto s1 = c.snapshot_stats();
  CHECK(s1[AccessKind::CoreWrite].misses == 1);
  c.reset_stats();
  auto s2 = c.snapshot_stats();
  CHECK(s2[AccessKind::CoreWrite].accesses == 0);
  CHECK(s2.dram_bytes_total == 0);
  CHECK(s2.evictions == 0);
  CHECK(c.access(7, AccessKind::CoreRead, false).hit);
}

TEST_CASE("matches the brute-force reference on random traces") {
  std::mt19937_64 g(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::uint64_t sets = 1 + g() % 8;
    const std::uint32_t ways = 1 + std::uint32_t(g() % 4);
    const auto mode = ways > 1 && g() % 2 ? PartitionMode::Isolated : PartitionMode::Shared;
    const std::uint32_t ddio = 1 + std::uint32_t(g() % (mode == PartitionMode::Isolated ? ways - 1 : ways));
    const std::uint32_t core =
        mode == PartitionMode::Isolated ? 1 + std::uint32_t(g() % (ways - ddio)) : 0;
    auto c = tiny(sets, ways, mode, ddio, core);
    auto r = reference_for(sets, ways, mode, ddio, core);
    const std::uint64_t universe = sets * ways * 3;
    std::uint64_t fills = 0, writebacks = 0;
    for (int i = 0; i < 1000; ++i) {
      const LineId l = g() % universe;
      const auto k = AccessKind(g() % 4);
      const bool dirty = g() % 2;
      auto a = c.access(l, k, dirty);
      auto b = r.access(l, k, dirty);
      REQUIRE(a.hit == b.hit);
      REQUIRE(a.evicted_line == b.evicted);
      REQUIRE(a.dram_bytes_moved == b.dram_bytes);
      REQUIRE(a.way == b.way);
      if (a.hit) REQUIRE_FALSE(a.evicted_line);
      if (!a.hit) ++fills;
      if (a.dram_bytes_moved == 128) ++writebacks;
      REQUIRE(c.resident_in_set(c.set_of(l)) <= ways);
      if (a.way && !a.hit && mode == PartitionMode::Isolated) {
        const bool in_ddio = c.ddio_mask() >> *a.way & 1;
        REQUIRE(in_ddio == (k == AccessKind::DdioWrite));
      }
    }
    const auto& s = c.stats();
    for (auto k : {AccessKind::DdioWrite, AccessKind::DdioRead, AccessKind::CoreRead, AccessKind::CoreWrite})
      REQUIRE(s[k].hits + s[k].misses == s[k].accesses);
    REQUIRE(s.fills == fills);
    REQUIRE(s.writebacks == writebacks);
    REQUIRE(s.dram_bytes_total == 64 * (s.fills + s.writebacks));
  }
}

TEST_CASE("shared mode lets core allocations evict DDIO lines, isolated mode does not") {
  auto run = [](PartitionMode mode) {
    auto c = tiny(4, 4, mode, 2, 2);
    for (int round = 0; round < 50; ++round) {
      for (LineId l = 0; l < 8; ++l) c.access(1000 + round * 8 + l, AccessKind::DdioWrite, true);
      for (LineId l = 0; l < 16; ++l) c.access(5000 + round * 16 + l, AccessKind::CoreRead, false);
    }
    return c.stats().core_evicted_ddio;
  };
  CHECK(run(PartitionMode::Shared) >= 1);
  CHECK(run(PartitionMode::Isolated) == 0);
}
