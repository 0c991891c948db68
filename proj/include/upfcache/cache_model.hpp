#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace upfcache {

using LineId = std::uint64_t;

/// N-way set-associative cache shape. sets() is derived.
struct CacheGeometry {
  std::uint64_t total_bytes = 33ull * 1024 * 1024;
  std::uint32_t ways = 11;
  std::uint32_t line_bytes = 64;

  std::uint64_t sets() const { return total_bytes / (std::uint64_t{ways} * line_bytes); }
  std::uint64_t lines() const { return sets() * ways; }

  /// Throws ConfigError naming the offending field.
  void validate() const;

  static CacheGeometry from_sets(std::uint64_t sets, std::uint32_t ways,
                                 std::uint32_t line_bytes = 64);
};

enum class PartitionMode : std::uint8_t { Shared, Isolated };

/// Way split between DDIO and the cores. In Isolated mode the ways not
/// covered by either mask ("others") are never allocated into.
struct PartitionPolicy {
  PartitionMode mode = PartitionMode::Isolated;
  std::uint32_t ddio_ways = 2;
  std::uint32_t core_ways = 9;

  void validate(const CacheGeometry& geo) const;
};

enum class AccessKind : std::uint8_t { DdioWrite = 0, DdioRead = 1, CoreRead = 2, CoreWrite = 3 };
inline constexpr std::size_t kAccessKinds = 4;

std::string_view to_string(AccessKind k);
std::string_view to_string(PartitionMode m);

struct AccessOutcome {
  bool hit = false;
  std::optional<LineId> evicted_line;
  std::uint32_t dram_bytes_moved = 0;
  // Way the line ended up in; absent for a read-through miss.
  std::optional<std::uint32_t> way;
};

struct KindCounters {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

  double miss_rate() const { return accesses == 0 ? 0.0 : double(misses) / double(accesses); }
};

struct CacheStats {
  std::array<KindCounters, kAccessKinds> per_kind{};
  std::uint64_t evictions = 0;
  // Lines fetched from DRAM: allocating fills plus DdioRead read-throughs.
  std::uint64_t fills = 0;
  std::uint64_t writebacks = 0;
  // Core allocations that evicted a line last allocated by a DDIO write.
  std::uint64_t core_evicted_ddio = 0;
  std::uint64_t dram_bytes_total = 0;

  const KindCounters& operator[](AccessKind k) const { return per_kind[std::size_t(k)]; }
  KindCounters& operator[](AccessKind k) { return per_kind[std::size_t(k)]; }
};

/// Last-level cache with strict per-set LRU inside per-kind way masks.
///
/// Way layout: DDIO ways are [0, ddio_ways). In Isolated mode the core ways
/// are the top core_ways ways and the gap between the two is "others". A
/// resize moves the DDIO/others boundary; the others count is fixed and the
/// core mask absorbs the change. Resizing never flushes: lines sitting in
/// reassigned ways stay hittable until evicted.
class LlcCache {
 public:
  LlcCache(CacheGeometry geometry, PartitionPolicy partition,
           std::uint64_t address_space_lines = std::uint64_t{1} << 48);

  AccessOutcome access(LineId line, AccessKind kind, bool dirty);

  /// Throws std::out_of_range (partition unchanged) when outside
  /// [1, max_ddio_ways()].
  void resize_ddio_ways(std::uint32_t new_ddio_ways);
  std::uint32_t max_ddio_ways() const;

  const CacheStats& stats() const { return stats_; }
  CacheStats snapshot_stats() const { return stats_; }
  void reset_stats() { stats_ = CacheStats{}; }

  const CacheGeometry& geometry() const { return geo_; }
  const PartitionPolicy& partition() const { return part_; }
  std::uint64_t set_of(LineId line) const { return line % sets_; }

  bool resident(LineId line) const;
  std::optional<std::uint32_t> way_of(LineId line) const;
  std::uint32_t resident_in_set(std::uint64_t set) const;

  // Allocation masks for the current partition, bit i = way i.
  std::uint64_t ddio_mask() const { return ddio_mask_; }
  std::uint64_t core_mask() const { return core_mask_; }

 private:
  static constexpr LineId kInvalid = ~LineId{0};

  void rebuild_masks();
  std::uint64_t mask_for(AccessKind kind) const;

  CacheGeometry geo_;
  PartitionPolicy part_;
  std::uint64_t sets_;
  std::uint32_t ways_;
  std::uint32_t others_ways_ = 0;
  std::uint64_t address_space_lines_;
  std::uint64_t ddio_mask_ = 0;
  std::uint64_t core_mask_ = 0;
  std::uint64_t clock_ = 0;

  // Flat [set * ways + way] arrays.
  std::vector<LineId> tags_;
  std::vector<std::uint64_t> stamps_;
  std::vector<std::uint8_t> dirty_;
  std::vector<std::uint8_t> by_ddio_;

  CacheStats stats_;
};

}  // namespace upfcache
