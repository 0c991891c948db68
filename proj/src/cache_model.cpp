#include "upfcache/cache_model.hpp"

#include <bit>
#include <stdexcept>
#include <string>

#include "upfcache/errors.hpp"

namespace upfcache {

void CacheGeometry::validate() const {
  if (line_bytes == 0 || !std::has_single_bit(line_bytes))
    throw ConfigError("geometry.line_bytes", "must be a power of two");
  if (ways == 0 || ways > 64)
    throw ConfigError("geometry.ways", "must be in [1, 64]");
  const std::uint64_t row = std::uint64_t{ways} * line_bytes;
  if (total_bytes == 0 || total_bytes % row != 0)
    throw ConfigError("geometry.total_bytes",
                      "must be a positive multiple of ways * line_bytes (" + std::to_string(row) + ")");
}

CacheGeometry CacheGeometry::from_sets(std::uint64_t sets, std::uint32_t ways,
                                       std::uint32_t line_bytes) {
  CacheGeometry g;
  g.ways = ways;
  g.line_bytes = line_bytes;
  g.total_bytes = sets * ways * line_bytes;
  return g;
}

void PartitionPolicy::validate(const CacheGeometry& geo) const {
  if (ddio_ways < 1 || ddio_ways > geo.ways)
    throw ConfigError("partition.ddio_ways", "must be in [1, ways]");
  if (mode == PartitionMode::Isolated) {
    if (core_ways < 1)
      throw ConfigError("partition.core_ways", "isolated mode needs at least one core way");
    if (ddio_ways + core_ways > geo.ways)
      throw ConfigError("partition.core_ways", "ddio_ways + core_ways exceeds ways");
  }
}

std::string_view to_string(AccessKind k) {
  switch (k) {
    case AccessKind::DdioWrite: return "DdioWrite";
    case AccessKind::DdioRead: return "DdioRead";
    case AccessKind::CoreRead: return "CoreRead";
    case AccessKind::CoreWrite: return "CoreWrite";
  }
  return "?";
}

std::string_view to_string(PartitionMode m) {
  return m == PartitionMode::Shared ? "shared" : "isolated";
}

LlcCache::LlcCache(CacheGeometry geometry, PartitionPolicy partition,
                   std::uint64_t address_space_lines)
    : geo_(geometry), part_(partition), address_space_lines_(address_space_lines) {
  geo_.validate();
  part_.validate(geo_);
  sets_ = geo_.sets();
  ways_ = geo_.ways;
  if (part_.mode == PartitionMode::Isolated)
    others_ways_ = ways_ - part_.ddio_ways - part_.core_ways;
  const std::size_t n = sets_ * ways_;
  tags_.assign(n, kInvalid);
  stamps_.assign(n, 0);
  dirty_.assign(n, 0);
  by_ddio_.assign(n, 0);
  rebuild_masks();
}

void LlcCache::rebuild_masks() {
  const std::uint64_t all = ways_ == 64 ? ~0ull : ((1ull << ways_) - 1);
  ddio_mask_ = (1ull << part_.ddio_ways) - 1;
  if (part_.mode == PartitionMode::Shared) {
    core_mask_ = all;
  } else {
    const std::uint32_t low = part_.ddio_ways + others_ways_;
    core_mask_ = all & ~((1ull << low) - 1);
  }
}

std::uint32_t LlcCache::max_ddio_ways() const {
  if (part_.mode == PartitionMode::Shared) return ways_;
  return ways_ - others_ways_ - 1;
}

void LlcCache::resize_ddio_ways(std::uint32_t new_ddio_ways) {
  if (new_ddio_ways < 1 || new_ddio_ways > max_ddio_ways())
    throw std::out_of_range("resize_ddio_ways: " + std::to_string(new_ddio_ways) +
                            " outside [1, " + std::to_string(max_ddio_ways()) + "]");
  part_.ddio_ways = new_ddio_ways;
  if (part_.mode == PartitionMode::Isolated)
    part_.core_ways = ways_ - others_ways_ - new_ddio_ways;
  rebuild_masks();
}

std::uint64_t LlcCache::mask_for(AccessKind kind) const {
  switch (kind) {
    case AccessKind::DdioWrite: return ddio_mask_;
    case AccessKind::DdioRead: return 0;
    case AccessKind::CoreRead:
    case AccessKind::CoreWrite: return core_mask_;
  }
  return 0;
}

AccessOutcome LlcCache::access(LineId line, AccessKind kind, bool dirty) {
  if (line >= address_space_lines_)
    throw std::out_of_range("line " + std::to_string(line) + " outside modeled address space of " +
                            std::to_string(address_space_lines_) + " lines");

  const std::size_t base = std::size_t(line % sets_) * ways_;
  auto& kc = stats_[kind];
  ++kc.accesses;
  ++clock_;
  const bool is_write = kind == AccessKind::DdioWrite || kind == AccessKind::CoreWrite;

  for (std::uint32_t w = 0; w < ways_; ++w) {
    if (tags_[base + w] == line) {
      ++kc.hits;
      stamps_[base + w] = clock_;
      if (is_write && dirty) dirty_[base + w] = 1;
      return AccessOutcome{true, std::nullopt, 0, w};
    }
  }

  ++kc.misses;
  AccessOutcome out;
  out.dram_bytes_moved = geo_.line_bytes;
  ++stats_.fills;

  const std::uint64_t mask = mask_for(kind);
  if (mask == 0) {
    stats_.dram_bytes_total += out.dram_bytes_moved;
    return out;
  }

  // Lowest free way in the mask, else the LRU way in the mask.
  std::uint32_t victim = ways_;
  std::uint64_t oldest = ~0ull;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    if (!(mask >> w & 1)) continue;
    if (tags_[base + w] == kInvalid) {
      victim = w;
      break;
    }
    if (stamps_[base + w] < oldest) {
      oldest = stamps_[base + w];
      victim = w;
    }
  }
  if (victim == ways_ || !(mask >> victim & 1))
    throw InvariantViolation("allocation outside the access kind's way mask");

  const std::size_t slot = base + victim;
  if (tags_[slot] != kInvalid) {
    out.evicted_line = tags_[slot];
    ++stats_.evictions;
    if (dirty_[slot]) {
      out.dram_bytes_moved += geo_.line_bytes;
      ++stats_.writebacks;
    }
    if (by_ddio_[slot] && kind != AccessKind::DdioWrite) ++stats_.core_evicted_ddio;
  }
  tags_[slot] = line;
  stamps_[slot] = clock_;
  dirty_[slot] = (is_write && dirty) ? 1 : 0;
  by_ddio_[slot] = kind == AccessKind::DdioWrite ? 1 : 0;
  out.way = victim;
  stats_.dram_bytes_total += out.dram_bytes_moved;
  return out;
}

bool LlcCache::resident(LineId line) const { return way_of(line).has_value(); }

std::optional<std::uint32_t> LlcCache::way_of(LineId line) const {
  const std::size_t base = std::size_t(line % sets_) * ways_;
  for (std::uint32_t w = 0; w < ways_; ++w)
    if (tags_[base + w] == line) return w;
  return std::nullopt;
}

std::uint32_t LlcCache::resident_in_set(std::uint64_t set) const {
  const std::size_t base = std::size_t(set) * ways_;
  std::uint32_t n = 0;
  for (std::uint32_t w = 0; w < ways_; ++w)
    if (tags_[base + w] != kInvalid) ++n;
  return n;
}

}  // namespace upfcache
