#pragma once

// Brute-force reference LLC for differential testing. Each set is a list
// ordered from most to least recently used; nothing is shared with the
// production cache beyond the public enums.

#include <cstdint>
#include <list>
#include <optional>
#include <vector>

#include "upfcache/cache_model.hpp"

namespace ref {

struct Outcome {
  bool hit = false;
  std::optional<std::uint64_t> evicted;
  std::uint64_t dram_bytes = 0;
  std::optional<std::uint32_t> way;
};

class LruReference {
 public:
  LruReference(std::uint64_t sets, std::uint32_t ways, std::uint32_t line_bytes,
               std::vector<bool> ddio_ways, std::vector<bool> core_ways)
      : sets_(sets), ways_(ways), line_bytes_(line_bytes), ddio_(std::move(ddio_ways)),
        core_(std::move(core_ways)), lists_(sets) {}

  Outcome access(std::uint64_t line, upfcache::AccessKind kind, bool dirty) {
    using upfcache::AccessKind;
    auto& lru = lists_[line % sets_];
    const bool write = kind == AccessKind::DdioWrite || kind == AccessKind::CoreWrite;
    for (auto it = lru.begin(); it != lru.end(); ++it) {
      if (it->line != line) continue;
      Entry e = *it;
      if (write && dirty) e.dirty = true;
      lru.erase(it);
      lru.push_front(e);
      return Outcome{true, std::nullopt, 0, e.way};
    }

    Outcome out;
    out.dram_bytes = line_bytes_;
    if (kind == AccessKind::DdioRead) return out;
    const auto& allowed = kind == AccessKind::DdioWrite ? ddio_ : core_;

    // A free allowed way wins, lowest index first.
    for (std::uint32_t w = 0; w < ways_; ++w) {
      if (!allowed[w]) continue;
      bool used = false;
      for (const auto& e : lru) used = used || e.way == w;
      if (!used) {
        lru.push_front(Entry{line, w, write && dirty});
        out.way = w;
        return out;
      }
    }
    // Otherwise the least recently used line sitting in an allowed way.
    for (auto it = lru.end(); it != lru.begin();) {
      --it;
      if (!allowed[it->way]) continue;
      out.evicted = it->line;
      if (it->dirty) out.dram_bytes += line_bytes_;
      const std::uint32_t w = it->way;
      lru.erase(it);
      lru.push_front(Entry{line, w, write && dirty});
      out.way = w;
      return out;
    }
    return out;  // empty mask: read-through
  }

  std::size_t resident_in_set(std::uint64_t set) const { return lists_[set].size(); }

 private:
  struct Entry {
    std::uint64_t line;
    std::uint32_t way;
    bool dirty;
  };
  std::uint64_t sets_;
  std::uint32_t ways_;
  std::uint32_t line_bytes_;
  std::vector<bool> ddio_;
  std::vector<bool> core_;
  std::vector<std::list<Entry>> lists_;
};

}  // namespace ref
