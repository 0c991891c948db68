#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upfcache/pipeline_sim.hpp"
#include "upfcache/traffic.hpp"

namespace upfcache {

struct SearchSpace {
  std::vector<std::uint32_t> descriptor_candidates{128, 256, 512, 1024, 2048, 4096};
  std::vector<std::uint32_t> buffer_candidates{8192, 16384, 32768, 65536, 131072, 262140};
  double loss_threshold = 0.01;

  void validate() const;
};

enum class SweepAxis : std::uint8_t { Descriptors, BufferSize, DdioWays };
std::string_view to_string(SweepAxis a);

/// Per-candidate averages over the repetitions. A candidate whose config
/// failed validation keeps its row with `config_error` set and zero metrics.
struct SweepRecord {
  std::uint32_t candidate = 0;
  std::uint32_t repetitions = 0;
  double throughput = 0.0;
  double loss_rate = 0.0;
  double ddio_write_miss_rate = 0.0;
  double rx_llc_miss_rate = 0.0;
  double tx_llc_miss_rate = 0.0;
  double dram_bytes_per_second = 0.0;
  std::string config_error;

  bool valid() const { return config_error.empty(); }
};

struct Selection {
  std::uint32_t chosen = 0;
  bool feasible = false;
  std::vector<std::uint32_t> feasible_set;
  std::string rationale;
};

/// Apply one candidate value to a copy of `base`. For DdioWays in Isolated
/// mode the "others" ways stay fixed and the core partition absorbs the
/// change.
PipelineConfig with_candidate(const PipelineConfig& base, SweepAxis axis, std::uint32_t value);

/// One simulation per (candidate, repetition); repetition r runs with seed
/// profile.seed + r for every candidate. `jobs` > 1 runs cells on a thread
/// pool; the table is identical either way.
std::vector<SweepRecord> sweep(SweepAxis axis, std::span<const std::uint32_t> candidates,
                               const PipelineConfig& base, const TrafficProfile& profile,
                               std::uint32_t repetitions, unsigned jobs = 1);
std::vector<SweepRecord> sweep(SweepAxis axis, const SearchSpace& space, const PipelineConfig& base,
                               const TrafficProfile& profile, std::uint32_t repetitions,
                               unsigned jobs = 1);

/// Loss-constrained throughput maximization. Ties go to the smaller
/// candidate; with no feasible row the minimum-loss row is returned with
/// feasible = false. Rows with a config error never qualify.
Selection select(std::span<const SweepRecord> records, double loss_threshold);

struct GridCell {
  std::uint32_t descriptors = 0;
  std::uint32_t buffer = 0;
  SweepRecord record;
};

struct SearchReport {
  std::vector<SweepRecord> descriptor_table;
  Selection descriptor_choice;
  std::vector<SweepRecord> buffer_table;
  Selection buffer_choice;
  std::uint32_t chosen_descriptors = 0;
  std::uint32_t chosen_buffer = 0;
  std::vector<GridCell> grid;  // only filled by the 2-D search
};

/// Coordinate search: sweep descriptors at the base buffer size, fix the
/// winner, then sweep the buffer size.
SearchReport full_offline_search(const SearchSpace& space, const PipelineConfig& base,
                                 const TrafficProfile& profile, std::uint32_t repetitions = 1,
                                 unsigned jobs = 1);

/// Exhaustive D x RX_b grid; the choice is the select() winner over all
/// cells, reported through buffer_choice with the descriptor count alongside.
SearchReport grid_offline_search(const SearchSpace& space, const PipelineConfig& base,
                                 const TrafficProfile& profile, std::uint32_t repetitions = 1,
                                 unsigned jobs = 1);

}  // namespace upfcache
