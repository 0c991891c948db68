#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "upfcache/pipeline_sim.hpp"
#include "upfcache/profiler.hpp"

namespace upfcache {

enum class AllocatorState : std::uint8_t { NoBottleneck, DdioCoreBalance, DdioBottleneck, CoreBottleneck };
std::string_view to_string(AllocatorState s);

struct AllocatorConfig {
  double pcie_bw_thr = 0.25 * 100e9 / 8.0;  // bytes/s; a quarter of a 100G NIC
  double eps_steady = 0.05;
  double rate_floor = 0.01;
  std::uint32_t min_ddio_ways = 2;
  std::uint32_t max_ddio_ways = 8;
  std::uint32_t step = 1;

  void validate(std::uint32_t total_ways) const;
  static AllocatorConfig for_line_rate(double nic_line_rate_bps);
};

struct AllocatorAction {
  enum class Kind : std::uint8_t { Hold, GrowDdio, ShrinkDdio };
  Kind kind = Kind::Hold;
  std::uint32_t step = 0;

  bool operator==(const AllocatorAction&) const = default;
  static AllocatorAction hold() { return {}; }
  static AllocatorAction grow(std::uint32_t s) { return {Kind::GrowDdio, s}; }
  static AllocatorAction shrink(std::uint32_t s) { return {Kind::ShrinkDdio, s}; }
};
std::string_view to_string(AllocatorAction::Kind k);

/// One step of the bottleneck state machine. The pcie guard is checked
/// first and dominates every state; the miss-rate guards only apply above
/// the threshold. Total and deterministic.
std::pair<AllocatorState, AllocatorAction> transition(AllocatorState state, const MetricsDelta& delta,
                                                      const MetricsSnapshot& snap,
                                                      const AllocatorConfig& cfg);

struct AdjustmentRecord {
  double t = 0.0;
  AllocatorState state = AllocatorState::NoBottleneck;
  AllocatorAction::Kind action = AllocatorAction::Kind::Hold;
  std::uint32_t ddio_ways = 0;
  std::string note;  // set when a resize was clamped or rejected
};

/// Online controller: snapshot -> delta -> transition -> resize, once per
/// profiling interval.
class LlcAllocator : public SimController {
 public:
  explicit LlcAllocator(AllocatorConfig cfg);

  void on_interval(const MetricsSnapshot& snap, LlcCache& cache) override;

  AllocatorState state() const { return state_; }
  const std::vector<AdjustmentRecord>& log() const { return log_; }
  const AllocatorConfig& config() const { return cfg_; }

 private:
  AllocatorConfig cfg_;
  AllocatorState state_ = AllocatorState::NoBottleneck;
  std::optional<MetricsSnapshot> prev_;
  std::vector<AdjustmentRecord> log_;
};

}  // namespace upfcache
