#pragma once

#include <cstdint>
#include <string_view>

namespace upfcache {

/// Cumulative counters the simulator exposes to the profiler. Never reset
/// during a run; snapshots work on differences.
struct SimCounters {
  double t = 0.0;  // s
  std::uint64_t arrivals = 0;
  std::uint64_t arrival_bytes = 0;
  std::uint64_t drops = 0;
  std::uint64_t tx_packets = 0;
  std::uint64_t tx_bytes = 0;
  std::uint64_t ddio_write_accesses = 0;
  std::uint64_t ddio_write_misses = 0;
  std::uint64_t rx_core_accesses = 0;  // load-balancer thread
  std::uint64_t rx_core_misses = 0;
  std::uint64_t tx_core_accesses = 0;  // worker threads
  std::uint64_t tx_core_misses = 0;
  std::uint64_t pcie_bytes = 0;  // NIC DMA in both directions
  std::uint64_t dram_bytes = 0;
  double busy_ns = 0.0;  // summed busy time of LB and workers
};

struct MetricsSnapshot {
  double t = 0.0;
  double pcie_bandwidth = 0.0;  // bytes/s
  double ddio_write_miss_rate = 0.0;
  double llc_miss_rate = 0.0;  // all core accesses
  double dram_bandwidth = 0.0;  // bytes/s
  double throughput = 0.0;      // bits/s
  double loss_rate = 0.0;
  double rx_llc_miss_rate = 0.0;
  double tx_llc_miss_rate = 0.0;
  // Fraction of available core time spent busy; recorded, not consumed.
  double core_utilization = 0.0;
  std::uint32_t ddio_ways = 0;
};

/// Rates over [prev.t, cur.t]. Empty denominators give 0. Throws
/// std::invalid_argument for a non-positive window.
MetricsSnapshot snapshot(const SimCounters& prev, const SimCounters& cur, double window,
                         std::uint32_t cores = 1);

enum class Trend : std::uint8_t { Falling, Steady, Rising };
std::string_view to_string(Trend t);

struct MetricChange {
  Trend trend = Trend::Steady;
  double diff = 0.0;
};

struct MetricsDelta {
  MetricChange pcie_bandwidth;
  MetricChange ddio_write_miss_rate;
  MetricChange llc_miss_rate;
  MetricChange dram_bandwidth;
  MetricChange throughput;
};

struct TrendThresholds {
  double eps_steady = 0.05;  // relative
  // Absolute denominator floor for miss rates. Bandwidths use 1 unit.
  double rate_floor = 0.01;
};

/// Rising if (cur - prev) / max(|prev|, |cur|, floor) > eps, Falling if
/// < -eps. The symmetric denominator makes a->b Rising iff b->a Falling.
Trend classify(double prev, double cur, double eps_steady, double floor);

/// Throws std::invalid_argument unless cur.t > prev.t.
MetricsDelta delta_and_classify(const MetricsSnapshot& prev, const MetricsSnapshot& cur,
                                const TrendThresholds& th = {});

}  // namespace upfcache
