#include "upfcache/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace upfcache {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) { return den == 0 ? 0.0 : double(num) / double(den); }

}  // namespace

MetricsSnapshot snapshot(const SimCounters& prev, const SimCounters& cur, double window,
                         std::uint32_t cores) {
  if (!(window > 0.0)) throw std::invalid_argument("snapshot: window must be positive");
  MetricsSnapshot s;
  s.t = cur.t;
  s.pcie_bandwidth = double(cur.pcie_bytes - prev.pcie_bytes) / window;
  s.dram_bandwidth = double(cur.dram_bytes - prev.dram_bytes) / window;
  s.throughput = 8.0 * double(cur.tx_bytes - prev.tx_bytes) / window;
  s.ddio_write_miss_rate = ratio(cur.ddio_write_misses - prev.ddio_write_misses,
                                 cur.ddio_write_accesses - prev.ddio_write_accesses);
  s.rx_llc_miss_rate = ratio(cur.rx_core_misses - prev.rx_core_misses,
                             cur.rx_core_accesses - prev.rx_core_accesses);
  s.tx_llc_miss_rate = ratio(cur.tx_core_misses - prev.tx_core_misses,
                             cur.tx_core_accesses - prev.tx_core_accesses);
  s.llc_miss_rate =
      ratio((cur.rx_core_misses - prev.rx_core_misses) + (cur.tx_core_misses - prev.tx_core_misses),
            (cur.rx_core_accesses - prev.rx_core_accesses) +
                (cur.tx_core_accesses - prev.tx_core_accesses));
  s.loss_rate = ratio(cur.drops - prev.drops, cur.arrivals - prev.arrivals);
  s.core_utilization =
      std::clamp((cur.busy_ns - prev.busy_ns) / (window * 1e9 * std::max(1u, cores)), 0.0, 1.0);
  return s;
}

std::string_view to_string(Trend t) {
  switch (t) {
    case Trend::Falling: return "falling";
    case Trend::Steady: return "steady";
    case Trend::Rising: return "rising";
  }
  return "?";
}

Trend classify(double prev, double cur, double eps_steady, double floor) {
  const double den = std::max({std::abs(prev), std::abs(cur), floor});
  const double rel = (cur - prev) / den;
  if (rel > eps_steady) return Trend::Rising;
  if (rel < -eps_steady) return Trend::Falling;
  return Trend::Steady;
}

MetricsDelta delta_and_classify(const MetricsSnapshot& prev, const MetricsSnapshot& cur,
                                const TrendThresholds& th) {
  if (!(cur.t > prev.t)) throw std::invalid_argument("delta_and_classify: timestamps must increase");
  auto change = [&](double a, double b, double floor) {
    return MetricChange{classify(a, b, th.eps_steady, floor), b - a};
  };
  MetricsDelta d;
  d.pcie_bandwidth = change(prev.pcie_bandwidth, cur.pcie_bandwidth, 1.0);
  d.ddio_write_miss_rate = change(prev.ddio_write_miss_rate, cur.ddio_write_miss_rate, th.rate_floor);
  d.llc_miss_rate = change(prev.llc_miss_rate, cur.llc_miss_rate, th.rate_floor);
  d.dram_bandwidth = change(prev.dram_bandwidth, cur.dram_bandwidth, 1.0);
  d.throughput = change(prev.throughput, cur.throughput, 1.0);
  return d;
}

}  // namespace upfcache
