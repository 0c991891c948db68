#include "upfcache/allocator.hpp"

#include <algorithm>
#include <stdexcept>

#include "upfcache/cache_model.hpp"
#include "upfcache/errors.hpp"

namespace upfcache {

std::string_view to_string(AllocatorState s) {
  switch (s) {
    case AllocatorState::NoBottleneck: return "NoBottleneck";
    case AllocatorState::DdioCoreBalance: return "DdioCoreBalance";
    case AllocatorState::DdioBottleneck: return "DdioBottleneck";
    case AllocatorState::CoreBottleneck: return "CoreBottleneck";
  }
  return "?";
}

std::string_view to_string(AllocatorAction::Kind k) {
  switch (k) {
    case AllocatorAction::Kind::Hold: return "Hold";
    case AllocatorAction::Kind::GrowDdio: return "GrowDdio";
    case AllocatorAction::Kind::ShrinkDdio: return "ShrinkDdio";
  }
  return "?";
}

void AllocatorConfig::validate(std::uint32_t total_ways) const {
  if (!(pcie_bw_thr >= 0.0)) throw ConfigError("allocator.pcie_bw_thr", "must be >= 0");
  if (!(eps_steady >= 0.0)) throw ConfigError("profiler.eps_steady", "must be >= 0");
  if (!(rate_floor > 0.0)) throw ConfigError("profiler.rate_floor", "must be positive");
  if (min_ddio_ways < 1) throw ConfigError("allocator.min_ddio_ways", "must be >= 1");
  if (max_ddio_ways < min_ddio_ways)
    throw ConfigError("allocator.max_ddio_ways", "must be >= min_ddio_ways");
  if (max_ddio_ways + 1 > total_ways)
    throw ConfigError("allocator.max_ddio_ways", "must leave at least one way for the cores");
  if (step < 1) throw ConfigError("allocator.step", "must be >= 1");
}

AllocatorConfig AllocatorConfig::for_line_rate(double nic_line_rate_bps) {
  AllocatorConfig c;
  c.pcie_bw_thr = 0.25 * nic_line_rate_bps / 8.0;
  return c;
}

std::pair<AllocatorState, AllocatorAction> transition(AllocatorState state, const MetricsDelta& delta,
                                                      const MetricsSnapshot& snap,
                                                      const AllocatorConfig& cfg) {
  using S = AllocatorState;
  S next = state;
  if (snap.pcie_bandwidth <= cfg.pcie_bw_thr) {
    next = S::NoBottleneck;
  } else {
    const Trend ddio = delta.ddio_write_miss_rate.trend;
    const Trend llc = delta.llc_miss_rate.trend;
    switch (state) {
      case S::NoBottleneck: next = S::DdioBottleneck; break;
      case S::DdioBottleneck:
        if (ddio == Trend::Steady) next = S::DdioCoreBalance;
        break;
      case S::DdioCoreBalance:
        // Both short of cache: keep the current split.
        if (ddio == Trend::Rising && llc == Trend::Rising)
          next = S::DdioCoreBalance;
        else if (ddio == Trend::Rising)
          next = S::DdioBottleneck;
        else if (llc == Trend::Rising)
          next = S::CoreBottleneck;
        break;
      case S::CoreBottleneck:
        if (llc == Trend::Steady) next = S::DdioCoreBalance;
        break;
    }
  }
  switch (next) {
    case S::DdioBottleneck: return {next, AllocatorAction::grow(cfg.step)};
    case S::CoreBottleneck: return {next, AllocatorAction::shrink(cfg.step)};
    default: return {next, AllocatorAction::hold()};
  }
}

LlcAllocator::LlcAllocator(AllocatorConfig cfg) : cfg_(cfg) {}

void LlcAllocator::on_interval(const MetricsSnapshot& snap, LlcCache& cache) {
  cfg_.validate(cache.geometry().ways);
  // The first interval has no history; every trend reads as Steady.
  MetricsDelta delta;
  if (prev_) delta = delta_and_classify(*prev_, snap, {cfg_.eps_steady, cfg_.rate_floor});
  prev_ = snap;

  auto [next, action] = transition(state_, delta, snap, cfg_);
  state_ = next;

  AdjustmentRecord rec;
  rec.t = snap.t;
  rec.state = next;
  rec.action = action.kind;
  const std::uint32_t cur = cache.partition().ddio_ways;
  if (action.kind != AllocatorAction::Kind::Hold) {
    const std::uint32_t lo = cfg_.min_ddio_ways;
    const std::uint32_t hi = std::min(cfg_.max_ddio_ways, cache.max_ddio_ways());
    std::uint32_t target = action.kind == AllocatorAction::Kind::GrowDdio
                               ? std::min(cur + action.step, hi)
                               : (cur > lo + action.step ? cur - action.step : lo);
    target = std::clamp(target, lo, std::max(lo, hi));
    if (target == cur) {
      rec.action = AllocatorAction::Kind::Hold;
      rec.note = std::string("clamped ") + std::string(to_string(action.kind));
    } else {
      try {
        cache.resize_ddio_ways(target);
      } catch (const std::out_of_range& e) {
        rec.action = AllocatorAction::Kind::Hold;
        rec.note = std::string("rejected: ") + e.what();
      }
    }
  }
  rec.ddio_ways = cache.partition().ddio_ways;
  log_.push_back(std::move(rec));
}

}  // namespace upfcache
