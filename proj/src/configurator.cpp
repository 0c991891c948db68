#include "upfcache/configurator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "upfcache/errors.hpp"

namespace upfcache {

namespace {

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
  return buf;
}

std::string gbps(double bps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f Gbps", bps / 1e9);
  return buf;
}

void check_increasing(const std::vector<std::uint32_t>& v, const char* field) {
  if (v.empty()) throw ConfigError(field, "must not be empty");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) throw ConfigError(field, "candidates must be strictly increasing");
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index writes only
// its own output slot, so the result does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, unsigned(n)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SweepRecord average(std::uint32_t candidate, std::span<const SimResult> runs) {
  SweepRecord r;
  r.candidate = candidate;
  r.repetitions = std::uint32_t(runs.size());
  for (const auto& s : runs) {
    r.throughput += s.throughput;
    r.loss_rate += s.packet_loss_rate;
    r.ddio_write_miss_rate += s.ddio_write_miss_rate;
    r.rx_llc_miss_rate += s.rx_llc_miss_rate;
    r.tx_llc_miss_rate += s.tx_llc_miss_rate;
    r.dram_bytes_per_second += s.dram_bytes_per_second;
  }
  const double n = double(runs.size());
  r.throughput /= n;
  r.loss_rate /= n;
  r.ddio_write_miss_rate /= n;
  r.rx_llc_miss_rate /= n;
  r.tx_llc_miss_rate /= n;
  r.dram_bytes_per_second /= n;
  return r;
}

struct Cell {
  PipelineConfig config;
  std::string error;
};

std::vector<SweepRecord> run_cells(const std::vector<Cell>& cells,
                                   const std::vector<std::uint32_t>& ids,
                                   const TrafficProfile& profile, std::uint32_t repetitions,
                                   unsigned jobs) {
  if (repetitions < 1) throw ConfigError("search.repetitions", "must be >= 1");
  profile.validate();
  std::vector<SimResult> results(cells.size() * repetitions);
  parallel_for(results.size(), jobs, [&](std::size_t k) {
    const Cell& c = cells[k / repetitions];
    if (!c.error.empty()) return;
    TrafficProfile p = profile;
    p.seed = profile.seed + k % repetitions;
    results[k] = run(p, c.config);
  });
  std::vector<SweepRecord> table;
  table.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].error.empty()) {
      SweepRecord r;
      r.candidate = ids[i];
      r.config_error = cells[i].error;
      table.push_back(std::move(r));
      continue;
    }
    table.push_back(average(ids[i], std::span(results).subspan(i * repetitions, repetitions)));
  }
  return table;
}

Cell make_cell(const PipelineConfig& cfg) {
  Cell c{cfg, {}};
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    c.error = e.what();
  }
  return c;
}

}  // namespace

void SearchSpace::validate() const {
  check_increasing(descriptor_candidates, "search.descriptor_candidates");
  check_increasing(buffer_candidates, "search.buffer_candidates");
  if (!(loss_threshold > 0.0 && loss_threshold < 1.0))
    throw ConfigError("search.loss_threshold", "must be in (0, 1)");
}

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Descriptors: return "descriptors";
    case SweepAxis::BufferSize: return "buffer";
    case SweepAxis::DdioWays: return "ddio_ways";
  }
  return "?";
}

PipelineConfig with_candidate(const PipelineConfig& base, SweepAxis axis, std::uint32_t value) {
  PipelineConfig c = base;
  switch (axis) {
    case SweepAxis::Descriptors: c.descriptor_count = value; break;
    case SweepAxis::BufferSize: c.mbuf_ring_size = value; break;
    case SweepAxis::DdioWays: {
      auto& part = c.partition;
      if (part.mode == PartitionMode::Isolated) {
        const std::uint32_t ways = c.geometry.ways;
        const std::uint32_t others = ways - std::min(ways, base.partition.ddio_ways + base.partition.core_ways);
        part.core_ways = ways > others + value ? ways - others - value : 0;
      }
      part.ddio_ways = value;
      break;
    }
  }
  return c;
}

std::vector<SweepRecord> sweep(SweepAxis axis, std::span<const std::uint32_t> candidates,
                               const PipelineConfig& base, const TrafficProfile& profile,
                               std::uint32_t repetitions, unsigned jobs) {
  std::vector<Cell> cells;
  std::vector<std::uint32_t> ids(candidates.begin(), candidates.end());
  for (auto v : candidates) cells.push_back(make_cell(with_candidate(base, axis, v)));
  return run_cells(cells, ids, profile, repetitions, jobs);
}

std::vector<SweepRecord> sweep(SweepAxis axis, const SearchSpace& space, const PipelineConfig& base,
                               const TrafficProfile& profile, std::uint32_t repetitions,
                               unsigned jobs) {
  space.validate();
  switch (axis) {
    case SweepAxis::Descriptors:
      return sweep(axis, space.descriptor_candidates, base, profile, repetitions, jobs);
    case SweepAxis::BufferSize:
      return sweep(axis, space.buffer_candidates, base, profile, repetitions, jobs);
    case SweepAxis::DdioWays: break;
  }
  throw std::invalid_argument("sweep: the search space has no ddio-way candidates");
}

Selection select(std::span<const SweepRecord> records, double loss_threshold) {
  if (records.empty()) throw std::invalid_argument("select: empty sweep table");
  if (!(loss_threshold > 0.0 && loss_threshold <= 1.0))
    throw std::invalid_argument("select: loss threshold must be in (0, 1]");

  // Total orders on a fixed key so the answer does not depend on row order.
  auto better_tp = [](const SweepRecord* a, const SweepRecord* b) {
    if (a->throughput != b->throughput) return a->throughput > b->throughput;
    return a->candidate < b->candidate;
  };
  auto better_loss = [](const SweepRecord* a, const SweepRecord* b) {
    if (a->loss_rate != b->loss_rate) return a->loss_rate < b->loss_rate;
    if (a->throughput != b->throughput) return a->throughput > b->throughput;
    return a->candidate < b->candidate;
  };

  std::vector<const SweepRecord*> valid, feasible;
  for (const auto& r : records) {
    if (!r.valid()) continue;
    valid.push_back(&r);
    if (r.loss_rate <= loss_threshold) feasible.push_back(&r);
  }
  if (valid.empty()) throw std::invalid_argument("select: every candidate has an invalid config");

  Selection s;
  for (const auto* r : feasible) s.feasible_set.push_back(r->candidate);
  std::sort(s.feasible_set.begin(), s.feasible_set.end());

  if (feasible.empty()) {
    const auto* best = *std::min_element(valid.begin(), valid.end(), better_loss);
    s.chosen = best->candidate;
    s.feasible = false;
    s.rationale = "no candidate meets the " + percent(loss_threshold) + " loss limit; chose " +
                  std::to_string(best->candidate) + " with the lowest loss (" +
                  percent(best->loss_rate) + ")";
    return s;
  }

  const auto* best = *std::min_element(feasible.begin(), feasible.end(), better_tp);
  s.chosen = best->candidate;
  s.feasible = true;
  s.rationale = "chose " + std::to_string(best->candidate) + ": highest throughput (" +
                gbps(best->throughput) + ") among " + std::to_string(feasible.size()) +
                " candidate(s) with loss <= " + percent(loss_threshold);

  std::vector<const SweepRecord*> rejected;
  for (const auto* r : valid)
    if (r->loss_rate > loss_threshold && r->throughput > best->throughput) rejected.push_back(r);
  std::sort(rejected.begin(), rejected.end(),
            [](auto* a, auto* b) { return a->candidate < b->candidate; });
  for (const auto* r : rejected)
    s.rationale += "; rejected " + std::to_string(r->candidate) + " (" + gbps(r->throughput) +
                   ", loss " + percent(r->loss_rate) + " over the limit)";
  return s;
}

SearchReport full_offline_search(const SearchSpace& space, const PipelineConfig& base,
                                 const TrafficProfile& profile, std::uint32_t repetitions,
                                 unsigned jobs) {
  space.validate();
  SearchReport rep;
  rep.descriptor_table = sweep(SweepAxis::Descriptors, space, base, profile, repetitions, jobs);
  rep.descriptor_choice = select(rep.descriptor_table, space.loss_threshold);
  rep.chosen_descriptors = rep.descriptor_choice.chosen;

  PipelineConfig fixed = base;
  fixed.descriptor_count = rep.chosen_descriptors;
  rep.buffer_table = sweep(SweepAxis::BufferSize, space, fixed, profile, repetitions, jobs);
  rep.buffer_choice = select(rep.buffer_table, space.loss_threshold);
  rep.chosen_buffer = rep.buffer_choice.chosen;
  return rep;
}

SearchReport grid_offline_search(const SearchSpace& space, const PipelineConfig& base,
                                 const TrafficProfile& profile, std::uint32_t repetitions,
                                 unsigned jobs) {
  space.validate();
  std::vector<Cell> cells;
  std::vector<std::uint32_t> ids;
  for (auto d : space.descriptor_candidates)
    for (auto b : space.buffer_candidates) {
      PipelineConfig c = base;
      c.descriptor_count = d;
      c.mbuf_ring_size = b;
      ids.push_back(std::uint32_t(cells.size()));
      cells.push_back(make_cell(c));
    }
  auto table = run_cells(cells, ids, profile, repetitions, jobs);

  SearchReport rep;
  const std::size_t nb = space.buffer_candidates.size();
  for (std::size_t i = 0; i < table.size(); ++i)
    rep.grid.push_back({space.descriptor_candidates[i / nb], space.buffer_candidates[i % nb], table[i]});

  // Cell ids are row-major over (D, RX_b), so select's smaller-id tie rule
  // prefers fewer descriptors, then the smaller buffer.
  Selection s = select(table, space.loss_threshold);
  const auto& cell = rep.grid[s.chosen];
  rep.chosen_descriptors = cell.descriptors;
  rep.chosen_buffer = cell.buffer;
  const std::size_t n_feasible = s.feasible_set.size();
  s.feasible_set.clear();
  s.chosen = cell.buffer;
  s.rationale = "grid winner D=" + std::to_string(cell.descriptors) + ", RX_b=" +
                std::to_string(cell.buffer) + " (" + gbps(cell.record.throughput) + ", loss " +
                percent(cell.record.loss_rate) + ") out of " + std::to_string(n_feasible) +
                " feasible cell(s)";
  rep.descriptor_choice.chosen = cell.descriptors;
  rep.descriptor_choice.feasible = s.feasible;
  rep.descriptor_choice.rationale = s.rationale;
  rep.buffer_choice = std::move(s);
  for (auto& g : rep.grid) g.record.candidate = g.buffer;
  return rep;
}

}  // namespace upfcache
