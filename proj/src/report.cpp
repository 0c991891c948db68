#include "upfcache/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string_view>
#include <type_traits>

#include "upfcache/errors.hpp"

namespace upfcache {

namespace {

// Typed, path-aware access into one JSON object. Every key read is
// remembered so leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* raw(const char* key) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const char* key, T& out) {
    const Json* v = raw(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) throw ConfigError(field(key), "must be a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "must be an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > std::uint64_t(std::numeric_limits<T>::max())) throw ConfigError(field(key), "out of range");
        out = T(u);
      } else {
        const auto s = v->get<std::int64_t>();
        if (s < 0) throw ConfigError(field(key), "must be non-negative");
        if (std::uint64_t(s) > std::uint64_t(std::numeric_limits<T>::max()))
          throw ConfigError(field(key), "out of range");
        out = T(s);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) throw ConfigError(field(key), "must be a number");
      out = v->get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) throw ConfigError(field(key), "must be a string");
      out = v->get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  void get_list(const char* key, std::vector<std::uint32_t>& out) {
    const Json* v = raw(key);
    if (!v) return;
    if (!v->is_array()) throw ConfigError(field(key), "must be an array of integers");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number_unsigned() || e.get<std::uint64_t>() > 0xFFFFFFFFull)
        throw ConfigError(field(key), "must be an array of non-negative integers");
      out.push_back(e.get<std::uint32_t>());
    }
  }

  Section sub(const char* key) {
    seen_.emplace_back(key);
    return Section(j_.at(key), field(key));
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError(field(it.key().c_str()), "unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

std::string_view mode_name(PartitionMode m) { return m == PartitionMode::Shared ? "shared" : "isolated"; }

}  // namespace

void ExperimentConfig::validate() const {
  pipeline.validate();
  traffic.validate();
  allocator.validate(pipeline.geometry.ways);
  search.validate();
  if (repetitions < 1) throw ConfigError("search.repetitions", "must be >= 1");
}

ExperimentConfig parse_config(const Json& doc) {
  if (doc.is_object() && doc.contains("resolved_config")) return parse_config(doc.at("resolved_config"));

  ExperimentConfig cfg;
  Section root(doc, "");
  auto& p = cfg.pipeline;

  if (root.has("geometry")) {
    auto s = root.sub("geometry");
    s.get("total_bytes", p.geometry.total_bytes);
    s.get("ways", p.geometry.ways);
    s.get("line_bytes", p.geometry.line_bytes);
    s.reject_unknown();
  }
  if (root.has("partition")) {
    auto s = root.sub("partition");
    std::string mode(mode_name(p.partition.mode));
    s.get("mode", mode);
    if (mode == "shared")
      p.partition.mode = PartitionMode::Shared;
    else if (mode == "isolated")
      p.partition.mode = PartitionMode::Isolated;
    else
      throw ConfigError("partition.mode", "must be \"shared\" or \"isolated\"");
    s.get("ddio_ways", p.partition.ddio_ways);
    s.get("core_ways", p.partition.core_ways);
    s.reject_unknown();
  }
  if (root.has("pipeline")) {
    auto s = root.sub("pipeline");
    s.get("descriptor_count", p.descriptor_count);
    s.get("mbuf_ring_size", p.mbuf_ring_size);
    s.get("mbuf_stride", p.mbuf_stride);
    s.get("queue_capacity", p.queue_capacity);
    s.get("lb_cores", p.lb_cores);
    s.get("worker_cores", p.worker_cores);
    s.get("working_set_bytes", p.working_set_bytes);
    s.get("working_set_accesses", p.working_set_accesses);
    s.get("header_lines", p.header_lines);
    s.get("mbuf_meta_lines", p.mbuf_meta_lines);
    s.get("headroom_lines", p.headroom_lines);
    s.get("nic_line_rate_bps", p.nic_line_rate_bps);
    s.get("audit_every", p.audit_every);
    if (s.has("timing")) {
      auto t = s.sub("timing");
      t.get("llc_hit_ns", p.timing.llc_hit_ns);
      t.get("dram_access_ns", p.timing.dram_access_ns);
      t.get("per_packet_proc_ns", p.timing.per_packet_proc_ns);
      t.get("poll_batch", p.timing.poll_batch);
      t.get("idle_poll_ns", p.timing.idle_poll_ns);
      t.reject_unknown();
    }
    s.reject_unknown();
  }
  if (root.has("traffic")) {
    auto s = root.sub("traffic");
    auto& tr = cfg.traffic;
    if (s.has("packet_size") && s.has("mixture"))
      throw ConfigError("traffic.mixture", "give either packet_size or mixture, not both");
    if (s.has("packet_size")) {
      FixedSize f;
      s.get("packet_size", f.bytes);
      tr.size_model = f;
    }
    if (const Json* mix = s.raw("mixture")) {
      if (mix->is_string() && mix->get<std::string>() == "default") {
        tr.size_model = TrafficProfile::default_mixture();
      } else if (mix->is_array()) {
        SizeMixture m;
        for (const auto& e : *mix) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number())
            throw ConfigError("traffic.mixture", "entries must be [bytes, weight] pairs");
          m.entries.emplace_back(e[0].get<std::uint32_t>(), e[1].get<double>());
        }
        tr.size_model = std::move(m);
      } else {
        throw ConfigError("traffic.mixture", "must be \"default\" or a list of [bytes, weight]");
      }
    }
    s.get("offered_rate", tr.offered_rate);
    s.get("duration", tr.duration);
    s.get("seed", tr.seed);
    if (const Json* b = s.raw("burst"); b && !b->is_null()) {
      Section bs(*b, "traffic.burst");
      OnOffBurst burst;
      bs.get("on_seconds", burst.on_seconds);
      bs.get("off_seconds", burst.off_seconds);
      bs.get("burst_multiplier", burst.burst_multiplier);
      bs.reject_unknown();
      tr.burst = burst;
    }
    s.reject_unknown();
  }
  if (root.has("profiler")) {
    auto s = root.sub("profiler");
    s.get("interval_s", p.interval_s);
    s.get("eps_steady", cfg.allocator.eps_steady);
    s.get("rate_floor", cfg.allocator.rate_floor);
    s.reject_unknown();
  }
  cfg.allocator.pcie_bw_thr = AllocatorConfig::for_line_rate(p.nic_line_rate_bps).pcie_bw_thr;
  if (root.has("allocator")) {
    auto s = root.sub("allocator");
    s.get("pcie_bw_thr", cfg.allocator.pcie_bw_thr);
    s.get("min_ddio_ways", cfg.allocator.min_ddio_ways);
    s.get("max_ddio_ways", cfg.allocator.max_ddio_ways);
    s.get("step", cfg.allocator.step);
    s.reject_unknown();
  }
  if (root.has("search")) {
    auto s = root.sub("search");
    s.get_list("descriptor_candidates", cfg.search.descriptor_candidates);
    s.get_list("buffer_candidates", cfg.search.buffer_candidates);
    s.get("loss_threshold", cfg.search.loss_threshold);
    s.get("repetitions", cfg.repetitions);
    s.get("grid", cfg.grid_search);
    s.reject_unknown();
  }
  root.reject_unknown();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

Json to_json(const ExperimentConfig& cfg) {
  const auto& p = cfg.pipeline;
  Json j;
  j["geometry"] = {{"total_bytes", p.geometry.total_bytes},
                   {"ways", p.geometry.ways},
                   {"line_bytes", p.geometry.line_bytes}};
  j["partition"] = {{"mode", mode_name(p.partition.mode)},
                    {"ddio_ways", p.partition.ddio_ways},
                    {"core_ways", p.partition.core_ways}};
  j["pipeline"] = {{"descriptor_count", p.descriptor_count},
                   {"mbuf_ring_size", p.mbuf_ring_size},
                   {"mbuf_stride", p.mbuf_stride},
                   {"queue_capacity", p.queue_capacity},
                   {"lb_cores", p.lb_cores},
                   {"worker_cores", p.worker_cores},
                   {"working_set_bytes", p.working_set_bytes},
                   {"working_set_accesses", p.working_set_accesses},
                   {"header_lines", p.header_lines},
                   {"mbuf_meta_lines", p.mbuf_meta_lines},
                   {"headroom_lines", p.headroom_lines},
                   {"nic_line_rate_bps", p.nic_line_rate_bps},
                   {"audit_every", p.audit_every},
                   {"timing",
                    {{"llc_hit_ns", p.timing.llc_hit_ns},
                     {"dram_access_ns", p.timing.dram_access_ns},
                     {"per_packet_proc_ns", p.timing.per_packet_proc_ns},
                     {"poll_batch", p.timing.poll_batch},
                     {"idle_poll_ns", p.timing.idle_poll_ns}}}};
  Json tr;
  if (const auto* f = std::get_if<FixedSize>(&cfg.traffic.size_model)) {
    tr["packet_size"] = f->bytes;
  } else {
    Json mix = Json::array();
    for (const auto& [bytes, w] : std::get<SizeMixture>(cfg.traffic.size_model).entries)
      mix.push_back({bytes, w});
    tr["mixture"] = std::move(mix);
  }
  tr["offered_rate"] = cfg.traffic.offered_rate;
  tr["duration"] = cfg.traffic.duration;
  tr["seed"] = cfg.traffic.seed;
  if (cfg.traffic.burst)
    tr["burst"] = {{"on_seconds", cfg.traffic.burst->on_seconds},
                   {"off_seconds", cfg.traffic.burst->off_seconds},
                   {"burst_multiplier", cfg.traffic.burst->burst_multiplier}};
  else
    tr["burst"] = nullptr;
  j["traffic"] = std::move(tr);
  j["profiler"] = {{"interval_s", p.interval_s},
                   {"eps_steady", cfg.allocator.eps_steady},
                   {"rate_floor", cfg.allocator.rate_floor}};
  j["allocator"] = {{"pcie_bw_thr", cfg.allocator.pcie_bw_thr},
                    {"min_ddio_ways", cfg.allocator.min_ddio_ways},
                    {"max_ddio_ways", cfg.allocator.max_ddio_ways},
                    {"step", cfg.allocator.step}};
  j["search"] = {{"descriptor_candidates", cfg.search.descriptor_candidates},
                 {"buffer_candidates", cfg.search.buffer_candidates},
                 {"loss_threshold", cfg.search.loss_threshold},
                 {"repetitions", cfg.repetitions},
                 {"grid", cfg.grid_search}};
  return j;
}

Json to_json(const SimResult& r) {
  return {{"duration", r.duration},
          {"throughput_bps", r.throughput},
          {"offered_load_bps", r.offered_load},
          {"packet_loss_rate", r.packet_loss_rate},
          {"ddio_write_miss_rate", r.ddio_write_miss_rate},
          {"rx_llc_miss_rate", r.rx_llc_miss_rate},
          {"tx_llc_miss_rate", r.tx_llc_miss_rate},
          {"dram_Bps", r.dram_bytes_per_second},
          {"pcie_Bps", r.pcie_bytes_per_second},
          {"worker_utilization", r.worker_utilization},
          {"mbuf_shortage_events", r.mbuf_shortage_events},
          {"arrivals", r.arrivals},
          {"transmitted", r.transmitted},
          {"dropped", r.dropped},
          {"in_flight", r.in_flight},
          {"events", r.events},
          {"final_ddio_ways", r.final_ddio_ways},
          {"intervals", r.timeline.size()}};
}

Json to_json(const SweepRecord& r) {
  Json j = {{"candidate", r.candidate}, {"repetitions", r.repetitions}};
  if (!r.valid()) {
    j["config_error"] = r.config_error;
    return j;
  }
  j["throughput_bps"] = r.throughput;
  j["loss_rate"] = r.loss_rate;
  j["ddio_write_miss_rate"] = r.ddio_write_miss_rate;
  j["rx_llc_miss"] = r.rx_llc_miss_rate;
  j["tx_llc_miss"] = r.tx_llc_miss_rate;
  j["dram_Bps"] = r.dram_bytes_per_second;
  return j;
}

Json to_json(const Selection& s) {
  return {{"chosen", s.chosen},
          {"feasible", s.feasible},
          {"feasible_set", s.feasible_set},
          {"rationale", s.rationale}};
}

Json to_json(const SearchReport& rep) {
  Json j;
  j["chosen_descriptors"] = rep.chosen_descriptors;
  j["chosen_buffer"] = rep.chosen_buffer;
  auto table = [](std::span<const SweepRecord> t) {
    Json a = Json::array();
    for (const auto& r : t) a.push_back(to_json(r));
    return a;
  };
  if (rep.grid.empty()) {
    j["descriptor_choice"] = to_json(rep.descriptor_choice);
    j["descriptor_table"] = table(rep.descriptor_table);
    j["buffer_choice"] = to_json(rep.buffer_choice);
    j["buffer_table"] = table(rep.buffer_table);
  } else {
    j["choice"] = to_json(rep.buffer_choice);
    Json g = Json::array();
    for (const auto& c : rep.grid) {
      Json row = to_json(c.record);
      row.erase("candidate");
      g.push_back(Json{{"descriptors", c.descriptors}, {"buffer", c.buffer}});
      g.back().update(row);
    }
    j["grid"] = std::move(g);
  }
  return j;
}

std::string timeline_csv(const SimResult& r) {
  std::string out = kTimelineHeader;
  out += '\n';
  for (const auto& s : r.timeline)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", s.t, s.throughput, s.loss_rate,
                       s.ddio_write_miss_rate, s.rx_llc_miss_rate, s.tx_llc_miss_rate,
                       s.dram_bandwidth, s.pcie_bandwidth, s.ddio_ways);
  return out;
}

std::string counters_csv(const SimResult& r) {
  std::string out =
      "t,arrivals,arrival_bytes,drops,tx_packets,tx_bytes,ddio_write_accesses,ddio_write_misses,"
      "rx_core_accesses,rx_core_misses,tx_core_accesses,tx_core_misses,pcie_bytes,dram_bytes,busy_ns\n";
  for (const auto& c : r.counter_samples)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.t, c.arrivals,
                       c.arrival_bytes, c.drops, c.tx_packets, c.tx_bytes, c.ddio_write_accesses,
                       c.ddio_write_misses, c.rx_core_accesses, c.rx_core_misses, c.tx_core_accesses,
                       c.tx_core_misses, c.pcie_bytes, c.dram_bytes, c.busy_ns);
  return out;
}

std::vector<MetricsSnapshot> snapshots_from_counters_csv(const std::string& csv, std::uint32_t cores) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<MetricsSnapshot> out;
  SimCounters prev;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> f;
    while (std::getline(row, cell, ',')) f.push_back(cell);
    if (f.size() != 15) throw std::invalid_argument("counters csv: expected 15 columns");
    auto u = [&](int i) { return std::stoull(f[i]); };
    SimCounters c;
    c.t = std::stod(f[0]);
    c.arrivals = u(1);
    c.arrival_bytes = u(2);
    c.drops = u(3);
    c.tx_packets = u(4);
    c.tx_bytes = u(5);
    c.ddio_write_accesses = u(6);
    c.ddio_write_misses = u(7);
    c.rx_core_accesses = u(8);
    c.rx_core_misses = u(9);
    c.tx_core_accesses = u(10);
    c.tx_core_misses = u(11);
    c.pcie_bytes = u(12);
    c.dram_bytes = u(13);
    c.busy_ns = std::stod(f[14]);
    out.push_back(snapshot(prev, c, c.t - prev.t, cores));
    prev = c;
  }
  return out;
}

std::string allocator_log_csv(std::span<const AdjustmentRecord> log) {
  std::string out = kAllocatorLogHeader;
  out += '\n';
  for (const auto& e : log)
    out += fmt::format("{},{},{},{}\n", e.t, to_string(e.state), to_string(e.action), e.ddio_ways);
  return out;
}

std::string sweep_csv(std::span<const SweepRecord> table) {
  std::string out = kSweepHeader;
  out += '\n';
  for (const auto& r : table) {
    if (!r.valid()) {
      out += fmt::format("{},,,,,,\n", r.candidate);
      continue;
    }
    out += fmt::format("{},{},{},{},{},{},{}\n", r.candidate, r.throughput, r.loss_rate,
                       r.ddio_write_miss_rate, r.rx_llc_miss_rate, r.tx_llc_miss_rate,
                       r.dram_bytes_per_second);
  }
  return out;
}

std::string packets_csv(std::span<const Packet> packets) {
  std::string out = "id,size,arrival_time\n";
  for (const auto& p : packets) out += fmt::format("{},{},{}\n", p.id, p.size, p.arrival_time);
  return out;
}

Json RunManifest::to_json() const {
  return {{"tool", tool},
          {"version", version},
          {"subcommand", subcommand},
          {"config_path", config_path},
          {"seed", seed},
          {"out_dir", out_dir},
          {"arguments", arguments},
          {"resolved_config", resolved_config},
          {"outputs", outputs}};
}

}  // namespace upfcache
