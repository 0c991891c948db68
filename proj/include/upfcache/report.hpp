#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "upfcache/allocator.hpp"
#include "upfcache/configurator.hpp"
#include "upfcache/pipeline_sim.hpp"
#include "upfcache/traffic.hpp"

namespace upfcache {

using Json = nlohmann::ordered_json;

/// Everything one config file describes.
struct ExperimentConfig {
  PipelineConfig pipeline;
  TrafficProfile traffic;
  AllocatorConfig allocator;
  SearchSpace search;
  std::uint32_t repetitions = 1;
  bool grid_search = false;

  void validate() const;
};

/// Parse a config document. Missing keys keep their defaults; unknown keys
/// and wrong types throw ConfigError naming the dotted field path. A run
/// manifest is accepted too, in which case its resolved config is used.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::string& path);
Json to_json(const ExperimentConfig& cfg);

Json to_json(const SimResult& r);
Json to_json(const SweepRecord& r);
Json to_json(const Selection& s);
Json to_json(const SearchReport& rep);

inline constexpr const char* kTimelineHeader =
    "t,throughput_bps,loss_rate,ddio_write_miss_rate,rx_llc_miss_rate,tx_llc_miss_rate,dram_Bps,pcie_Bps,ddio_ways";
inline constexpr const char* kSweepHeader =
    "candidate,throughput_bps,loss_rate,ddio_write_miss_rate,rx_llc_miss,tx_llc_miss,dram_Bps";
inline constexpr const char* kAllocatorLogHeader = "t,state,action,ddio_ways";

std::string timeline_csv(const SimResult& r);
std::string counters_csv(const SimResult& r);
std::string allocator_log_csv(std::span<const AdjustmentRecord> log);
std::string sweep_csv(std::span<const SweepRecord> table);
std::string packets_csv(std::span<const Packet> packets);

/// Rebuild the per-interval snapshots from counters_csv() output. Used to
/// cross-check the timeline; ddio_ways is not part of the counters and
/// stays 0.
std::vector<MetricsSnapshot> snapshots_from_counters_csv(const std::string& csv, std::uint32_t cores);

struct RunManifest {
  std::string tool = "upfcachesim";
  std::string version;
  std::string subcommand;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  Json arguments = Json::object();
  Json resolved_config = Json::object();
  std::vector<std::string> outputs;

  Json to_json() const;
};

}  // namespace upfcache
