#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "upfcache/cache_model.hpp"
#include "upfcache/profiler.hpp"
#include "upfcache/rng.hpp"
#include "upfcache/traffic.hpp"

namespace upfcache {

struct TimingConfig {
  double llc_hit_ns = 16.0;
  double dram_access_ns = 80.0;
  double per_packet_proc_ns = 300.0;
  std::uint32_t poll_batch = 32;
  // Period of the LB's empty polls; an arrival is noticed at the next poll.
  double idle_poll_ns = 50.0;
};

struct PipelineConfig {
  std::uint32_t descriptor_count = 4096;
  std::uint32_t mbuf_ring_size = 262140;
  std::uint32_t mbuf_stride = 2048;
  std::uint32_t queue_capacity = 0;  // 0: same as mbuf_ring_size
  std::uint32_t lb_cores = 1;
  std::uint32_t worker_cores = 6;
  TimingConfig timing;
  PartitionPolicy partition;
  CacheGeometry geometry;

  // Per-packet lookups into the workers' private state (rule and session
  // tables); this is what competes with DDIO for the LLC.
  std::uint64_t working_set_bytes = 0;
  std::uint32_t working_set_accesses = 0;
  // Leading packet lines the worker rewrites (encapsulation headers).
  std::uint32_t header_lines = 1;
  // Each mbuf has a metadata header, kept in its own contiguous array, and a
  // data buffer of mbuf_stride bytes starting with headroom_lines of
  // headroom. The LB rewrites the header of the mbuf it takes from the ring
  // head and the worker touches it again on free; these are the CPU
  // accesses that make a cold head mbuf expensive.
  std::uint32_t mbuf_meta_lines = 2;
  std::uint32_t headroom_lines = 2;

  double interval_s = 0.01;
  double nic_line_rate_bps = 100e9;
  // Full recount of every mbuf's state every N events (0: off). The O(1)
  // per-event conservation check always runs.
  std::uint64_t audit_every = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::uint32_t effective_queue_capacity() const {
    return queue_capacity == 0 ? mbuf_ring_size : queue_capacity;
  }
  std::uint32_t lines_per_mbuf() const {
    return (mbuf_stride + geometry.line_bytes - 1) / geometry.line_bytes;
  }
  std::uint32_t data_offset_lines() const { return headroom_lines; }
  /// Packet-data lines available in one mbuf.
  std::uint32_t data_lines_per_mbuf() const { return lines_per_mbuf() - data_offset_lines(); }
};

enum class MbufState : std::uint8_t { FreeInRing, BoundToDescriptor, FilledPending, InQueue, InWorker };
inline constexpr std::size_t kMbufStates = 5;
std::string_view to_string(MbufState s);

/// Occupancy split used by the RX-buffer conservation law
///   mbuf_desc + mbuf_queue + mbuf_empty = RX_b.
struct RingOccupancy {
  std::uint64_t desc = 0;   // bound to a descriptor, awaiting a packet
  std::uint64_t queue = 0;  // filled, queued or being processed
  std::uint64_t empty = 0;  // free in the mbuf ring
};

class LlcCache;

/// Invoked at every profiling boundary. May resize the DDIO partition.
class SimController {
 public:
  virtual ~SimController() = default;
  virtual void on_interval(const MetricsSnapshot& snap, LlcCache& cache) = 0;
};

struct SimResult {
  double duration = 0.0;
  double throughput = 0.0;     // bits/s
  double offered_load = 0.0;   // bits/s
  double packet_loss_rate = 0.0;
  double ddio_write_miss_rate = 0.0;
  double rx_llc_miss_rate = 0.0;
  double tx_llc_miss_rate = 0.0;
  double dram_bytes_per_second = 0.0;
  double pcie_bytes_per_second = 0.0;
  double worker_utilization = 0.0;
  std::uint64_t mbuf_shortage_events = 0;
  std::uint64_t arrivals = 0;
  std::uint64_t transmitted = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t events = 0;
  std::uint32_t final_ddio_ways = 0;
  std::vector<MetricsSnapshot> timeline;
  // Cumulative counters at each interval boundary; timeline[i] is
  // snapshot(counter_samples[i-1], counter_samples[i]) with zeros before the first.
  std::vector<SimCounters> counter_samples;
};

/// The UPF data path: NIC -> descriptor ring -> LB thread -> queue ->
/// workers -> TX, over one LlcCache. The phase methods are the building
/// blocks of the event loop in run(); they are public so each phase can be
/// driven directly.
class Pipeline {
 public:
  Pipeline(const PipelineConfig& config, std::uint64_t seed);

  struct Receive {
    bool dropped = false;
    std::uint32_t hits = 0;
    std::uint32_t misses = 0;
  };
  /// DMA a packet into the mbuf behind the descriptor at the NIC head.
  Receive nic_receive(const Packet& p);

  enum class LbStatus : std::uint8_t { Idle, Shortage, QueueFull, Taken };
  struct LbTake {
    LbStatus status = LbStatus::Idle;
    std::uint32_t mbuf = 0;
    std::uint32_t size = 0;
    std::uint32_t misses = 0;
    std::uint32_t accesses = 0;
    double cost_ns = 0.0;
  };
  /// Read the packet at the LB tail and rebind its slot to the mbuf at the
  /// ring head. The packet is owned by the LB until lb_complete().
  LbTake lb_take();
  void lb_complete(const LbTake& t);

  struct LbPoll {
    std::uint32_t processed = 0;
    std::uint32_t misses = 0;
    bool shortage = false;
    double cost_ns = 0.0;
  };
  /// Synchronous batch: up to `batch` lb_take + lb_complete pairs.
  LbPoll lb_poll(std::uint32_t batch);

  struct WorkerJob {
    std::uint32_t mbuf = 0;
    std::uint32_t size = 0;
    std::uint32_t misses = 0;
    std::uint32_t accesses = 0;
    double cost_ns = 0.0;
  };
  /// Pop the queue head and do the processing accesses.
  std::optional<WorkerJob> worker_begin();
  struct Transmit {
    std::uint32_t tx_hits = 0;
    std::uint32_t tx_misses = 0;
  };
  /// TX reads, then return the mbuf to the ring tail.
  Transmit worker_finish(const WorkerJob& job);
  /// worker_begin + worker_finish.
  std::optional<Transmit> worker_step();

  /// Throws InvariantViolation when the mbuf states do not add up.
  void check_conservation() const;
  /// Recount every mbuf and descriptor from scratch and compare.
  void audit() const;

  RingOccupancy occupancy() const;
  std::uint64_t count(MbufState s) const { return state_count_[std::size_t(s)]; }
  MbufState state_of(std::uint32_t mbuf) const { return state_[mbuf]; }
  LineId mbuf_base_line(std::uint32_t mbuf) const { return LineId{mbuf} * lines_per_mbuf_; }
  LineId mbuf_data_line(std::uint32_t mbuf) const { return mbuf_base_line(mbuf) + data_offset_; }
  LineId mbuf_meta_line(std::uint32_t mbuf) const {
    return meta_base_ + LineId{mbuf} * cfg_.mbuf_meta_lines;
  }
  std::uint32_t slot_mbuf(std::uint32_t slot) const { return slot_mbuf_[slot]; }
  bool slot_filled(std::uint32_t slot) const { return slot_filled_[slot] != 0; }
  std::uint32_t filled_slots() const { return filled_; }
  std::uint32_t nic_head() const { return nic_head_; }
  std::uint32_t lb_tail() const { return lb_tail_; }
  std::size_t queue_length() const { return queue_.size(); }
  std::size_t free_mbufs() const { return free_count_; }
  std::uint32_t free_ring_head() const;

  const SimCounters& counters() const { return ctr_; }
  SimCounters& counters() { return ctr_; }
  LlcCache& cache() { return cache_; }
  const LlcCache& cache() const { return cache_; }
  const PipelineConfig& config() const { return cfg_; }
  std::uint64_t shortage_events() const { return shortage_events_; }
  std::uint64_t in_flight() const;

 private:
  struct Queued {
    std::uint32_t mbuf;
    std::uint32_t size;
  };

  void set_state(std::uint32_t mbuf, MbufState s);
  std::uint32_t lines_for(std::uint32_t bytes) const;
  double access_cost(bool hit) const;
  std::optional<std::uint32_t> pop_free();
  void push_free(std::uint32_t mbuf);

  PipelineConfig cfg_;
  LlcCache cache_;
  Rng rng_;
  std::uint32_t lines_per_mbuf_;
  std::uint32_t data_offset_;
  std::uint32_t data_lines_;
  std::uint32_t line_bytes_;
  LineId meta_base_ = 0;
  LineId ws_base_ = 0;
  std::uint64_t ws_lines_ = 0;

  std::vector<MbufState> state_;
  std::array<std::uint64_t, kMbufStates> state_count_{};

  // Descriptor ring.
  std::vector<std::uint32_t> slot_mbuf_;
  std::vector<std::uint8_t> slot_filled_;
  std::vector<std::uint32_t> slot_size_;
  std::uint32_t nic_head_ = 0;
  std::uint32_t lb_tail_ = 0;
  std::uint32_t filled_ = 0;

  // Mbuf ring: FIFO, allocate at head, return at tail.
  std::vector<std::uint32_t> ring_;
  std::size_t ring_head_ = 0;
  std::size_t free_count_ = 0;

  std::deque<Queued> queue_;
  std::uint32_t lb_held_ = 0;
  bool in_shortage_ = false;
  std::uint64_t shortage_events_ = 0;

  SimCounters ctr_;
};

/// Run the full event loop over the profile's packet stream.
SimResult run(const TrafficProfile& profile, const PipelineConfig& config,
              SimController* controller = nullptr);

/// Same loop over an explicit, time-ordered packet list. Packets at or after
/// `duration` are ignored.
SimResult run_trace(std::span<const Packet> packets, double duration, const PipelineConfig& config,
                    std::uint64_t seed = 1, SimController* controller = nullptr);

}  // namespace upfcache
