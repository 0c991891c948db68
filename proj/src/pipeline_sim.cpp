#include "upfcache/pipeline_sim.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <functional>
#include <queue>
#include <string>

#include "upfcache/errors.hpp"

namespace upfcache {

std::string_view to_string(MbufState s) {
  switch (s) {
    case MbufState::FreeInRing: return "FreeInRing";
    case MbufState::BoundToDescriptor: return "BoundToDescriptor";
    case MbufState::FilledPending: return "FilledPending";
    case MbufState::InQueue: return "InQueue";
    case MbufState::InWorker: return "InWorker";
  }
  return "?";
}

void PipelineConfig::validate() const {
  geometry.validate();
  partition.validate(geometry);
  if (descriptor_count < 1) throw ConfigError("pipeline.descriptor_count", "must be >= 1");
  if (mbuf_ring_size < std::uint64_t{descriptor_count} + 1)
    throw ConfigError("pipeline.mbuf_ring_size",
                      "must be >= descriptor_count + 1 (got " + std::to_string(mbuf_ring_size) +
                          " with " + std::to_string(descriptor_count) + " descriptors)");
  if (mbuf_stride < geometry.line_bytes)
    throw ConfigError("pipeline.mbuf_stride", "must be at least one cache line");
  if (lb_cores != 1) throw ConfigError("pipeline.lb_cores", "exactly one RX/LB thread is modeled");
  if (worker_cores < 1) throw ConfigError("pipeline.worker_cores", "must be >= 1");
  if (timing.poll_batch < 1) throw ConfigError("pipeline.timing.poll_batch", "must be >= 1");
  if (!(timing.llc_hit_ns >= 0.0)) throw ConfigError("pipeline.timing.llc_hit_ns", "must be >= 0");
  if (!(timing.dram_access_ns >= timing.llc_hit_ns))
    throw ConfigError("pipeline.timing.dram_access_ns", "must be >= llc_hit_ns");
  if (!(timing.per_packet_proc_ns >= 0.0))
    throw ConfigError("pipeline.timing.per_packet_proc_ns", "must be >= 0");
  if (!(timing.idle_poll_ns >= 0.0)) throw ConfigError("pipeline.timing.idle_poll_ns", "must be >= 0");
  if (working_set_accesses > 0 && working_set_bytes < geometry.line_bytes)
    throw ConfigError("pipeline.working_set_bytes", "must hold at least one line when accessed");
  if (data_offset_lines() >= lines_per_mbuf())
    throw ConfigError("pipeline.mbuf_stride", "no room for packet data after metadata and headroom");
  if (header_lines > data_lines_per_mbuf())
    throw ConfigError("pipeline.header_lines", "exceeds data lines per mbuf");
  if (!(interval_s > 0.0)) throw ConfigError("profiler.interval_s", "must be positive");
  if (!(nic_line_rate_bps > 0.0)) throw ConfigError("pipeline.nic_line_rate_bps", "must be positive");
}

Pipeline::Pipeline(const PipelineConfig& config, std::uint64_t seed)
    : cfg_(config),
      cache_((config.validate(), config.geometry), config.partition,
             std::uint64_t{config.mbuf_ring_size} *
                     (config.lines_per_mbuf() + config.mbuf_meta_lines) +
                 config.working_set_bytes / config.geometry.line_bytes),
      rng_(seed * 0x9E3779B97F4A7C15ull + 0x5851F42D4C957F2Dull),
      lines_per_mbuf_(config.lines_per_mbuf()),
      data_offset_(config.data_offset_lines()),
      data_lines_(config.data_lines_per_mbuf()),
      line_bytes_(config.geometry.line_bytes) {
  const std::uint32_t rxb = cfg_.mbuf_ring_size;
  const std::uint32_t d = cfg_.descriptor_count;
  meta_base_ = LineId{rxb} * lines_per_mbuf_;
  ws_base_ = meta_base_ + LineId{rxb} * cfg_.mbuf_meta_lines;
  ws_lines_ = cfg_.working_set_bytes / line_bytes_;

  state_.assign(rxb, MbufState::FreeInRing);
  state_count_[std::size_t(MbufState::FreeInRing)] = rxb;
  slot_mbuf_.resize(d);
  slot_filled_.assign(d, 0);
  slot_size_.assign(d, 0);
  for (std::uint32_t i = 0; i < d; ++i) {
    slot_mbuf_[i] = i;
    set_state(i, MbufState::BoundToDescriptor);
  }
  ring_.resize(rxb);
  for (std::uint32_t m = d; m < rxb; ++m) ring_[free_count_++] = m;

  // Pool initialisation writes every header once, in index order.
  for (std::uint32_t m = 0; m < rxb; ++m)
    for (std::uint32_t i = 0; i < cfg_.mbuf_meta_lines; ++i)
      cache_.access(mbuf_meta_line(m) + i, AccessKind::CoreWrite, true);
  cache_.reset_stats();
}

void Pipeline::set_state(std::uint32_t mbuf, MbufState s) {
  --state_count_[std::size_t(state_[mbuf])];
  ++state_count_[std::size_t(s)];
  state_[mbuf] = s;
}

std::uint32_t Pipeline::lines_for(std::uint32_t bytes) const {
  return std::min((bytes + line_bytes_ - 1) / line_bytes_, data_lines_);
}

double Pipeline::access_cost(bool hit) const {
  return hit ? cfg_.timing.llc_hit_ns : cfg_.timing.dram_access_ns;
}

std::optional<std::uint32_t> Pipeline::pop_free() {
  if (free_count_ == 0) return std::nullopt;
  const std::uint32_t m = ring_[ring_head_];
  ring_head_ = (ring_head_ + 1) % ring_.size();
  --free_count_;
  return m;
}

void Pipeline::push_free(std::uint32_t mbuf) {
  ring_[(ring_head_ + free_count_) % ring_.size()] = mbuf;
  ++free_count_;
}

std::uint32_t Pipeline::free_ring_head() const { return ring_[ring_head_]; }

Pipeline::Receive Pipeline::nic_receive(const Packet& p) {
  ++ctr_.arrivals;
  ctr_.arrival_bytes += p.size;
  Receive r;
  const std::uint32_t slot = nic_head_;
  if (slot_filled_[slot]) {
    ++ctr_.drops;
    r.dropped = true;
    return r;
  }
  const std::uint32_t m = slot_mbuf_[slot];
  const LineId base = mbuf_data_line(m);
  const std::uint32_t n = lines_for(p.size);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (cache_.access(base + i, AccessKind::DdioWrite, true).hit)
      ++r.hits;
    else
      ++r.misses;
  }
  ctr_.ddio_write_accesses += n;
  ctr_.ddio_write_misses += r.misses;
  ctr_.pcie_bytes += p.size;
  slot_filled_[slot] = 1;
  slot_size_[slot] = p.size;
  ++filled_;
  nic_head_ = (nic_head_ + 1) % cfg_.descriptor_count;
  set_state(m, MbufState::FilledPending);
  return r;
}

Pipeline::LbTake Pipeline::lb_take() {
  LbTake t;
  const std::uint32_t slot = lb_tail_;
  if (filled_ == 0 || !slot_filled_[slot]) return t;
  if (queue_.size() + lb_held_ >= cfg_.effective_queue_capacity()) {
    t.status = LbStatus::QueueFull;
    return t;
  }
  const auto fresh = pop_free();
  if (!fresh) {
    if (!in_shortage_) {
      ++shortage_events_;
      in_shortage_ = true;
    }
    t.status = LbStatus::Shortage;
    return t;
  }
  in_shortage_ = false;

  t.status = LbStatus::Taken;
  t.mbuf = slot_mbuf_[slot];
  t.size = slot_size_[slot];
  const LineId base = mbuf_data_line(t.mbuf);
  const std::uint32_t n = lines_for(t.size);
  for (std::uint32_t i = 0; i < n; ++i) {
    const bool hit = cache_.access(base + i, AccessKind::CoreRead, false).hit;
    if (!hit) ++t.misses;
    t.cost_ns += access_cost(hit);
  }
  // Re-initialise the replacement mbuf's metadata.
  const LineId meta = mbuf_meta_line(*fresh);
  for (std::uint32_t i = 0; i < cfg_.mbuf_meta_lines; ++i) {
    const bool hit = cache_.access(meta + i, AccessKind::CoreWrite, true).hit;
    if (!hit) ++t.misses;
    t.cost_ns += access_cost(hit);
  }
  t.accesses = n + cfg_.mbuf_meta_lines;
  ctr_.rx_core_accesses += t.accesses;
  ctr_.rx_core_misses += t.misses;

  slot_mbuf_[slot] = *fresh;
  set_state(*fresh, MbufState::BoundToDescriptor);
  slot_filled_[slot] = 0;
  --filled_;
  lb_tail_ = (lb_tail_ + 1) % cfg_.descriptor_count;
  ++lb_held_;
  return t;
}

void Pipeline::lb_complete(const LbTake& t) {
  if (t.status != LbStatus::Taken || lb_held_ == 0)
    throw InvariantViolation("lb_complete without a taken packet");
  --lb_held_;
  queue_.push_back(Queued{t.mbuf, t.size});
  set_state(t.mbuf, MbufState::InQueue);
}

Pipeline::LbPoll Pipeline::lb_poll(std::uint32_t batch) {
  LbPoll r;
  for (std::uint32_t i = 0; i < batch; ++i) {
    const LbTake t = lb_take();
    if (t.status == LbStatus::Shortage) r.shortage = true;
    if (t.status != LbStatus::Taken) break;
    lb_complete(t);
    ++r.processed;
    r.misses += t.misses;
    r.cost_ns += t.cost_ns;
  }
  return r;
}

std::optional<Pipeline::WorkerJob> Pipeline::worker_begin() {
  if (queue_.empty()) return std::nullopt;
  const Queued q = queue_.front();
  queue_.pop_front();
  set_state(q.mbuf, MbufState::InWorker);

  WorkerJob job;
  job.mbuf = q.mbuf;
  job.size = q.size;
  job.cost_ns = cfg_.timing.per_packet_proc_ns;
  const LineId base = mbuf_data_line(q.mbuf);
  const std::uint32_t n = lines_for(q.size);
  for (std::uint32_t i = 0; i < n; ++i) {
    const bool write = i < cfg_.header_lines;
    const bool hit =
        cache_.access(base + i, write ? AccessKind::CoreWrite : AccessKind::CoreRead, write).hit;
    if (!hit) ++job.misses;
    job.cost_ns += access_cost(hit);
  }
  for (std::uint32_t k = 0; k < cfg_.working_set_accesses; ++k) {
    const bool hit = cache_.access(ws_base_ + rng_.below(ws_lines_), AccessKind::CoreRead, false).hit;
    if (!hit) ++job.misses;
    job.cost_ns += access_cost(hit);
  }
  // Metadata update on free (reference count, next pointer).
  const LineId meta = mbuf_meta_line(q.mbuf);
  for (std::uint32_t i = 0; i < cfg_.mbuf_meta_lines; ++i) {
    const bool hit = cache_.access(meta + i, AccessKind::CoreWrite, true).hit;
    if (!hit) ++job.misses;
    job.cost_ns += access_cost(hit);
  }
  job.accesses = n + cfg_.working_set_accesses + cfg_.mbuf_meta_lines;
  ctr_.tx_core_accesses += job.accesses;
  ctr_.tx_core_misses += job.misses;
  return job;
}

Pipeline::Transmit Pipeline::worker_finish(const WorkerJob& job) {
  if (state_[job.mbuf] != MbufState::InWorker)
    throw InvariantViolation("worker_finish on mbuf not held by a worker");
  Transmit tx;
  const LineId base = mbuf_data_line(job.mbuf);
  const std::uint32_t n = lines_for(job.size);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (cache_.access(base + i, AccessKind::DdioRead, false).hit)
      ++tx.tx_hits;
    else
      ++tx.tx_misses;
  }
  ctr_.pcie_bytes += job.size;
  ++ctr_.tx_packets;
  ctr_.tx_bytes += job.size;
  push_free(job.mbuf);
  set_state(job.mbuf, MbufState::FreeInRing);
  return tx;
}

std::optional<Pipeline::Transmit> Pipeline::worker_step() {
  auto job = worker_begin();
  if (!job) return std::nullopt;
  return worker_finish(*job);
}

RingOccupancy Pipeline::occupancy() const {
  RingOccupancy o;
  o.desc = count(MbufState::BoundToDescriptor);
  o.queue = count(MbufState::FilledPending) + count(MbufState::InQueue) + count(MbufState::InWorker);
  o.empty = count(MbufState::FreeInRing);
  return o;
}

std::uint64_t Pipeline::in_flight() const { return occupancy().queue; }

void Pipeline::check_conservation() const {
  const RingOccupancy o = occupancy();
  if (o.desc + o.queue + o.empty != cfg_.mbuf_ring_size)
    throw InvariantViolation("RX buffer conservation broken: desc " + std::to_string(o.desc) +
                             " + queue " + std::to_string(o.queue) + " + empty " +
                             std::to_string(o.empty) + " != " + std::to_string(cfg_.mbuf_ring_size));
  if (o.empty != free_count_) throw InvariantViolation("free ring count disagrees with mbuf states");
  if (o.desc + filled_ != cfg_.descriptor_count)
    throw InvariantViolation("descriptor slots disagree with bound mbufs");
  if (ctr_.arrivals != ctr_.tx_packets + ctr_.drops + o.queue)
    throw InvariantViolation("packet accounting broken: arrivals " + std::to_string(ctr_.arrivals) +
                             " != tx " + std::to_string(ctr_.tx_packets) + " + dropped " +
                             std::to_string(ctr_.drops) + " + in flight " + std::to_string(o.queue));
}

void Pipeline::audit() const {
  std::array<std::uint64_t, kMbufStates> recount{};
  for (const MbufState s : state_) ++recount[std::size_t(s)];
  if (recount != state_count_) throw InvariantViolation("mbuf state counters drifted");

  std::vector<std::uint8_t> seen(state_.size(), 0);
  for (std::uint32_t s = 0; s < cfg_.descriptor_count; ++s) {
    const std::uint32_t m = slot_mbuf_[s];
    if (seen[m]++) throw InvariantViolation("mbuf bound to two descriptor slots");
    const MbufState want = slot_filled_[s] ? MbufState::FilledPending : MbufState::BoundToDescriptor;
    if (state_[m] != want) throw InvariantViolation("descriptor slot state mismatch");
  }
  for (std::size_t i = 0; i < free_count_; ++i) {
    const std::uint32_t m = ring_[(ring_head_ + i) % ring_.size()];
    if (seen[m]++ || state_[m] != MbufState::FreeInRing)
      throw InvariantViolation("mbuf ring holds a non-free mbuf");
  }
  for (const Queued& q : queue_)
    if (seen[q.mbuf]++ || state_[q.mbuf] != MbufState::InQueue)
      throw InvariantViolation("queue holds an mbuf in the wrong state");
  check_conservation();
}

// ---------------------------------------------------------------------------
// Event loop
// ---------------------------------------------------------------------------

namespace {

using PacketSource = std::function<std::optional<Packet>()>;

enum class Ev : std::uint8_t { Arrival, LbWake, LbDone, WorkerDone, Interval };

struct Event {
  double t;  // ns
  std::uint64_t seq;
  Ev kind;
  std::uint32_t arg;

  bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

class EventLoop {
 public:
  EventLoop(PacketSource source, double duration_s, const PipelineConfig& cfg,
            std::uint64_t seed, SimController* controller)
      : source_(std::move(source)),
        pipe_(cfg, seed),
        cfg_(cfg),
        controller_(controller),
        end_ns_(duration_s * 1e9),
        duration_s_(duration_s),
        workers_(cfg.worker_cores) {}

  SimResult run() {
    schedule_next_arrival();
    push(0.0, Ev::LbWake);
    push(cfg_.interval_s * 1e9, Ev::Interval);
    lb_wake_pending_ = true;

    while (!events_.empty() && events_.top().t <= end_ns_) {
      const Event e = events_.top();
      events_.pop();
      now_ = e.t;
      dispatch(e);
      ++n_events_;
      pipe_.check_conservation();
      if (cfg_.audit_every && n_events_ % cfg_.audit_every == 0) pipe_.audit();
    }
    pipe_.audit();
    return finish();
  }

 private:
  enum class Lb : std::uint8_t { Idle, Busy, Stalled };

  void push(double t, Ev k, std::uint32_t arg = 0) { events_.push(Event{t, seq_++, k, arg}); }

  void schedule_next_arrival() {
    if (auto p = source_()) {
      if (p->arrival_time * 1e9 < now_) throw InvariantViolation("packet stream not ordered by time");
      next_packet_ = *p;
      push(p->arrival_time * 1e9, Ev::Arrival);
    }
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case Ev::Arrival: on_arrival(); break;
      case Ev::LbWake:
        lb_wake_pending_ = false;
        lb_poll();
        break;
      case Ev::LbDone: on_lb_done(); break;
      case Ev::WorkerDone: on_worker_done(e.arg); break;
      case Ev::Interval: on_interval(); break;
    }
  }

  void on_arrival() {
    pipe_.nic_receive(next_packet_);
    if (lb_ == Lb::Idle && !lb_wake_pending_) {
      const double period = cfg_.timing.idle_poll_ns;
      double wake = now_;
      if (period > 0.0) wake = lb_idle_since_ + std::ceil((now_ - lb_idle_since_) / period) * period;
      lb_wake_pending_ = true;
      push(std::max(wake, now_), Ev::LbWake);
    }
    schedule_next_arrival();
  }

  void lb_poll() {
    batch_left_ = std::min(cfg_.timing.poll_batch, pipe_.filled_slots());
    if (batch_left_ == 0) {
      lb_ = Lb::Idle;
      lb_idle_since_ = now_;
      return;
    }
    lb_next();
  }

  void lb_next() {
    current_ = pipe_.lb_take();
    switch (current_.status) {
      case Pipeline::LbStatus::Taken:
        lb_ = Lb::Busy;
        busy_ns_ += current_.cost_ns;
        push(now_ + current_.cost_ns, Ev::LbDone);
        break;
      case Pipeline::LbStatus::Shortage:
      case Pipeline::LbStatus::QueueFull: lb_ = Lb::Stalled; break;
      case Pipeline::LbStatus::Idle:
        lb_ = Lb::Idle;
        lb_idle_since_ = now_;
        break;
    }
  }

  void on_lb_done() {
    pipe_.lb_complete(current_);
    dispatch_workers();
    if (--batch_left_ > 0)
      lb_next();
    else
      lb_poll();
  }

  void dispatch_workers() {
    const std::size_t n = workers_.size();
    while (pipe_.queue_length() > 0) {
      std::size_t w = n;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t cand = (rr_ + k) % n;
        if (!workers_[cand]) {
          w = cand;
          break;
        }
      }
      if (w == n) return;
      rr_ = (w + 1) % n;
      workers_[w] = pipe_.worker_begin();
      busy_ns_ += workers_[w]->cost_ns;
      worker_busy_ns_ += workers_[w]->cost_ns;
      push(now_ + workers_[w]->cost_ns, Ev::WorkerDone, std::uint32_t(w));
    }
  }

  void on_worker_done(std::uint32_t w) {
    pipe_.worker_finish(*workers_[w]);
    workers_[w].reset();
    dispatch_workers();
    if (lb_ == Lb::Stalled) lb_poll();
  }

  SimCounters current_counters() {
    SimCounters c = pipe_.counters();
    c.t = now_ * 1e-9;
    c.dram_bytes = pipe_.cache().stats().dram_bytes_total;
    c.busy_ns = busy_ns_;
    return c;
  }

  void on_interval() {
    const SimCounters cur = current_counters();
    MetricsSnapshot s = snapshot(prev_, cur, cur.t - prev_.t, 1 + cfg_.worker_cores);
    s.ddio_ways = pipe_.cache().partition().ddio_ways;
    if (controller_) {
      controller_->on_interval(s, pipe_.cache());
      s.ddio_ways = pipe_.cache().partition().ddio_ways;
    }
    timeline_.push_back(s);
    samples_.push_back(cur);
    prev_ = cur;
    const double next = now_ + cfg_.interval_s * 1e9;
    if (next <= end_ns_ * (1.0 + 1e-12)) push(std::min(next, end_ns_), Ev::Interval);
  }

  SimResult finish() {
    const SimCounters c = current_counters();
    const auto& st = pipe_.cache().stats();
    SimResult r;
    r.duration = duration_s_;
    r.arrivals = c.arrivals;
    r.transmitted = c.tx_packets;
    r.dropped = c.drops;
    r.in_flight = pipe_.in_flight();
    r.events = n_events_;
    if (r.arrivals != r.transmitted + r.dropped + r.in_flight)
      throw InvariantViolation("final packet accounting broken");
    r.throughput = 8.0 * double(c.tx_bytes) / duration_s_;
    r.offered_load = 8.0 * double(c.arrival_bytes) / duration_s_;
    r.packet_loss_rate = c.arrivals ? double(c.drops) / double(c.arrivals) : 0.0;
    auto rate = [](std::uint64_t a, std::uint64_t b) { return b ? double(a) / double(b) : 0.0; };
    r.ddio_write_miss_rate = rate(c.ddio_write_misses, c.ddio_write_accesses);
    r.rx_llc_miss_rate = rate(c.rx_core_misses, c.rx_core_accesses);
    r.tx_llc_miss_rate = rate(c.tx_core_misses, c.tx_core_accesses);
    r.dram_bytes_per_second = double(st.dram_bytes_total) / duration_s_;
    r.pcie_bytes_per_second = double(c.pcie_bytes) / duration_s_;
    r.worker_utilization =
        std::min(1.0, worker_busy_ns_ / (double(cfg_.worker_cores) * duration_s_ * 1e9));
    r.mbuf_shortage_events = pipe_.shortage_events();
    r.final_ddio_ways = pipe_.cache().partition().ddio_ways;
    r.timeline = std::move(timeline_);
    r.counter_samples = std::move(samples_);
    if (r.throughput > r.offered_load) throw InvariantViolation("throughput exceeds offered load");
    return r;
  }

  PacketSource source_;
  Pipeline pipe_;
  PipelineConfig cfg_;
  SimController* controller_;
  double end_ns_;
  double duration_s_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  std::uint64_t n_events_ = 0;
  double now_ = 0.0;

  Packet next_packet_;
  Lb lb_ = Lb::Idle;
  bool lb_wake_pending_ = false;
  double lb_idle_since_ = 0.0;
  std::uint32_t batch_left_ = 0;
  Pipeline::LbTake current_;

  std::vector<std::optional<Pipeline::WorkerJob>> workers_;
  std::size_t rr_ = 0;
  double busy_ns_ = 0.0;
  double worker_busy_ns_ = 0.0;

  SimCounters prev_;
  std::vector<MetricsSnapshot> timeline_;
  std::vector<SimCounters> samples_;
};

}  // namespace

SimResult run(const TrafficProfile& profile, const PipelineConfig& config,
              SimController* controller) {
  profile.validate();
  config.validate();
  auto gen = std::make_shared<TrafficGenerator>(profile);
  EventLoop loop([gen] { return gen->next(); }, profile.duration, config, profile.seed, controller);
  return loop.run();
}

SimResult run_trace(std::span<const Packet> packets, double duration, const PipelineConfig& config,
                    std::uint64_t seed, SimController* controller) {
  config.validate();
  if (!(duration > 0.0)) throw ConfigError("traffic.duration", "must be positive");
  std::size_t next = 0;
  EventLoop loop(
      [packets, next, duration]() mutable -> std::optional<Packet> {
        if (next >= packets.size() || packets[next].arrival_time >= duration) return std::nullopt;
        return packets[next++];
      },
      duration, config, seed, controller);
  return loop.run();
}

}  // namespace upfcache
