#include "upfcache/traffic.hpp"

#include <cmath>

#include "upfcache/errors.hpp"

namespace upfcache {

namespace {

void check_size(std::uint32_t bytes, const char* field) {
  if (bytes < 64 || bytes > 1500) throw ConfigError(field, "packet size must be in [64, 1500] bytes");
}

}  // namespace

SizeMixture TrafficProfile::default_mixture() {
  return SizeMixture{{{100, 0.45}, {1400, 0.275}, {1500, 0.275}}};
}

void TrafficProfile::validate() const {
  if (const auto* f = std::get_if<FixedSize>(&size_model)) {
    check_size(f->bytes, "traffic.packet_size");
  } else {
    const auto& mix = std::get<SizeMixture>(size_model);
    if (mix.entries.empty()) throw ConfigError("traffic.mixture", "must not be empty");
    double total = 0.0;
    for (const auto& [bytes, weight] : mix.entries) {
      check_size(bytes, "traffic.mixture");
      if (!(weight >= 0.0)) throw ConfigError("traffic.mixture", "weights must be non-negative");
      total += weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("traffic.mixture", "weights must sum to 1");
  }
  if (!(offered_rate > 0.0) || !std::isfinite(offered_rate))
    throw ConfigError("traffic.offered_rate", "must be positive");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ConfigError("traffic.duration", "must be positive");
  if (burst) {
    if (!(burst->on_seconds > 0.0)) throw ConfigError("traffic.burst.on_seconds", "must be positive");
    if (!(burst->off_seconds >= 0.0))
      throw ConfigError("traffic.burst.off_seconds", "must be non-negative");
    if (!(burst->burst_multiplier > 0.0))
      throw ConfigError("traffic.burst.burst_multiplier", "must be positive");
  }
}

double TrafficProfile::mean_rate() const {
  if (!burst) return offered_rate;
  const double period = burst->on_seconds + burst->off_seconds;
  return offered_rate * burst->burst_multiplier * burst->on_seconds / period;
}

double TrafficProfile::mean_packet_bytes() const {
  if (const auto* f = std::get_if<FixedSize>(&size_model)) return f->bytes;
  double m = 0.0;
  for (const auto& [bytes, weight] : std::get<SizeMixture>(size_model).entries) m += bytes * weight;
  return m;
}

TrafficGenerator::TrafficGenerator(TrafficProfile profile)
    : profile_(std::move(profile)), rng_(profile_.seed) {
  profile_.validate();
  if (const auto* mix = std::get_if<SizeMixture>(&profile_.size_model)) {
    double acc = 0.0;
    for (const auto& e : mix->entries) cumulative_.push_back(acc += e.second);
  }
  rate_ = profile_.offered_rate * (profile_.burst ? profile_.burst->burst_multiplier : 1.0);
}

double TrafficGenerator::to_wall_time(double on_time) const {
  if (!profile_.burst) return on_time;
  const double on = profile_.burst->on_seconds;
  const double period = on + profile_.burst->off_seconds;
  const double cycles = std::floor(on_time / on);
  return cycles * period + (on_time - cycles * on);
}

std::uint32_t TrafficGenerator::draw_size() {
  if (const auto* f = std::get_if<FixedSize>(&profile_.size_model)) return f->bytes;
  const auto& entries = std::get<SizeMixture>(profile_.size_model).entries;
  const double u = rng_.uniform() * cumulative_.back();
  for (std::size_t i = 0; i < cumulative_.size(); ++i)
    if (u < cumulative_[i]) return entries[i].first;
  return entries.back().first;
}

std::optional<Packet> TrafficGenerator::next() {
  on_time_ += rng_.exponential(rate_);
  double t = to_wall_time(on_time_);
  if (t <= last_arrival_) t = std::nextafter(last_arrival_, INFINITY);
  if (t >= profile_.duration) return std::nullopt;
  last_arrival_ = t;
  return Packet{next_id_++, draw_size(), t};
}

std::vector<Packet> generate(const TrafficProfile& profile) {
  TrafficGenerator gen(profile);
  std::vector<Packet> out;
  out.reserve(std::size_t(profile.mean_rate() * profile.duration * 1.05) + 16);
  while (auto p = gen.next()) out.push_back(*p);
  return out;
}

}  // namespace upfcache
