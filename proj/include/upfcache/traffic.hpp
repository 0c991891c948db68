#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "upfcache/rng.hpp"

namespace upfcache {

struct FixedSize {
  std::uint32_t bytes = 1500;
};

struct SizeMixture {
  std::vector<std::pair<std::uint32_t, double>> entries;  // (bytes, weight)
};

using SizeModel = std::variant<FixedSize, SizeMixture>;

/// Arrivals only inside on-periods, at burst_multiplier times the offered
/// rate; off-periods are silent.
struct OnOffBurst {
  double on_seconds = 0.0;
  double off_seconds = 0.0;
  double burst_multiplier = 1.0;
};

struct TrafficProfile {
  SizeModel size_model = FixedSize{};
  double offered_rate = 1e6;  // packets/s
  std::optional<OnOffBurst> burst;
  double duration = 0.01;  // s
  std::uint64_t seed = 1;

  void validate() const;
  /// Long-run arrival rate implied by the rate and burst settings.
  double mean_rate() const;
  double mean_packet_bytes() const;

  /// Stand-in for the bimodal production trace: mostly small control/voice
  /// packets or near-MTU bulk data.
  static SizeMixture default_mixture();
};

struct Packet {
  std::uint64_t id = 0;
  std::uint32_t size = 0;
  double arrival_time = 0.0;  // s

  bool operator==(const Packet&) const = default;
};

/// Sequential generator over a validated profile.
class TrafficGenerator {
 public:
  explicit TrafficGenerator(TrafficProfile profile);

  std::optional<Packet> next();

 private:
  std::uint32_t draw_size();
  double to_wall_time(double on_time) const;

  TrafficProfile profile_;
  Rng rng_;
  std::vector<double> cumulative_;
  double on_time_ = 0.0;
  double last_arrival_ = -1.0;
  double rate_ = 0.0;
  std::uint64_t next_id_ = 0;
};

std::vector<Packet> generate(const TrafficProfile& profile);

}  // namespace upfcache
