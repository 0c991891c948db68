#pragma once

#include <cstdint>

namespace upfcache::analytic {

// Balls-into-bins view of DMA leakage: N packet cache lines are written into
// M DDIO-cache lines uniformly at random; every ball landing in an occupied
// bin is one leaked (evicted-before-read) line.

struct Footprint {
  std::uint64_t descriptor_count = 4096;
  std::uint64_t packet_bytes = 1500;
  std::uint64_t line_bytes = 64;
  std::uint64_t mbuf_stride_bytes = 2048;
};

struct LeakageParams {
  std::uint64_t n_balls = 0;
  std::uint64_t m_bins = 1;
  Footprint footprint;

  /// N from the footprint, M = ddio_bytes / line_bytes.
  static LeakageParams from_footprint(const Footprint& fp, std::uint64_t ddio_bytes);
};

/// E[Y] = N - M + M (1 - 1/M)^N. Throws std::invalid_argument for m = 0.
double expected_leakage(std::uint64_t n, std::uint64_t m);

/// E[Y] / N. Throws std::invalid_argument for n = 0 or m = 0.
double leakage_ratio(std::uint64_t n, std::uint64_t m);

/// Expected fraction of empty bins, (1 - 1/M)^N.
double empty_bin_fraction(std::uint64_t n, std::uint64_t m);

/// Tail bound on the empty-bin count: 2e sqrt(M) exp(-M eps^2 / (3 p')).
/// Values above 1 are returned unchanged.
double concentration_bound(std::uint64_t m, double epsilon, double p_prime);

/// N = descriptors * ceil(packet_bytes / line_bytes).
std::uint64_t descriptor_footprint(std::uint64_t descriptors, std::uint64_t packet_bytes,
                                   std::uint64_t line_bytes);

struct MonteCarloResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  // Empty-bin counts per trial are not kept; tail_count tallies trials with
  // |Y - E[Y]| >= tail_threshold when a threshold was requested.
  std::uint64_t tail_count = 0;
  std::uint64_t trials = 0;
};

/// Throws N balls into M bins `trials` times. Deterministic for a seed.
MonteCarloResult monte_carlo_leakage(std::uint64_t n, std::uint64_t m, std::uint64_t trials,
                                     std::uint64_t seed, double tail_threshold = -1.0);

}  // namespace upfcache::analytic
