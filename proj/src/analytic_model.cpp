#include "upfcache/analytic_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "upfcache/rng.hpp"

namespace upfcache::analytic {

LeakageParams LeakageParams::from_footprint(const Footprint& fp, std::uint64_t ddio_bytes) {
  if (fp.line_bytes == 0 || ddio_bytes < fp.line_bytes)
    throw std::invalid_argument("from_footprint: ddio cache smaller than one line");
  LeakageParams p;
  p.footprint = fp;
  p.n_balls = descriptor_footprint(fp.descriptor_count, fp.packet_bytes, fp.line_bytes);
  p.m_bins = ddio_bytes / fp.line_bytes;
  return p;
}

double empty_bin_fraction(std::uint64_t n, std::uint64_t m) {
  if (m == 0) throw std::invalid_argument("empty_bin_fraction: m must be >= 1");
  if (n == 0) return 1.0;
  if (m == 1) return 0.0;
  return std::exp(double(n) * std::log1p(-1.0 / double(m)));
}

double expected_leakage(std::uint64_t n, std::uint64_t m) {
  if (m == 0) throw std::invalid_argument("expected_leakage: m must be >= 1");
  if (n <= 1) return 0.0;
  const double nn = double(n), mm = double(m);
  const double y = nn - mm + mm * empty_bin_fraction(n, m);
  return std::max({y, nn - mm, 0.0});
}

double leakage_ratio(std::uint64_t n, std::uint64_t m) {
  if (n == 0) throw std::invalid_argument("leakage_ratio: undefined for n = 0");
  return expected_leakage(n, m) / double(n);
}

double concentration_bound(std::uint64_t m, double epsilon, double p_prime) {
  if (m == 0) throw std::invalid_argument("concentration_bound: m must be >= 1");
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw std::invalid_argument("concentration_bound: epsilon must be in (0, 1)");
  if (!(p_prime > 0.0) || p_prime > 1.0)
    throw std::invalid_argument("concentration_bound: p_prime must be in (0, 1]");
  const double mm = double(m);
  return 2.0 * std::numbers::e * std::sqrt(mm) * std::exp(-mm * epsilon * epsilon / (3.0 * p_prime));
}

std::uint64_t descriptor_footprint(std::uint64_t descriptors, std::uint64_t packet_bytes,
                                   std::uint64_t line_bytes) {
  if (descriptors == 0 || packet_bytes == 0 || line_bytes == 0)
    throw std::invalid_argument("descriptor_footprint: arguments must be positive");
  return descriptors * ((packet_bytes + line_bytes - 1) / line_bytes);
}

MonteCarloResult monte_carlo_leakage(std::uint64_t n, std::uint64_t m, std::uint64_t trials,
                                     std::uint64_t seed, double tail_threshold) {
  if (m == 0) throw std::invalid_argument("monte_carlo_leakage: m must be >= 1");
  if (trials == 0) throw std::invalid_argument("monte_carlo_leakage: trials must be >= 1");

  Rng rng(seed);
  // Bin b is occupied in trial t iff mark[b] == t + 1; avoids clearing.
  std::vector<std::uint64_t> mark(m, 0);
  const double expected = expected_leakage(n, m);
  double sum = 0.0, sum_sq = 0.0;
  MonteCarloResult r;
  r.trials = trials;
  for (std::uint64_t t = 1; t <= trials; ++t) {
    std::uint64_t extra = 0;
    for (std::uint64_t b = 0; b < n; ++b) {
      const std::uint64_t bin = m == 1 ? 0 : rng.below(m);
      if (mark[bin] == t)
        ++extra;
      else
        mark[bin] = t;
    }
    const double y = double(extra);
    sum += y;
    sum_sq += y * y;
    if (tail_threshold >= 0.0 && std::abs(y - expected) >= tail_threshold) ++r.tail_count;
  }
  const double tn = double(trials);
  r.mean = sum / tn;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - sum * sum / tn) / (tn - 1.0)) : 0.0;
  r.stderr_ = std::sqrt(var / tn);
  return r;
}

}  // namespace upfcache::analytic
