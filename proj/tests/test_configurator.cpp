#include <doctest.h>

#include <algorithm>
#include <random>

#include "upfcache/configurator.hpp"
#include "upfcache/errors.hpp"

using namespace upfcache;

namespace {

SweepRecord row(std::uint32_t c, double gbps, double loss) {
  SweepRecord r;
  r.candidate = c;
  r.repetitions = 1;
  r.throughput = gbps * 1e9;
  r.loss_rate = loss;
  return r;
}

TrafficProfile short_profile() {
  TrafficProfile tp;
  tp.offered_rate = 1.2e6;
  tp.duration = 0.01;
  return tp;
}

PipelineConfig small_base() {
  PipelineConfig c;
  c.descriptor_count = 256;
  c.mbuf_ring_size = 4096;
  return c;
}

}  // namespace

TEST_CASE("the loss limit excludes the throughput leader") {
  const std::vector<SweepRecord> t{row(128, 60.1, 0.004), row(256, 67.45, 0.0254), row(512, 65.36, 0.008),
                                   row(1024, 66.0, 0.031), row(2048, 64.0, 0.05)};
  auto s = select(t, 0.01);
  CHECK(s.chosen == 512);
  CHECK(s.feasible);
  CHECK(s.feasible_set == std::vector<std::uint32_t>{128, 512});
  CHECK(s.rationale.find("chose 512") == 0);
  CHECK(s.rationale.find("256") != std::string::npos);
}

TEST_CASE("with no losses the plain argmax wins") {
  const std::vector<SweepRecord> t{row(1, 3, 0), row(2, 9, 0), row(3, 4, 0)};
  CHECK(select(t, 0.01).chosen == 2);
}

TEST_CASE("throughput ties go to the smaller candidate") {
  const std::vector<SweepRecord> t{row(4096, 10, 0), row(512, 10, 0), row(1024, 10, 0)};
  CHECK(select(t, 0.01).chosen == 512);
}

TEST_CASE("selection ignores row order") {
  std::vector<SweepRecord> t{row(8, 5, 0.02), row(16, 7, 0.001), row(32, 7, 0.0), row(64, 6.5, 0.0),
                             row(128, 8, 0.5)};
  std::mt19937 g(11);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(t.begin(), t.end(), g);
    CHECK(select(t, 0.01).chosen == 16);
  }
}

TEST_CASE("empty or all-invalid tables are rejected") {
  std::vector<SweepRecord> none;
  CHECK_THROWS(select(none, 0.01));
  auto bad = row(4, 9, 0);
  bad.config_error = "pipeline.mbuf_ring_size: too small";
  std::vector<SweepRecord> only_bad{bad};
  CHECK_THROWS(select(only_bad, 0.01));
  std::vector<SweepRecord> t{bad, row(8, 1, 0)};
  CHECK(select(t, 0.01).chosen == 8);
  CHECK_THROWS(select(t, 0.0));
}

TEST_CASE("with nothing feasible the lowest-loss row is flagged") {
  const std::vector<SweepRecord> t{row(1, 9, 0.05), row(2, 7, 0.02), row(3, 8, 0.02), row(4, 9, 0.03)};
  auto s = select(t, 0.01);
  CHECK(s.chosen == 3);
  CHECK_FALSE(s.feasible);
  CHECK(s.feasible_set.empty());
}

TEST_CASE("with_candidate applies one axis") {
  PipelineConfig base;
  base.partition = PartitionPolicy{PartitionMode::Isolated, 2, 7};
  auto d = with_candidate(base, SweepAxis::Descriptors, 512);
  CHECK(d.descriptor_count == 512);
  CHECK(d.mbuf_ring_size == base.mbuf_ring_size);
  auto b = with_candidate(base, SweepAxis::BufferSize, 8192);
  CHECK(b.mbuf_ring_size == 8192);
  auto w = with_candidate(base, SweepAxis::DdioWays, 4);
  CHECK(w.partition.ddio_ways == 4);
  CHECK(w.partition.core_ways == 5);
}

TEST_CASE("one candidate and one repetition is a plain run") {
  const auto base = small_base();
  const auto tp = short_profile();
  const std::vector<std::uint32_t> c{512};
  auto t = sweep(SweepAxis::Descriptors, c, base, tp, 1);
  REQUIRE(t.size() == 1);
  auto direct = run(tp, with_candidate(base, SweepAxis::Descriptors, 512));
  CHECK(t[0].candidate == 512);
  CHECK(t[0].repetitions == 1);
  CHECK(t[0].throughput == direct.throughput);
  CHECK(t[0].loss_rate == direct.packet_loss_rate);
  CHECK(t[0].ddio_write_miss_rate == direct.ddio_write_miss_rate);
}

TEST_CASE("repetitions average runs with consecutive seeds") {
  const auto base = small_base();
  auto tp = short_profile();
  tp.seed = 40;
  const std::vector<std::uint32_t> c{128, 256};
  auto t = sweep(SweepAxis::Descriptors, c, base, tp, 3);
  REQUIRE(t.size() == 2);
  double sum = 0.0;
  for (std::uint64_t r = 0; r < 3; ++r) {
    auto p = tp;
    p.seed = 40 + r;
    sum += run(p, with_candidate(base, SweepAxis::Descriptors, 256)).throughput;
  }
  CHECK(t[1].repetitions == 3);
  CHECK(t[1].throughput == doctest::Approx(sum / 3).epsilon(1e-12));
}

TEST_CASE("invalid candidates keep a flagged row") {
  auto base = small_base();
  const std::vector<std::uint32_t> c{1024, 8192};
  auto t = sweep(SweepAxis::Descriptors, c, base, short_profile(), 1);
  REQUIRE(t.size() == 2);
  CHECK(t[0].valid());
  CHECK_FALSE(t[1].valid());
  CHECK(t[1].config_error.find("pipeline.mbuf_ring_size") != std::string::npos);
  CHECK(select(t, 0.5).chosen == 1024);
}

TEST_CASE("thread count does not change the table") {
  const std::vector<std::uint32_t> c{128, 512, 2048};
  auto a = sweep(SweepAxis::Descriptors, c, small_base(), short_profile(), 2, 1);
  auto b = sweep(SweepAxis::Descriptors, c, small_base(), short_profile(), 2, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].candidate == b[i].candidate);
    CHECK(a[i].throughput == b[i].throughput);
    CHECK(a[i].loss_rate == b[i].loss_rate);
  }
}

TEST_CASE("a one-point search space returns its only point") {
  SearchSpace s;
  s.descriptor_candidates = {256};
  s.buffer_candidates = {4096};
  auto rep = full_offline_search(s, small_base(), short_profile());
  CHECK(rep.chosen_descriptors == 256);
  CHECK(rep.chosen_buffer == 4096);
  CHECK(rep.descriptor_table.size() == 1);
  CHECK(rep.buffer_table.size() == 1);
  auto grid = grid_offline_search(s, small_base(), short_profile());
  CHECK(grid.grid.size() == 1);
  CHECK(grid.chosen_descriptors == 256);
  CHECK(grid.chosen_buffer == 4096);
}

TEST_CASE("search space validation") {
  SearchSpace s;
  CHECK_NOTHROW(s.validate());
  s.descriptor_candidates = {};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.buffer_candidates = {8192, 8192};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.loss_threshold = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
