#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "upfcache/report.hpp"

namespace fs = std::filesystem;
using upfcache::Json;

namespace {

struct Outcome {
  int rc;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int rc = upfcache::cli::execute(args, o, e);
  return {rc, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("upfcache-cli-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

Json small_config() {
  return Json::parse(R"({
    "pipeline": {"descriptor_count": 256, "mbuf_ring_size": 2048},
    "traffic": {"packet_size": 1500, "offered_rate": 1e6, "duration": 0.02, "seed": 3}
  })");
}

}  // namespace

TEST_CASE("analytic prints the closed form and bound") {
  auto r = call({"analytic", "--n", "10", "--m", "10", "--eps", "0.2", "--trials", "2000"});
  REQUIRE(r.rc == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["expected_leakage"].get<double>() == doctest::Approx(3.486784401).epsilon(1e-12));
  CHECK(j.contains("concentration_bound"));
  CHECK(j["monte_carlo"]["trials"] == 2000);
  auto d = call({"analytic", "--descriptors", "4096", "--trials", "0"});
  REQUIRE(d.rc == 0);
  CHECK(Json::parse(d.out)["n"] == 98304);
}

TEST_CASE("simulate writes the same files twice") {
  const auto dir = scratch("sim");
  const auto cfg = write_config(dir, small_config());
  const auto a = dir / "a", b = dir / "b";
  REQUIRE(call({"--config", cfg.string(), "--out", a.string(), "simulate", "--allocator"}).rc == 0);
  REQUIRE(call({"simulate", "--allocator", "--config", cfg.string(), "--out", b.string()}).rc == 0);
  for (const char* f : {"result.json", "timeline.csv", "counters.csv", "allocator_log.csv", "plot.py"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  auto ma = Json::parse(slurp(a / "manifest.json")), mb = Json::parse(slurp(b / "manifest.json"));
  CHECK(ma["seed"] == 3);
  ma.erase("out_dir");
  mb.erase("out_dir");
  ma.erase("arguments");
  mb.erase("arguments");
  CHECK(ma == mb);

  // The counters dump reproduces the timeline.
  const auto rows = upfcache::snapshots_from_counters_csv(slurp(a / "counters.csv"), 7);
  std::istringstream tl(slurp(a / "timeline.csv"));
  std::string line;
  std::getline(tl, line);
  std::size_t i = 0;
  for (; std::getline(tl, line); ++i) {
    REQUIRE(i < rows.size());
    std::vector<double> f;
    std::istringstream cells(line);
    for (std::string c; std::getline(cells, c, ',');) f.push_back(std::stod(c));
    CHECK(rows[i].t == doctest::Approx(f[0]));
    CHECK(rows[i].throughput == doctest::Approx(f[1]));
    CHECK(rows[i].ddio_write_miss_rate == doctest::Approx(f[3]));
  }
  CHECK(i == rows.size());
}

TEST_CASE("a manifest can be replayed as a config") {
  const auto dir = scratch("replay");
  const auto cfg = write_config(dir, small_config());
  REQUIRE(call({"--config", cfg.string(), "--out", (dir / "a").string(), "simulate"}).rc == 0);
  REQUIRE(call({"--config", (dir / "a" / "manifest.json").string(), "--out", (dir / "b").string(), "simulate"})
              .rc == 0);
  CHECK(slurp(dir / "a" / "result.json") == slurp(dir / "b" / "result.json"));
}

TEST_CASE("the seed comes from the flag, then the environment, then the config") {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, small_config());
  auto seed_of = [&](const fs::path& out) { return Json::parse(slurp(out / "manifest.json"))["seed"]; };
  REQUIRE(call({"--config", cfg.string(), "--out", (dir / "flag").string(), "--seed", "9", "simulate"}).rc == 0);
  CHECK(seed_of(dir / "flag") == 9);
  setenv("UPFCACHESIM_SEED", "12", 1);
  const int rc = call({"--config", cfg.string(), "--out", (dir / "env").string(), "simulate"}).rc;
  unsetenv("UPFCACHESIM_SEED");
  REQUIRE(rc == 0);
  CHECK(seed_of(dir / "env") == 12);
  CHECK(slurp(dir / "flag" / "result.json") != slurp(dir / "env" / "result.json"));
}

TEST_CASE("sweeps write a table and a selection") {
  const auto dir = scratch("sweep");
  auto j = small_config();
  j["search"] = Json::parse(R"({"descriptor_candidates": [128, 512], "buffer_candidates": [1024, 4096]})");
  j["traffic"]["duration"] = 0.01;
  const auto cfg = write_config(dir, j);
  auto r = call({"--config", cfg.string(), "--out", (dir / "d").string(), "sweep-descriptors"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("chose") != std::string::npos);
  CHECK(fs::exists(dir / "d" / "sweep_descriptors.csv"));
  CHECK(Json::parse(slurp(dir / "d" / "selection.json")).contains("chosen"));
  auto w = call({"--config", cfg.string(), "--out", (dir / "w").string(), "sweep-ddio", "--ways", "1..3"});
  REQUIRE(w.rc == 0);
  CHECK(w.out.find("argmax ddio_ways=") != std::string::npos);
  auto t = call({"--config", cfg.string(), "--out", (dir / "t").string(), "tune"});
  REQUIRE(t.rc == 0);
  for (const char* f : {"sweep_descriptors.csv", "sweep_buffer.csv", "search.json", "result.json",
                        "allocator_log.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(dir / "t" / f), f);
}

TEST_CASE("bad input exits with status 1 and names the problem") {
  const auto dir = scratch("bad");
  auto j = small_config();
  j["pipeline"]["bogus"] = 1;
  auto r = call({"--config", write_config(dir, j).string(), "--out", (dir / "o").string(), "simulate"});
  CHECK(r.rc == 1);
  CHECK(r.err.find("pipeline.bogus") != std::string::npos);

  j = small_config();
  j["pipeline"]["mbuf_ring_size"] = 100;
  r = call({"--config", write_config(dir, j).string(), "--out", (dir / "o").string(), "simulate"});
  CHECK(r.rc == 1);
  CHECK(r.err.find("pipeline.mbuf_ring_size") != std::string::npos);

  CHECK(call({"frobnicate"}).rc == 1);
  CHECK(call({"simulate", "--no-such-flag"}).rc == 1);
  CHECK(call({"--config", (dir / "missing.json").string(), "simulate"}).rc == 1);
  CHECK(call({"analytic", "--n", "5"}).rc == 1);
}
