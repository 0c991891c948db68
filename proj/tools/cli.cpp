#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <optional>

#include "upfcache/allocator.hpp"
#include "upfcache/analytic_model.hpp"
#include "upfcache/configurator.hpp"
#include "upfcache/errors.hpp"
#include "upfcache/pipeline_sim.hpp"
#include "upfcache/report.hpp"

#ifndef UPFCACHE_VERSION
#define UPFCACHE_VERSION "dev"
#endif

namespace upfcache::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPlotStub = R"(#!/usr/bin/env python3
# Plot every CSV in this directory: first column on x, the rest on y.
import csv, pathlib, sys

import matplotlib.pyplot as plt

here = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else ".")
for path in sorted(here.glob("*.csv")):
    with path.open() as f:
        rows = list(csv.reader(f))
    if len(rows) < 2:
        continue
    head, body = rows[0], rows[1:]
    fig, axes = plt.subplots(len(head) - 1, 1, figsize=(6, 2 * (len(head) - 1)), sharex=True, squeeze=False)
    x = [float(r[0]) for r in body]
    for i, name in enumerate(head[1:], start=1):
        try:
            y = [float(r[i]) for r in body]
        except ValueError:
            continue
        axes[i - 1][0].plot(x, y, marker=".")
        axes[i - 1][0].set_ylabel(name, fontsize=7)
    axes[-1][0].set_xlabel(head[0])
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=120)
)";

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "upfcache-out";
  unsigned jobs = 1;
};

class Outputs {
 public:
  Outputs(const std::string& dir, std::string subcommand) {
    manifest_.version = UPFCACHE_VERSION;
    manifest_.subcommand = std::move(subcommand);
    manifest_.out_dir = dir;
    dir_ = dir;
  }

  RunManifest& manifest() { return manifest_; }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(dir_);
    std::ofstream f(dir_ / name, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    manifest_.outputs.push_back(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

  void finish() {
    write("plot.py", kPlotStub);
    manifest_.outputs.push_back("manifest.json");
    fs::create_directories(dir_);
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << manifest_.to_json().dump(2) << "\n";
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
};

ExperimentConfig resolve(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? parse_config(Json::object()) : load_config(g.config);
  if (g.seed) cfg.traffic.seed = *g.seed;
  return cfg;
}

Outputs start(const Globals& g, const std::string& sub, const ExperimentConfig& cfg) {
  Outputs o(g.out, sub);
  o.manifest().config_path = g.config;
  o.manifest().seed = cfg.traffic.seed;
  o.manifest().arguments["jobs"] = g.jobs;
  return o;
}

// "2..8" or "2,3,5".
std::vector<std::uint32_t> parse_ways(const std::string& text) {
  std::vector<std::uint32_t> out;
  try {
    if (auto dots = text.find(".."); dots != std::string::npos) {
      const auto lo = std::stoul(text.substr(0, dots));
      const auto hi = std::stoul(text.substr(dots + 2));
      if (lo > hi) throw ConfigError("--ways", "range is empty");
      for (auto w = lo; w <= hi; ++w) out.push_back(std::uint32_t(w));
    } else {
      std::size_t pos = 0;
      while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(std::uint32_t(std::stoul(text.substr(pos, comma - pos))));
        pos = comma + 1;
      }
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError("--ways", "expected LO..HI or a comma list, got \"" + text + "\"");
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1]) throw ConfigError("--ways", "way counts must be increasing");
  return out;
}

void print_result(std::ostream& out, const SimResult& r) {
  out << fmt::format(
      "throughput {:.3f} Gbps of {:.3f} offered, loss {:.4f}, ddio write miss {:.4f}, "
      "rx/tx llc miss {:.4f}/{:.4f}, dram {:.3f} GB/s, ddio ways {}\n",
      r.throughput / 1e9, r.offered_load / 1e9, r.packet_loss_rate, r.ddio_write_miss_rate,
      r.rx_llc_miss_rate, r.tx_llc_miss_rate, r.dram_bytes_per_second / 1e9, r.final_ddio_ways);
}

int cmd_simulate(const Globals& g, bool with_allocator, bool dump_packets, std::ostream& out) {
  const ExperimentConfig cfg = resolve(g);
  Outputs o = start(g, "simulate", cfg);
  o.manifest().arguments["allocator"] = with_allocator;
  o.manifest().resolved_config = to_json(cfg);

  LlcAllocator alloc(cfg.allocator);
  const SimResult r = run(cfg.traffic, cfg.pipeline, with_allocator ? &alloc : nullptr);
  o.write_json("result.json", to_json(r));
  o.write("timeline.csv", timeline_csv(r));
  o.write("counters.csv", counters_csv(r));
  if (with_allocator) o.write("allocator_log.csv", allocator_log_csv(alloc.log()));
  if (dump_packets) o.write("packets.csv", packets_csv(generate(cfg.traffic)));
  o.finish();
  print_result(out, r);
  return kExitOk;
}

int cmd_sweep(const Globals& g, SweepAxis axis, std::optional<std::uint32_t> reps, std::ostream& out) {
  ExperimentConfig cfg = resolve(g);
  if (reps) cfg.repetitions = *reps;
  cfg.validate();
  const std::string sub = axis == SweepAxis::Descriptors ? "sweep-descriptors" : "sweep-buffer";
  Outputs o = start(g, sub, cfg);
  o.manifest().arguments["repetitions"] = cfg.repetitions;
  o.manifest().resolved_config = to_json(cfg);

  const auto table = sweep(axis, cfg.search, cfg.pipeline, cfg.traffic, cfg.repetitions, g.jobs);
  const Selection sel = select(table, cfg.search.loss_threshold);
  o.write(fmt::format("sweep_{}.csv", to_string(axis)), sweep_csv(table));
  o.write_json("selection.json", to_json(sel));
  o.finish();
  out << sel.rationale << "\n";
  return kExitOk;
}

int cmd_sweep_ddio(const Globals& g, const std::string& ways_spec, std::optional<std::uint32_t> packet_size,
                   std::optional<std::uint32_t> reps, std::ostream& out) {
  ExperimentConfig cfg = resolve(g);
  if (packet_size) cfg.traffic.size_model = FixedSize{*packet_size};
  if (reps) cfg.repetitions = *reps;
  cfg.validate();
  const auto ways = parse_ways(ways_spec);
  Outputs o = start(g, "sweep-ddio", cfg);
  o.manifest().arguments["ways"] = ways_spec;
  o.manifest().arguments["repetitions"] = cfg.repetitions;
  o.manifest().resolved_config = to_json(cfg);

  const auto table = sweep(SweepAxis::DdioWays, ways, cfg.pipeline, cfg.traffic, cfg.repetitions, g.jobs);
  // Every way count is admissible here; this is a plain throughput argmax.
  const Selection best = select(table, 1.0);
  o.write("sweep_ddio_ways.csv", sweep_csv(table));
  o.write_json("selection.json", to_json(best));
  o.finish();
  const auto row = std::find_if(table.begin(), table.end(),
                                [&](const SweepRecord& r) { return r.candidate == best.chosen; });
  out << fmt::format("argmax ddio_ways={} throughput_bps={}\n", best.chosen, row->throughput);
  return kExitOk;
}

int cmd_tune(const Globals& g, std::optional<std::uint32_t> reps, bool grid, std::ostream& out) {
  ExperimentConfig cfg = resolve(g);
  if (reps) cfg.repetitions = *reps;
  if (grid) cfg.grid_search = true;
  cfg.validate();
  Outputs o = start(g, "tune", cfg);
  o.manifest().arguments["repetitions"] = cfg.repetitions;
  o.manifest().arguments["grid"] = cfg.grid_search;
  o.manifest().resolved_config = to_json(cfg);

  const SearchReport rep =
      cfg.grid_search ? grid_offline_search(cfg.search, cfg.pipeline, cfg.traffic, cfg.repetitions, g.jobs)
                      : full_offline_search(cfg.search, cfg.pipeline, cfg.traffic, cfg.repetitions, g.jobs);
  if (rep.grid.empty()) {
    o.write("sweep_descriptors.csv", sweep_csv(rep.descriptor_table));
    o.write("sweep_buffer.csv", sweep_csv(rep.buffer_table));
  }
  o.write_json("search.json", to_json(rep));

  PipelineConfig tuned = cfg.pipeline;
  tuned.descriptor_count = rep.chosen_descriptors;
  tuned.mbuf_ring_size = rep.chosen_buffer;
  LlcAllocator alloc(cfg.allocator);
  const SimResult r = run(cfg.traffic, tuned, &alloc);
  o.write_json("result.json", to_json(r));
  o.write("timeline.csv", timeline_csv(r));
  o.write("allocator_log.csv", allocator_log_csv(alloc.log()));
  o.finish();
  out << fmt::format("chosen D={} RX_b={}\n", rep.chosen_descriptors, rep.chosen_buffer);
  print_result(out, r);
  return kExitOk;
}

struct AnalyticArgs {
  std::optional<std::uint64_t> n, m, descriptors;
  std::uint32_t packet_size = 1500;
  std::uint64_t ddio_bytes = 6ull << 20;
  std::optional<double> eps;
  std::uint64_t trials = 0;
};

int cmd_analytic(const Globals& g, bool out_given, const AnalyticArgs& a, std::ostream& out) {
  std::uint64_t n = 0, m = 0;
  if (a.descriptors) {
    analytic::Footprint fp;
    fp.descriptor_count = *a.descriptors;
    fp.packet_bytes = a.packet_size;
    const auto p = analytic::LeakageParams::from_footprint(fp, a.ddio_bytes);
    n = p.n_balls;
    m = p.m_bins;
  }
  if (a.n) n = *a.n;
  if (a.m) m = *a.m;
  if (n == 0) throw ConfigError("--n", "give --n or --descriptors (must be >= 1)");
  if (m == 0) throw ConfigError("--m", "must be >= 1");

  Json j;
  j["n"] = n;
  j["m"] = m;
  j["expected_leakage"] = analytic::expected_leakage(n, m);
  j["leakage_ratio"] = analytic::leakage_ratio(n, m);
  const double pp = analytic::empty_bin_fraction(n, m);
  j["p_prime"] = pp;
  if (a.eps) {
    if (!(*a.eps > 0.0)) throw ConfigError("--eps", "must be positive");
    if (!(pp > 0.0)) throw ConfigError("--eps", "bound undefined when no bin can stay empty");
    j["epsilon"] = *a.eps;
    j["concentration_bound"] = analytic::concentration_bound(m, *a.eps, pp);
  }
  if (a.trials > 0) {
    const std::uint64_t seed = g.seed.value_or(1);
    const double thr = a.eps ? *a.eps * double(m) : -1.0;
    const auto mc = analytic::monte_carlo_leakage(n, m, a.trials, seed, thr);
    Json mj = {{"trials", mc.trials}, {"seed", seed}, {"mean", mc.mean}, {"stderr", mc.stderr_}};
    if (a.eps) mj["tail_fraction"] = double(mc.tail_count) / double(mc.trials);
    j["monte_carlo"] = std::move(mj);
  }
  out << j.dump(2) << "\n";

  if (out_given) {
    Outputs o(g.out, "analytic");
    o.manifest().seed = g.seed.value_or(1);
    o.manifest().arguments = {{"n", n}, {"m", m}, {"trials", a.trials}};
    if (a.eps) o.manifest().arguments["eps"] = *a.eps;
    o.write_json("analytic.json", j);
    o.finish();
  }
  return kExitOk;
}

}  // namespace

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cache-aware UPF pipeline simulator", "upfcachesim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", UPFCACHE_VERSION);

  Globals g;
  app.add_option("--config", g.config, "JSON config file (or a run manifest)");
  app.add_option("--seed", g.seed, "Traffic seed; overrides the config")->envname("UPFCACHESIM_SEED");
  auto* out_opt = app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Parallel simulations for sweeps")->check(CLI::Range(1u, 1024u));

  auto* sim = app.add_subcommand("simulate", "Run one simulation")->fallthrough();
  bool with_alloc = false, dump_packets = false;
  sim->add_flag("--allocator", with_alloc, "Attach the online DDIO-way allocator");
  sim->add_flag("--dump-packets", dump_packets, "Also write the packet stream as CSV");

  std::optional<std::uint32_t> reps;
  auto* sd = app.add_subcommand("sweep-descriptors", "Sweep the descriptor count")->fallthrough();
  sd->add_option("--reps", reps, "Repetitions per candidate");
  auto* sb = app.add_subcommand("sweep-buffer", "Sweep the RX buffer size")->fallthrough();
  sb->add_option("--reps", reps, "Repetitions per candidate");

  std::string ways = "2..8";
  std::optional<std::uint32_t> packet_size;
  auto* swd = app.add_subcommand("sweep-ddio", "Sweep the number of DDIO ways")->fallthrough();
  swd->add_option("--ways", ways, "LO..HI or a comma list")->capture_default_str();
  swd->add_option("--packet-size", packet_size, "Fixed packet size in bytes");
  swd->add_option("--reps", reps, "Repetitions per candidate");

  bool grid = false;
  auto* tune = app.add_subcommand("tune", "Offline search for D and RX_b, then an online allocator run")
                   ->fallthrough();
  tune->add_option("--reps", reps, "Repetitions per candidate");
  tune->add_flag("--grid", grid, "Exhaustive 2-D grid instead of the coordinate search");

  AnalyticArgs aa;
  auto* an = app.add_subcommand("analytic", "Closed-form leakage model, bound and Monte Carlo")->fallthrough();
  an->add_option("--n", aa.n, "Balls (packet cache lines)");
  an->add_option("--m", aa.m, "Bins (DDIO cache lines)");
  an->add_option("--descriptors", aa.descriptors, "Derive n from a descriptor count");
  an->add_option("--packet-size", aa.packet_size, "Packet size for --descriptors")->capture_default_str();
  an->add_option("--ddio-bytes", aa.ddio_bytes, "DDIO capacity for --descriptors")->capture_default_str();
  an->add_option("--eps", aa.eps, "Deviation for the concentration bound");
  an->add_option("--trials", aa.trials, "Monte Carlo trials (0: skip)");

  std::vector<std::string> argv_store{"upfcachesim"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << UPFCACHE_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(g, with_alloc, dump_packets, out);
    if (sd->parsed()) return cmd_sweep(g, SweepAxis::Descriptors, reps, out);
    if (sb->parsed()) return cmd_sweep(g, SweepAxis::BufferSize, reps, out);
    if (swd->parsed()) return cmd_sweep_ddio(g, ways, packet_size, reps, out);
    if (tune->parsed()) return cmd_tune(g, reps, grid, out);
    if (an->parsed()) return cmd_analytic(g, out_opt->count() > 0, aa, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    err << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  err << app.help();
  return kExitConfig;
}

}  // namespace upfcache::cli
