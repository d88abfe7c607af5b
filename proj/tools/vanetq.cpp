// Command-line front end: run scenarios and presets, sweep seeds, compare runs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <vanetq/vanetq.hpp>

namespace fs = std::filesystem;
using namespace vanetq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct RunOptions {
  std::string out;
  std::vector<std::string> overrides;
  bool packet_trace = false;
  bool quiet = false;
};

fs::path default_out() {
  if (const char* env = std::getenv("VANETQ_OUT"); env && *env) return env;
  return "vanetq-out";
}

void apply_overrides(Scenario& s, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ScenarioError("--set", 0, "expected key=value, got '" + o + "'");
    set_field(s, std::string(trim(std::string_view(o).substr(0, eq))), std::string_view(o).substr(eq + 1), "--set");
  }
  validate(s, "--set");
}

std::string fmt(const std::optional<double>& v, int prec = 4) {
  if (!v) return "-";
  std::ostringstream s;
  s << std::setprecision(prec) << *v;
  return s.str();
}

void print_summary(const RunSummary& s) {
  std::cout << s.scenario_id << " seed=" << s.seed << " episodes_pooled=" << s.episodes_pooled << '\n';
  std::cout << std::left << std::setw(7) << "cat" << std::setw(13) << "latency_s" << std::setw(15) << "tput_bps"
            << std::setw(10) << "fairness" << std::setw(12) << "received" << "dropped\n";
  for (auto c : kAllCategories) {
    const auto& cs = s.per_category[index_of(c)];
    std::cout << std::setw(7) << to_string(c) << std::setw(13) << fmt(cs.mean_latency) << std::setw(15)
              << fmt(cs.mean_throughput, 6) << std::setw(10) << fmt(cs.fairness) << std::setw(12)
              << cs.packets_received << cs.packets_dropped << '\n';
  }
  std::cout << "control sent=" << s.control.sent << " delivered=" << s.control.delivered
            << " dropped=" << s.control.dropped << '\n';
}

/// Runs one scenario and writes the report, q-tables and optional packet trace.
void execute(const Scenario& s, const fs::path& dir, const RunOptions& opt) {
  Simulation sim(s, opt.packet_trace);
  std::ofstream trace;
  if (opt.packet_trace) {
    fs::create_directories(dir);
    trace.open(dir / "packets.csv");
    if (!trace) throw std::runtime_error("cannot write " + (dir / "packets.csv").string());
  }
  RunResult r;
  for (int e = 0; e < s.episodes; ++e) {
    r.episodes.push_back(sim.run_episode());
    if (opt.packet_trace) {
      // One trace file for the run; episodes are separated by comment lines.
      trace << "# episode " << e << '\n';
      std::ostringstream chunk;
      write_packet_trace(chunk, sim.trace());
      trace << chunk.str();
    }
    if (!opt.quiet) std::cerr << "\r" << s.name << ": episode " << (e + 1) << "/" << s.episodes << std::flush;
  }
  if (!opt.quiet) std::cerr << '\n';
  r.pooled = pool_reports(std::span<const RunReport>(r.episodes).subspan(s.pooled_from()));
  export_report(r.pooled, dir);
  {
    std::ofstream sc(dir / "scenario.conf");
    write_scenario(sc, s);
  }
  export_qtables(sim.agents(), dir / "qtables");
  print_summary(summarize(r.pooled));
  std::cout << "wrote " << dir.string() << '\n';
}

int cmd_run(const std::string& path, const RunOptions& opt) {
  Scenario s = load_scenario(path);
  apply_overrides(s, opt.overrides);
  const fs::path dir = opt.out.empty() ? default_out() / s.name : fs::path(opt.out);
  execute(s, dir, opt);
  return kExitOk;
}

int cmd_testcase(const std::string& name, std::optional<std::uint64_t> seed, const RunOptions& opt) {
  Scenario s = make_testcase(name);
  if (seed) s.seed = *seed;
  apply_overrides(s, opt.overrides);
  const fs::path dir =
      opt.out.empty() ? default_out() / (name + "-seed" + std::to_string(s.seed)) : fs::path(opt.out);
  execute(s, dir, opt);
  return kExitOk;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  for (auto f : split(list, ',')) {
    auto v = parse_int<std::uint64_t>(f);
    if (!v) throw ScenarioError("--seeds", 0, "bad seed '" + std::string(f) + "'");
    seeds.push_back(*v);
  }
  if (seeds.empty()) throw ScenarioError("--seeds", 0, "need at least one seed");
  return seeds;
}

int cmd_sweep(const std::string& path, const std::string& seed_list, const RunOptions& opt) {
  Scenario s = load_scenario(path);
  apply_overrides(s, opt.overrides);
  const auto seeds = parse_seeds(seed_list);
  const fs::path root = opt.out.empty() ? default_out() / (s.name + "-sweep") : fs::path(opt.out);
  auto res = sweep(s, seeds, [&](const Scenario& run, const Simulation& sim, const RunResult& r) {
    const fs::path dir = root / ("seed-" + std::to_string(run.seed));
    export_report(r.pooled, dir);
    export_qtables(sim.agents(), dir / "qtables");
    if (!opt.quiet) std::cerr << s.name << ": seed " << run.seed << " done\n";
  });
  fs::create_directories(root);
  {
    std::ofstream out(root / "sweep.json");
    out << to_json(res).dump(2) << '\n';
  }
  std::cout << s.name << " over " << res.runs.size() << " seeds (mean +/- sample std)\n";
  for (auto c : kAllCategories) {
    const auto& a = res.aggregate[index_of(c)];
    auto pm = [](const std::optional<Aggregate>& x) {
      if (!x) return std::string("-");
      return fmt(x->mean) + " +/- " + fmt(x->stddev);
    };
    std::cout << "  " << std::left << std::setw(6) << to_string(c) << " latency_s " << std::setw(22)
              << pm(a.mean_latency) << " tput_bps " << std::setw(24) << pm(a.mean_throughput) << " fairness "
              << pm(a.fairness) << '\n';
  }
  std::cout << "wrote " << root.string() << '\n';
  return kExitOk;
}

int cmd_compare(const std::string& a, const std::string& b) {
  const RunSummary base = load_summary(a);
  const RunSummary treat = load_summary(b);
  const ComparisonTable t = compare(base, treat);
  std::cout << "baseline " << t.baseline_id << " vs treatment " << t.treatment_id << '\n';
  std::cout << std::left << std::setw(7) << "cat" << std::setw(20) << "latency_reduction" << std::setw(18)
            << "throughput_gain" << "fairness_gain\n";
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * *v << '%';
    return s.str();
  };
  for (auto c : kAllCategories) {
    const auto& d = t.per_category[index_of(c)];
    std::cout << std::setw(7) << to_string(c) << std::setw(20) << pct(d.latency_reduction) << std::setw(18)
              << pct(d.throughput_gain) << pct(d.fairness_gain) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-RSU vehicular network simulator with Q-learning waiting-time agents"};
  app.require_subcommand(1);

  RunOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", opt.out, "Output directory (default: $VANETQ_OUT/<name>)");
    sub->add_option("--set", opt.overrides, "Override a scenario key, e.g. --set episodes=5")->take_all();
    sub->add_flag("--quiet", opt.quiet, "No progress output");
  };

  std::string scenario_path;
  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", scenario_path, "Scenario file (key = value)")->required();
  run->add_flag("--packet-trace", opt.packet_trace, "Write packets.csv with every delivery and drop");
  add_common(run);

  std::string tc_name;
  std::optional<std::uint64_t> seed;
  auto* tc = app.add_subcommand("testcase", "Run a preset experiment");
  tc->add_option("name", tc_name, "Preset name")->required()->check(CLI::IsMember(testcase_names()));
  tc->add_option("--seed", seed, "Master seed");
  tc->add_flag("--packet-trace", opt.packet_trace, "Write packets.csv with every delivery and drop");
  add_common(tc);

  std::string seeds;
  auto* sw = app.add_subcommand("sweep", "Run a scenario over several seeds");
  sw->add_option("scenario", scenario_path, "Scenario file (key = value)")->required();
  sw->add_option("--seeds", seeds, "Comma-separated seeds")->required();
  add_common(sw);

  std::string dir_a, dir_b;
  auto* cmp = app.add_subcommand("compare", "Compare two run directories");
  cmp->add_option("baseline", dir_a, "Baseline run directory")->required();
  cmp->add_option("treatment", dir_b, "Treatment run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(scenario_path, opt);
    if (*tc) return cmd_testcase(tc_name, seed, opt);
    if (*sw) return cmd_sweep(scenario_path, seeds, opt);
    if (*cmp) return cmd_compare(dir_a, dir_b);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
