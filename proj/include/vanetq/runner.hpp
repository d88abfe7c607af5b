#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics.hpp"
#include "rl.hpp"
#include "scenario.hpp"
#include "simulation.hpp"

namespace vanetq {

/// Writes one `<agent-label>.csv` snapshot per learner into `dir`.
/// Returns the number of files written.
inline std::size_t export_qtables(const AgentPool* pool, const std::filesystem::path& dir) {
  if (!pool) return 0;
  std::filesystem::create_directories(dir);
  for (const auto& [id, agent] : pool->agents()) {
    std::ofstream out(dir / (id.label() + ".csv"));
    if (!out) throw std::runtime_error("cannot write q-table for " + id.label());
    write_qtable(out, agent.table);
  }
  return pool->size();
}

struct Aggregate {
  double mean = 0.0;
  std::optional<double> stddev;  // sample standard deviation; needs n >= 2
  std::size_t n = 0;
};

inline std::optional<Aggregate> aggregate(std::span<const double> xs) {
  if (xs.empty()) return std::nullopt;
  Aggregate a;
  a.n = xs.size();
  double sum = 0.0;
  for (double x : xs) sum += x;
  a.mean = sum / static_cast<double>(a.n);
  if (a.n >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

struct CategoryAggregate {
  std::optional<Aggregate> mean_latency;
  std::optional<Aggregate> mean_throughput;
  std::optional<Aggregate> fairness;
  std::optional<Aggregate> packets_received;
  std::optional<Aggregate> packets_dropped;
  std::optional<Aggregate> delivery_ratio;
};

struct SweepResult {
  std::vector<RunSummary> runs;  // ascending seed order
  PerCategory<CategoryAggregate> aggregate{};
};

inline PerCategory<CategoryAggregate> aggregate_runs(std::span<const RunSummary> runs) {
  PerCategory<CategoryAggregate> out{};
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    std::vector<double> lat, tput, fair, rx, drop, ratio;
    for (const auto& r : runs) {
      const auto& c = r.per_category[i];
      if (c.mean_latency) lat.push_back(*c.mean_latency);
      tput.push_back(c.mean_throughput);
      if (c.fairness) fair.push_back(*c.fairness);
      rx.push_back(static_cast<double>(c.packets_received));
      drop.push_back(static_cast<double>(c.packets_dropped));
      ratio.push_back(c.delivery_ratio);
    }
    out[i] = {aggregate(lat), aggregate(tput), aggregate(fair), aggregate(rx), aggregate(drop), aggregate(ratio)};
  }
  return out;
}

/// Runs the scenario once per distinct seed. Seeds are processed in ascending
/// order so the result does not depend on how the list was written.
template <typename OnRun>
SweepResult sweep(const Scenario& base, std::vector<std::uint64_t> seeds, OnRun&& on_run) {
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  SweepResult res;
  for (auto seed : seeds) {
    Scenario s = base;
    s.seed = seed;
    Simulation sim(s);
    RunResult r = sim.run();
    on_run(s, sim, r);
    res.runs.push_back(summarize(r.pooled));
  }
  res.aggregate = aggregate_runs(res.runs);
  return res;
}

inline SweepResult sweep(const Scenario& base, std::vector<std::uint64_t> seeds) {
  return sweep(base, std::move(seeds), [](const Scenario&, const Simulation&, const RunResult&) {});
}

inline nlohmann::ordered_json to_json(const std::optional<Aggregate>& a) {
  if (!a) return nullptr;
  nlohmann::ordered_json j;
  j["mean"] = a->mean;
  j["stddev"] = a->stddev ? nlohmann::ordered_json(*a->stddev) : nlohmann::ordered_json(nullptr);
  j["n"] = a->n;
  return j;
}

inline nlohmann::ordered_json to_json(const SweepResult& s) {
  nlohmann::ordered_json j;
  j["seeds"] = nlohmann::ordered_json::array();
  for (const auto& r : s.runs) j["seeds"].push_back(r.seed);
  auto& cats = j["aggregate"];
  for (auto c : kAllCategories) {
    const auto& a = s.aggregate[index_of(c)];
    nlohmann::ordered_json cj;
    cj["mean_latency_s"] = to_json(a.mean_latency);
    cj["mean_throughput_bps"] = to_json(a.mean_throughput);
    cj["fairness"] = to_json(a.fairness);
    cj["packets_received"] = to_json(a.packets_received);
    cj["packets_dropped"] = to_json(a.packets_dropped);
    cj["delivery_ratio"] = to_json(a.delivery_ratio);
    cats[std::string(to_string(c))] = cj;
  }
  return j;
}

}  // namespace vanetq
