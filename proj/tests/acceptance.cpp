// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <vanetq/vanetq.hpp>

using namespace vanetq;
namespace fs = std::filesystem;

namespace {

// Tolerances and protocol constants.
constexpr double kQTol = 1e-3;
constexpr long kQMaxUpdates = 100000;
constexpr double kWaitTol = 1e-12;
constexpr double kJainTol = 1e-12;
constexpr int kJainVectors = 1000;
constexpr std::size_t kJainMaxN = 50;
constexpr int kDeskVehicles = 20;
constexpr double kDeskDuration = 60.0;
constexpr int kDeskEpisodes = 5;
constexpr int kDirectionalWarmup = 2;
constexpr int kDirectionalPooled = 10;
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};
constexpr int kSeedsRequired = 4;
// "VI ~ HDMAP": mean latencies within this relative gap of each other.
constexpr double kSimilarLatency = 0.5;
constexpr int kLifetimeTicks = 1000;

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Verdict& v, double seconds) {
  std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << name << "  (" << std::fixed
            << std::setprecision(2) << seconds << " s)  " << v.detail << std::endl;
  std::cout.unsetf(std::ios::floatfield);
  if (!v.pass) ++failures;
}

template <typename Fn>
void criterion(int id, const std::string& name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, name, v, s);
}

std::string num(double x, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

// -- 1 ----------------------------------------------------------------------

Verdict state_space() {
  auto enumerate = [](TopologyMode m) {
    std::set<std::uint32_t> keys;
    AgentTopology t{m, RewardGranularity::OVERALL};
    for (int soj = 0; soj < kSojournLevels; ++soj)
      for (int tv = 1; tv <= kMaxActiveCount; ++tv)
        for (auto c : kAllCategories)
          for (int tcv = 1; tcv <= kMaxActiveCount; ++tcv) {
            ActiveCounts a;
            a.total = tv;
            a.per_category[index_of(c)] = tcv;
            keys.insert(build_state({soj}, a, c, t).key());
          }
    return keys.size();
  };
  const auto single = enumerate(TopologyMode::SINGLE);
  const auto split = enumerate(TopologyMode::PER_CATEGORY);
  const auto single_formula = state_space_size(5, 100, 100, 4, true);
  const auto split_formula = state_space_size(5, 100, 100, 4, false);
  const bool ok = single == 200000 && split == 50000 && single_formula == 200000 && split_formula == 50000 &&
                  (single - split) * 100 == 75 * single;
  return {ok, "single=" + std::to_string(single) + " per-category=" + std::to_string(split) +
                  " decrease=" + num(100.0 * (single - split) / single) + "%"};
}

// -- 2 ----------------------------------------------------------------------

Verdict q_learning_oracle() {
  // Deterministic MDP: next[s][a], reward[s][a].
  constexpr int S = 3, A = 2;
  const int next[S][A] = {{1, 2}, {2, 0}, {0, 1}};
  const double reward[S][A] = {{0.0, 1.0}, {0.5, -0.2}, {0.3, 0.8}};
  LearningParams p;  // alpha 0.1, gamma 0.99

  // Value iteration to machine precision.
  double qstar[S][A] = {};
  for (int it = 0; it < 20000; ++it) {
    double nq[S][A];
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const int n = next[s][a];
        nq[s][a] = reward[s][a] + p.discount * std::max(qstar[n][0], qstar[n][1]);
      }
    std::memcpy(qstar, nq, sizeof nq);
  }

  auto state = [](int s) {
    AgentState st;
    st.sojourn = s;
    return st;
  };
  QTable q(A);
  long updates = 0;
  double err = 1e9;
  while (updates < kQMaxUpdates) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        q_update(q, state(s), a, reward[s][a], state(next[s][a]), p);
        ++updates;
      }
    err = 0.0;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) err = std::max(err, std::abs(q.get(state(s), a) - qstar[s][a]));
    if (err < kQTol) break;
  }
  return {err < kQTol, "max-norm error " + num(err, 3) + " after " + std::to_string(updates) + " updates"};
}

// -- 3 ----------------------------------------------------------------------

Verdict wait_mapping() {
  const auto profiles = default_profiles();
  const int k = LearningParams{}.max_action;
  const double expected_wmax[] = {0.92, 2.0, 2.0, 8.0};
  double worst = 0.0;
  bool ok = true;
  for (auto c : kAllCategories) {
    const double wmax = profiles[index_of(c)].max_wait_s;
    ok &= wmax == expected_wmax[index_of(c)];
    ok &= action_to_wait(0, wmax, k) == 0.0;
    worst = std::max(worst, std::abs(action_to_wait(k, wmax, k) - wmax));
    double prev = -1.0;
    for (int a = 0; a <= k; ++a) {
      const double w = action_to_wait(a, wmax, k);
      worst = std::max(worst, std::abs(w - a * wmax / k));
      ok &= w > prev;
      ok &= w <= wmax + kWaitTol;
      prev = w;
    }
  }
  ok &= worst <= kWaitTol;
  return {ok, "max deviation " + num(worst, 3) + " over 4 categories x " + std::to_string(k + 1) + " actions"};
}

// -- 4 ----------------------------------------------------------------------

Verdict reward_arithmetic() {
  const RewardConfig cfg;
  const auto profiles = default_profiles();
  bool ok = true;
  double worst = 0.0;
  for (auto c : kAllCategories) {
    const auto& p = profiles[index_of(c)];
    NetworkStats stats;
    stats.per_category[index_of(c)].mean_latency = p.latency_max_s;
    stats.per_category[index_of(c)].throughput_bps = p.throughput_min_bps;
    VehicleStats v{c, p.latency_max_s, p.throughput_min_bps};
    for (double r : {*reward_node_specific(v, p, cfg, false), *reward_overall(stats, c, p, cfg, false),
                     *reward_per_category(stats, c, profiles, cfg, false)}) {
      ok &= r == cfg.alpha1 - cfg.alpha2;
      worst = std::max(worst, std::abs(r - (-0.4)));
    }
  }
  ok &= worst < 1e-15;

  // Shared rewards inside a running simulation.
  Scenario base;
  base.episodes = 3;
  base.warmup_episodes = 0;
  base.episode_duration = kDeskDuration;
  base.max_vehicles = kDeskVehicles;
  std::size_t groups = 0, shared = 0, mismatches = 0;
  for (const char* tc : {"tc1b", "tc2"}) {
    Simulation sim(make_testcase(tc, base));
    std::map<std::pair<std::uint64_t, int>, std::vector<double>> by_tick;
    int episode = 0;
    sim.set_reward_observer([&](const RewardObservation& o) {
      if (!o.fresh) return;
      std::uint64_t t;
      std::memcpy(&t, &o.time, sizeof t);
      by_tick[{t ^ (static_cast<std::uint64_t>(episode) << 60), static_cast<int>(index_of(o.category))}].push_back(
          o.reward);
    });
    for (; episode < base.episodes; ++episode) sim.run_episode();
    for (const auto& [key, rs] : by_tick) {
      ++groups;
      if (rs.size() > 1) ++shared;
      for (double r : rs)
        if (std::memcmp(&r, &rs.front(), sizeof r) != 0) ++mismatches;
    }
  }
  ok &= mismatches == 0 && shared > 0;
  return {ok, "unit-ratio reward " + num(cfg.alpha1 - cfg.alpha2, 17) + "; " + std::to_string(shared) +
                  " multi-agent tick groups, " + std::to_string(mismatches) + " bitwise mismatches"};
}

// -- 5 ----------------------------------------------------------------------

Verdict jain_oracle() {
  RngStream rng(2024, "jain-oracle");
  double worst = 0.0;
  bool bounds = true;
  for (int t = 0; t < kJainVectors; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, kJainMaxN));
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.uniform() < 0.1 ? 0.0 : rng.uniform() * 1e6;
    if (std::all_of(xs.begin(), xs.end(), [](double x) { return x == 0.0; })) xs[0] = 1.0;
    // Brute force via the pairwise expansion of (sum x)^2.
    long double pair = 0.0L, sq = 0.0L;
    for (double a : xs) {
      sq += static_cast<long double>(a) * a;
      for (double b : xs) pair += static_cast<long double>(a) * b;
    }
    const double brute = static_cast<double>(pair / (static_cast<long double>(n) * sq));
    const double j = *jain_fairness(xs);
    worst = std::max(worst, std::abs(j - brute));
    bounds &= j >= 1.0 / static_cast<double>(n) - kJainTol && j <= 1.0;
  }
  return {worst <= kJainTol && bounds,
          "max |J - brute| = " + num(worst, 3) + " over " + std::to_string(kJainVectors) + " vectors"};
}

// -- 6 ----------------------------------------------------------------------

Scenario desk(const std::string& tc, std::uint64_t seed, int episodes, int warmup) {
  Scenario base;
  base.episodes = episodes;
  base.warmup_episodes = warmup;
  base.episode_duration = kDeskDuration;
  base.max_vehicles = kDeskVehicles;
  base.seed = seed;
  return make_testcase(tc, base);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict conservation_and_determinism() {
  const fs::path root = fs::temp_directory_path() / "vanetq_acceptance_c6";
  fs::remove_all(root);
  std::size_t checks = 0, unbalanced = 0, differing = 0, files = 0;
  for (const auto& tc : testcase_names()) {
    for (const char* copy : {"a", "b"}) {
      Simulation sim(desk(tc, 11, kDeskEpisodes, 0));
      auto r = sim.run();
      for (const auto& ep : r.episodes)
        for (auto c : kAllCategories) {
          ++checks;
          if (!ep.at(c).accounting.balanced()) ++unbalanced;
        }
      export_report(r.pooled, root / tc / copy);
      export_qtables(sim.agents(), root / tc / copy / "qtables");
    }
    for (const auto& e : fs::recursive_directory_iterator(root / tc / "a")) {
      if (!e.is_regular_file()) continue;
      ++files;
      const auto rel = fs::relative(e.path(), root / tc / "a");
      if (slurp(e.path()) != slurp(root / tc / "b" / rel)) ++differing;
    }
  }
  fs::remove_all(root);
  return {unbalanced == 0 && differing == 0,
          std::to_string(checks - unbalanced) + "/" + std::to_string(checks) +
              " category-episodes balanced; " + std::to_string(files - differing) + "/" + std::to_string(files) +
              " exported files byte-identical"};
}

// -- 7, 8, 9 ----------------------------------------------------------------

struct SeedRuns {
  std::map<std::string, RunSummary> by_tc;
};

std::map<std::uint64_t, SeedRuns>& directional_runs() {
  static std::map<std::uint64_t, SeedRuns> cache;
  if (cache.empty()) {
    for (auto seed : kSeeds) {
      for (const char* tc : {"baseline_edca", "single", "tc2", "tc3", "tc4c", "tc4d"}) {
        Simulation sim(desk(tc, seed, kDirectionalWarmup + kDirectionalPooled, kDirectionalWarmup));
        cache[seed].by_tc[tc] = summarize(sim.run().pooled);
      }
    }
  }
  return cache;
}

double latency(const RunSummary& s, ServiceCategory c) {
  return s.per_category[index_of(c)].mean_latency.value_or(std::numeric_limits<double>::infinity());
}

std::uint64_t app_received(const RunSummary& s) {
  std::uint64_t n = 0;
  for (const auto& c : s.per_category) n += c.packets_received;
  return n;
}

std::string latencies(const RunSummary& s) {
  std::string out;
  for (auto c : kAllCategories) out += std::string(to_string(c)) + "=" + num(latency(s, c), 3) + " ";
  return out;
}

Verdict priority_ordering() {
  int seeds_ok = 0;
  std::string detail;
  std::map<std::string, int> clause_failures;
  for (auto seed : kSeeds) {
    bool seed_ok = true;
    for (const char* tc : {"baseline_edca", "single", "tc2", "tc3", "tc4d"}) {
      const auto& s = directional_runs()[seed].by_tc[tc];
      const double vo = latency(s, ServiceCategory::VO), vi = latency(s, ServiceCategory::VI),
                   hd = latency(s, ServiceCategory::HDMAP), be = latency(s, ServiceCategory::BE);
      const bool c_vo = vo < std::min(vi, hd);
      const bool c_similar = std::abs(vi - hd) <= kSimilarLatency * std::max(vi, hd);
      const bool c_be = be > std::max(vi, hd);
      double total = 0.0;
      for (const auto& c : s.per_category) total += c.mean_throughput;
      const double be_share = s.per_category[index_of(ServiceCategory::BE)].mean_throughput / total;
      bool c_share = true;
      for (auto c : {ServiceCategory::VO, ServiceCategory::VI, ServiceCategory::HDMAP})
        c_share &= be_share < s.per_category[index_of(c)].mean_throughput / total;
      if (!c_vo) ++clause_failures["VO<VI,HDMAP"];
      if (!c_similar) ++clause_failures["VI~HDMAP"];
      if (!c_be) ++clause_failures["BE>VI,HDMAP"];
      if (!c_share) ++clause_failures["BE share lowest"];
      seed_ok &= c_vo && c_similar && c_be && c_share;
    }
    seeds_ok += seed_ok;
  }
  const auto& s1 = directional_runs()[kSeeds[0]].by_tc["baseline_edca"];
  detail = std::to_string(seeds_ok) + "/5 seeds hold for EDCA and all RL topologies; clause misses over 25 runs:";
  for (const char* k : {"VO<VI,HDMAP", "VI~HDMAP", "BE>VI,HDMAP", "BE share lowest"})
    detail += std::string(" ") + k + "=" + std::to_string(clause_failures[k]);
  detail += "; EDCA seed 1 latency_s " + latencies(s1);
  return {seeds_ok >= kSeedsRequired, detail};
}

Verdict multi_vs_single() {
  int seeds_ok = 0;
  std::map<std::string, int> wins;
  for (auto seed : kSeeds) {
    const auto& pv = directional_runs()[seed].by_tc["tc3"];
    const auto& single = directional_runs()[seed].by_tc["single"];
    bool ok = true;
    for (auto c : {ServiceCategory::VO, ServiceCategory::VI, ServiceCategory::HDMAP}) {
      const bool lower = latency(pv, c) < latency(single, c);
      wins[std::string(to_string(c))] += lower;
      ok &= lower;
    }
    seeds_ok += ok;
  }
  return {seeds_ok >= kSeedsRequired, std::to_string(seeds_ok) + "/5 seeds lower on all three; per-category wins VO=" +
                                          std::to_string(wins["VO"]) + " VI=" + std::to_string(wins["VI"]) +
                                          " HDMAP=" + std::to_string(wins["HDMAP"])};
}

Verdict distributed_vs_centralized() {
  int seeds_ok = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& d = directional_runs()[seed].by_tc["tc4d"];
    const auto& c = directional_runs()[seed].by_tc["tc4c"];
    const bool ok = latency(d, ServiceCategory::VO) < latency(c, ServiceCategory::VO) && app_received(d) >= app_received(c);
    seeds_ok += ok;
    detail += " s" + std::to_string(seed) + ":VO " + num(latency(d, ServiceCategory::VO), 3) + "<" +
              num(latency(c, ServiceCategory::VO), 3) + " rx " + std::to_string(app_received(d)) +
              ">=" + std::to_string(app_received(c));
  }
  return {seeds_ok >= kSeedsRequired, std::to_string(seeds_ok) + "/5 seeds;" + detail};
}

// -- 10 ---------------------------------------------------------------------

Verdict lifetime() {
  const int init = EdgeConfig{}.active_init_ticks;
  bool ok = true;
  std::string why;

  // A vehicle heard once and then silent.
  {
    ActiveUserMap m(init);
    m.observe(7, ServiceCategory::VO);
    for (int t = 1; t <= init; ++t) {
      m.tick();
      const bool present = m.contains(7);
      if (t < init && !present) ok = false, why = "disappeared early";
      if (t == init && present) ok = false, why = "survived the C_init-th tick";
    }
  }

  // Randomized trace against an independent model of the expiry rule.
  EdgeServer edge(EdgeConfig{init, 1.0, 1.0});
  RngStream rng(77, "lifetime-trace");
  std::map<int, int> silent;  // ticks since last packet
  std::map<int, ServiceCategory> cat;
  int sum_checks = 0;
  for (int t = 0; t < kLifetimeTicks && ok; ++t) {
    const int packets = static_cast<int>(rng.uniform_int(0, 20));
    for (int k = 0; k < packets; ++k) {
      DeliveryRecord d;
      d.vehicle_id = static_cast<int>(rng.uniform_int(0, 60));
      d.category = static_cast<ServiceCategory>(rng.uniform_int(0, 3));
      d.is_control = rng.uniform() < 0.1;
      edge.record_delivery(d);
      if (!d.is_control) {
        silent[d.vehicle_id] = 0;
        cat[d.vehicle_id] = d.category;
      }
    }
    edge.tick();
    for (auto it = silent.begin(); it != silent.end();) {
      if (++it->second >= init) {
        it = silent.erase(it);
      } else {
        ++it;
      }
    }
    const auto counts = edge.counts();
    int sum = 0;
    for (int n : counts.per_category) sum += n;
    ++sum_checks;
    if (sum != counts.total) ok = false, why = "T_v != sum T_cv at tick " + std::to_string(t);
    if (counts.total != static_cast<int>(silent.size())) ok = false, why = "membership mismatch at tick " + std::to_string(t);
    for (const auto& [id, n] : silent)
      if (!edge.users().contains(id)) ok = false, why = "vehicle " + std::to_string(id) + " missing";
  }
  return {ok, ok ? "C_init=" + std::to_string(init) + "; T_v = sum T_cv at " + std::to_string(sum_checks) + " ticks"
                 : why};
}

}  // namespace

int main() {
  std::cout << "acceptance suite: 10 criteria" << std::endl;
  criterion(1, "state-space sizes 200000 / 50000", state_space);
  criterion(2, "Q-learning matches value iteration", q_learning_oracle);
  criterion(3, "action-to-wait mapping", wait_mapping);
  criterion(4, "reward arithmetic and shared rewards", reward_arithmetic);
  criterion(5, "Jain fairness oracle", jain_oracle);
  criterion(6, "conservation and determinism (desk scale)", conservation_and_determinism);
  criterion(7, "priority ordering VO < VI ~ HDMAP < BE", priority_ordering);
  criterion(8, "per-vehicle agents beat a single agent", multi_vs_single);
  criterion(9, "distributed beats centralized under control overhead", distributed_vs_centralized);
  criterion(10, "active-user lifetime and T_v = sum T_cv", lifetime);
  std::cout << (10 - failures) << "/10 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
