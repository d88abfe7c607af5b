#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "category.hpp"
#include "edge_server.hpp"
#include "mobility.hpp"
#include "sim_core.hpp"
#include "text_io.hpp"

namespace vanetq {

enum class TopologyMode : std::uint8_t { SINGLE, PER_CATEGORY, PER_VEHICLE_CENTRALIZED, PER_VEHICLE_DISTRIBUTED };
enum class RewardGranularity : std::uint8_t { NODE_SPECIFIC, OVERALL, PER_CATEGORY };

constexpr std::string_view to_string(TopologyMode m) {
  switch (m) {
    case TopologyMode::SINGLE: return "SINGLE";
    case TopologyMode::PER_CATEGORY: return "PER_CATEGORY";
    case TopologyMode::PER_VEHICLE_CENTRALIZED: return "PER_VEHICLE_CENTRALIZED";
    case TopologyMode::PER_VEHICLE_DISTRIBUTED: return "PER_VEHICLE_DISTRIBUTED";
  }
  return "?";
}

constexpr std::string_view to_string(RewardGranularity g) {
  switch (g) {
    case RewardGranularity::NODE_SPECIFIC: return "NODE_SPECIFIC";
    case RewardGranularity::OVERALL: return "OVERALL";
    case RewardGranularity::PER_CATEGORY: return "PER_CATEGORY";
  }
  return "?";
}

inline std::optional<TopologyMode> parse_topology(std::string_view s) {
  for (auto m : {TopologyMode::SINGLE, TopologyMode::PER_CATEGORY, TopologyMode::PER_VEHICLE_CENTRALIZED,
                 TopologyMode::PER_VEHICLE_DISTRIBUTED})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline std::optional<RewardGranularity> parse_granularity(std::string_view s) {
  for (auto g : {RewardGranularity::NODE_SPECIFIC, RewardGranularity::OVERALL, RewardGranularity::PER_CATEGORY})
    if (to_string(g) == s) return g;
  return std::nullopt;
}

struct AgentTopology {
  TopologyMode mode = TopologyMode::SINGLE;
  RewardGranularity reward_granularity = RewardGranularity::OVERALL;

  /// Everything except distributed per-vehicle learning keeps agents at the edge.
  bool centralized() const { return mode != TopologyMode::PER_VEHICLE_DISTRIBUTED; }
  bool per_vehicle() const {
    return mode == TopologyMode::PER_VEHICLE_CENTRALIZED || mode == TopologyMode::PER_VEHICLE_DISTRIBUTED;
  }
  bool operator==(const AgentTopology&) const = default;
};

// ---------------------------------------------------------------------------
// State

inline constexpr int kMaxActiveCount = 100;

/// Discrete observation of one agent. The category is part of the state only
/// for the single agent; split agents already own exactly one category.
struct AgentState {
  int sojourn = 0;         // {0..4}
  int total_active = 0;    // T_v, clamped to [0, 100]
  std::optional<ServiceCategory> category;
  int category_active = 0; // T_cv, clamped to [0, 100]

  bool operator==(const AgentState&) const = default;

  std::uint32_t key() const {
    const std::uint32_t cat = category ? static_cast<std::uint32_t>(index_of(*category)) + 1 : 0;
    return static_cast<std::uint32_t>(sojourn) | static_cast<std::uint32_t>(total_active) << 3 | cat << 10 |
           static_cast<std::uint32_t>(category_active) << 13;
  }

  static AgentState from_key(std::uint32_t k) {
    AgentState s;
    s.sojourn = static_cast<int>(k & 0x7u);
    s.total_active = static_cast<int>((k >> 3) & 0x7Fu);
    const std::uint32_t cat = (k >> 10) & 0x7u;
    if (cat != 0) s.category = static_cast<ServiceCategory>(cat - 1);
    s.category_active = static_cast<int>((k >> 13) & 0x7Fu);
    return s;
  }
};

inline AgentState build_state(SojournLevel sojourn, const ActiveCounts& counts, ServiceCategory c,
                              const AgentTopology& topology) {
  AgentState s;
  s.sojourn = sojourn.level;
  s.total_active = std::clamp(counts.total, 0, kMaxActiveCount);
  s.category_active = std::clamp(counts.per_category[index_of(c)], 0, kMaxActiveCount);
  if (topology.mode == TopologyMode::SINGLE) s.category = c;
  return s;
}

/// Product of the per-feature cardinalities.
inline std::uint64_t state_space_size(std::uint64_t sojourn_levels, std::uint64_t total_active_levels,
                                      std::uint64_t category_active_levels, std::uint64_t categories,
                                      bool with_category) {
  std::uint64_t n = sojourn_levels * total_active_levels * category_active_levels;
  return with_category ? n * categories : n;
}

// ---------------------------------------------------------------------------
// Q-table and learning

struct LearningParams {
  double learning_rate = 0.1;
  double discount = 0.99;
  double epsilon = 0.2;
  int max_action = 16;  // actions are {0..max_action}

  void validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw std::invalid_argument("learning_rate must be in (0,1]");
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must be in [0,1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0,1]");
    if (max_action < 1) throw std::invalid_argument("max_action must be >= 1");
  }

  bool operator==(const LearningParams&) const = default;
};

/// Sparse zero-initialised action-value table.
class QTable {
 public:
  explicit QTable(int num_actions = 17) : num_actions_(num_actions) {
    if (num_actions < 1) throw std::invalid_argument("QTable needs at least one action");
  }

  int num_actions() const { return num_actions_; }

  double get(const AgentState& s, int a) const {
    check_action(a);
    auto it = rows_.find(s.key());
    return it == rows_.end() ? 0.0 : it->second[a];
  }

  void set(const AgentState& s, int a, double v) {
    check_action(a);
    row_for(s)[a] = v;
  }

  /// Row of action values; all zeros when the state is unvisited.
  std::span<const double> row(const AgentState& s) const {
    auto it = rows_.find(s.key());
    if (it == rows_.end()) {
      zeros_.assign(num_actions_, 0.0);
      return zeros_;
    }
    return it->second;
  }

  double max_value(const AgentState& s) const {
    auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }

  std::size_t visited_states() const { return rows_.size(); }
  std::size_t stored_values() const { return rows_.size() * static_cast<std::size_t>(num_actions_); }

  /// Visited states in ascending key order.
  std::vector<AgentState> states() const {
    std::vector<std::uint32_t> keys;
    keys.reserve(rows_.size());
    for (const auto& [k, v] : rows_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::vector<AgentState> out;
    out.reserve(keys.size());
    for (auto k : keys) out.push_back(AgentState::from_key(k));
    return out;
  }

  bool operator==(const QTable& o) const { return num_actions_ == o.num_actions_ && rows_ == o.rows_; }

 private:
  void check_action(int a) const {
    if (a < 0 || a >= num_actions_) throw std::out_of_range("action index out of range");
  }

  std::vector<double>& row_for(const AgentState& s) {
    auto [it, inserted] = rows_.try_emplace(s.key());
    if (inserted) it->second.assign(num_actions_, 0.0);
    return it->second;
  }

  int num_actions_;
  std::unordered_map<std::uint32_t, std::vector<double>> rows_;
  mutable std::vector<double> zeros_;
};

/// Index of the largest value; ties resolve to the lowest index.
inline int greedy_action(std::span<const double> row) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(row.size()); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

/// Epsilon-greedy selection.
inline int choose_action(const QTable& q, const AgentState& s, double epsilon, RngStream& rng) {
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    return static_cast<int>(rng.uniform_int(0, q.num_actions() - 1));
  }
  return greedy_action(q.row(s));
}

/// Linear map from action index to waiting time: a * w_max / max_action.
inline double action_to_wait(int a, double max_wait, int max_action) {
  if (a < 0 || a > max_action) throw std::out_of_range("action outside {0..max_action}");
  return a * (max_wait / max_action);
}

/// One temporal-difference update. A missing next state marks a terminal
/// transition (the vehicle left coverage) and bootstraps from zero.
inline void q_update(QTable& q, const AgentState& s, int a, double reward, const std::optional<AgentState>& next,
                     const LearningParams& p) {
  if (!std::isfinite(reward)) throw std::invalid_argument("non-finite reward");
  const double target = next ? p.discount * q.max_value(*next) : 0.0;
  const double old = q.get(s, a);
  q.set(s, a, old + p.learning_rate * (reward + target - old));
}

// ---------------------------------------------------------------------------
// Rewards

struct RewardConfig {
  double alpha1 = 0.3;  // throughput weight
  double alpha2 = 0.7;  // latency weight
  double bonus = 0.5;
  double penalty = 1.0;
  double ratio_clip = 10.0;
  bool reuse_on_no_sample = true;  // false: skip the update instead

  void validate() const {
    if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw std::invalid_argument("reward weights must be positive");
    if (bonus < 0.0 || penalty < 0.0) throw std::invalid_argument("bonus and penalty must be >= 0");
    if (!(ratio_clip > 0.0)) throw std::invalid_argument("ratio_clip must be positive");
  }

  bool operator==(const RewardConfig&) const = default;
};

/// Shaping term: bonus when both targets are met, penalty on a latency miss.
inline double penalty_bonus(double latency, double throughput, const CategoryProfile& target,
                            const RewardConfig& cfg) {
  if (latency > target.latency_max_s) return -cfg.penalty;
  if (throughput >= target.throughput_min_bps) return cfg.bonus;
  return 0.0;
}

/// Weighted throughput ratio minus weighted latency ratio plus shaping, with
/// both ratios clipped.
inline double utility(double latency, double throughput, const CategoryProfile& target, const RewardConfig& cfg,
                      bool shaping = true) {
  const double r_ratio = std::min(throughput / target.throughput_min_bps, cfg.ratio_clip);
  const double l_ratio = std::min(latency / target.latency_max_s, cfg.ratio_clip);
  const double f = shaping ? penalty_bonus(latency, throughput, target, cfg) : 0.0;
  return cfg.alpha1 * r_ratio - cfg.alpha2 * l_ratio + f;
}

/// Per-vehicle reward from the vehicle's own window statistics.
/// Empty when the vehicle had no delivery in the window.
inline std::optional<double> reward_node_specific(const std::optional<VehicleStats>& vehicle,
                                                  const CategoryProfile& target, const RewardConfig& cfg,
                                                  bool shaping = true) {
  if (!vehicle || !vehicle->mean_latency) return std::nullopt;
  return utility(*vehicle->mean_latency, vehicle->throughput_bps, target, cfg, shaping);
}

/// Reward from the edge's per-category averages, judged against the
/// thresholds of the vehicle's category.
inline std::optional<double> reward_overall(const NetworkStats& stats, ServiceCategory c,
                                            const CategoryProfile& target, const RewardConfig& cfg,
                                            bool shaping = true) {
  const auto& cs = stats.per_category[index_of(c)];
  if (!cs.mean_latency) return std::nullopt;
  return utility(*cs.mean_latency, cs.throughput_bps, target, cfg, shaping);
}

/// Reward of a per-category agent, judged against its own thresholds.
inline std::optional<double> reward_per_category(const NetworkStats& stats, ServiceCategory agent_category,
                                                 const PerCategory<CategoryProfile>& profiles,
                                                 const RewardConfig& cfg, bool shaping = true) {
  return reward_overall(stats, agent_category, profiles[index_of(agent_category)], cfg, shaping);
}

// ---------------------------------------------------------------------------
// Control traffic

struct ControlTrafficConfig {
  int uplink_bytes = 200;
  int downlink_bytes = 100;
  int broadcast_bytes = 300;

  bool operator==(const ControlTrafficConfig&) const = default;
};

inline constexpr int kRsuStation = 0;

struct ControlEmission {
  int src_station;
  int size;
  bool operator==(const ControlEmission&) const = default;
};

/// Control frames caused by one decision epoch of the given vehicles and, when
/// `tick` is set, by a statistics tick. Edge-hosted agents exchange a report
/// and an action per vehicle decision; on-board agents only need the edge's
/// periodic broadcast.
inline std::vector<ControlEmission> emit_control_traffic(const AgentTopology& topology,
                                                         std::span<const int> deciding_stations, bool tick,
                                                         const ControlTrafficConfig& cfg = {}) {
  std::vector<ControlEmission> out;
  if (topology.centralized()) {
    for (int st : deciding_stations) {
      out.push_back({st, cfg.uplink_bytes});
      out.push_back({kRsuStation, cfg.downlink_bytes});
    }
  } else if (tick) {
    out.push_back({kRsuStation, cfg.broadcast_bytes});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agents

/// Identifies the Q-table that acts for a vehicle under a topology.
struct AgentId {
  TopologyMode mode = TopologyMode::SINGLE;
  int index = 0;  // 0, category index, or vehicle id

  std::string label() const {
    switch (mode) {
      case TopologyMode::SINGLE: return "single";
      case TopologyMode::PER_CATEGORY: return std::string("category-") + std::string(to_string(static_cast<ServiceCategory>(index)));
      default: return "vehicle-" + std::to_string(index);
    }
  }

  auto operator<=>(const AgentId&) const = default;
};

inline AgentId agent_for(const AgentTopology& t, int vehicle_id, ServiceCategory c) {
  switch (t.mode) {
    case TopologyMode::SINGLE: return {t.mode, 0};
    case TopologyMode::PER_CATEGORY: return {t.mode, static_cast<int>(index_of(c))};
    default: return {t.mode, vehicle_id};
  }
}

struct Agent {
  QTable table;
  RngStream explore;
};

/// Owns the independent learners of one run. Tables persist across episodes.
class AgentPool {
 public:
  AgentPool(AgentTopology topology, LearningParams params, std::uint64_t seed)
      : topology_(topology), params_(params), seed_(seed) {
    params_.validate();
    if (topology_.mode == TopologyMode::PER_CATEGORY) {
      for (auto c : kAllCategories) agent(agent_for(topology_, 0, c));
    } else if (topology_.mode == TopologyMode::SINGLE) {
      agent(agent_for(topology_, 0, ServiceCategory::VO));
    }
  }

  Agent& agent(const AgentId& id) {
    auto it = agents_.find(id);
    if (it == agents_.end()) {
      it = agents_.emplace(id, Agent{QTable(params_.max_action + 1), derive_stream(seed_, "explore/" + id.label())})
               .first;
    }
    return it->second;
  }

  Agent& agent_for_vehicle(int vehicle_id, ServiceCategory c) { return agent(agent_for(topology_, vehicle_id, c)); }

  const std::map<AgentId, Agent>& agents() const { return agents_; }
  std::size_t size() const { return agents_.size(); }
  const AgentTopology& topology() const { return topology_; }
  const LearningParams& params() const { return params_; }

 private:
  AgentTopology topology_;
  LearningParams params_;
  std::uint64_t seed_;
  std::map<AgentId, Agent> agents_;
};

// ---------------------------------------------------------------------------
// Snapshots: `sojourn,total_active,category,category_active,action,q_value`

inline void write_qtable(std::ostream& out, const QTable& q) {
  out << "sojourn,total_active,category,category_active,action,q_value\n";
  for (const auto& s : q.states()) {
    auto row = q.row(s);
    for (int a = 0; a < q.num_actions(); ++a) {
      out << s.sojourn << ',' << s.total_active << ',' << (s.category ? to_string(*s.category) : "-") << ','
          << s.category_active << ',' << a << ',' << format_double(row[a]) << '\n';
    }
  }
}

inline QTable read_qtable(std::istream& in, int num_actions) {
  QTable q(num_actions);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || trim(line).empty()) continue;
    auto f = split(line, ',');
    auto fail = [&] { throw std::runtime_error("q-table line " + std::to_string(lineno) + ": malformed record"); };
    if (f.size() != 6) fail();
    AgentState s;
    auto soj = parse_int<int>(f[0]);
    auto tv = parse_int<int>(f[1]);
    auto tcv = parse_int<int>(f[3]);
    auto a = parse_int<int>(f[4]);
    auto v = parse_double(f[5]);
    if (!soj || !tv || !tcv || !a || !v) fail();
    if (*soj < 0 || *soj >= kSojournLevels || *tv < 0 || *tv > kMaxActiveCount || *tcv < 0 ||
        *tcv > kMaxActiveCount)
      fail();
    s.sojourn = *soj;
    s.total_active = *tv;
    s.category_active = *tcv;
    if (f[2] != "-") {
      auto c = parse_category(f[2]);
      if (!c) fail();
      s.category = c;
    }
    q.set(s, *a, *v);
  }
  return q;
}

}  // namespace vanetq
