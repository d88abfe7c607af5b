#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "category.hpp"
#include "channel.hpp"
#include "edge_server.hpp"
#include "mobility.hpp"
#include "rl.hpp"
#include "text_io.hpp"

namespace vanetq {

enum class EpisodeMode : std::uint8_t { REPLAY, FRESH };

constexpr std::string_view to_string(EpisodeMode m) { return m == EpisodeMode::REPLAY ? "REPLAY" : "FRESH"; }

/// Everything one run needs. Defaults reproduce the reference setup.
struct Scenario {
  std::string name = "scenario";
  Discipline discipline = Discipline::NON_QOS;
  std::optional<TopologyMode> topology;
  std::optional<RewardGranularity> reward_granularity;
  int episodes = 50;
  int warmup_episodes = 10;
  double episode_duration = 250.0;
  std::uint64_t seed = 1;
  EpisodeMode episode_mode = EpisodeMode::REPLAY;
  std::string trace_file;  // empty: generated arrivals
  int max_vehicles = 0;    // 0: unbounded

  KinematicsConfig kinematics;
  ChannelConfig channel;
  EdgeConfig edge;
  LearningParams learning;
  RewardConfig reward;
  ControlTrafficConfig control;
  PerCategory<CategoryProfile> profiles = default_profiles();

  bool operator==(const Scenario&) const = default;

  /// Topology with the granularity default filled in. Only meaningful for RL.
  AgentTopology agent_topology() const {
    AgentTopology t;
    t.mode = topology.value_or(TopologyMode::SINGLE);
    if (reward_granularity) {
      t.reward_granularity = *reward_granularity;
    } else {
      t.reward_granularity =
          t.mode == TopologyMode::PER_CATEGORY ? RewardGranularity::PER_CATEGORY : RewardGranularity::OVERALL;
    }
    return t;
  }

  /// Pooled (post-warmup) episode range is [warmup_episodes, episodes).
  int pooled_from() const { return warmup_episodes; }

  /// Identity of the offered traffic; runs are comparable only when equal.
  std::string traffic_signature() const {
    std::ostringstream s;
    s << "seed=" << seed << ";duration=" << format_double(episode_duration) << ";episodes=" << episodes
      << ";warmup=" << warmup_episodes << ";mode=" << to_string(episode_mode)
      << ";interval=" << format_double(kinematics.entry_interval) << ";max_vehicles=" << max_vehicles
      << ";trace=" << trace_file;
    return s.str();
  }
};

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& origin, int line, const std::string& msg)
      : std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

struct Field {
  std::string key;
  std::function<std::optional<std::string>(const Scenario&)> get;  // nullopt: not written
  std::function<void(Scenario&, std::string_view)> set;            // throws std::invalid_argument
};

inline double to_real(std::string_view v) {
  auto d = parse_double(v);
  if (!d) throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
  return *d;
}

inline long long to_integer(std::string_view v) {
  auto i = parse_int<long long>(v);
  if (!i) throw std::invalid_argument("expected an integer, got '" + std::string(v) + "'");
  return *i;
}

template <typename Get, typename Ref>
Field real_field(std::string key, Get get, Ref ref, double lo, double hi, bool lo_open = false) {
  return Field{key, [get](const Scenario& s) -> std::optional<std::string> { return format_double(get(s)); },
               [ref, lo, hi, lo_open, key](Scenario& s, std::string_view v) {
                 const double d = to_real(v);
                 const bool low_ok = lo_open ? d > lo : d >= lo;
                 if (!low_ok || d > hi) {
                   throw std::invalid_argument(key + " = " + std::string(v) + " is out of range " +
                                               (lo_open ? "(" : "[") + format_double(lo) + ", " +
                                               format_double(hi) + "]");
                 }
                 ref(s) = d;
               }};
}

template <typename Get, typename Ref>
Field int_field(std::string key, Get get, Ref ref, long long lo, long long hi) {
  return Field{key, [get](const Scenario& s) -> std::optional<std::string> { return std::to_string(get(s)); },
               [ref, lo, hi, key](Scenario& s, std::string_view v) {
                 const long long i = to_integer(v);
                 if (i < lo || i > hi) {
                   throw std::invalid_argument(key + " = " + std::string(v) + " is out of range [" +
                                               std::to_string(lo) + ", " + std::to_string(hi) + "]");
                 }
                 ref(s) = static_cast<std::remove_reference_t<decltype(ref(s))>>(i);
               }};
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"name", [](const Scenario& s) -> std::optional<std::string> { return s.name; },
                 [](Scenario& s, std::string_view v) {
                   if (v.empty()) throw std::invalid_argument("name must not be empty");
                   s.name = std::string(v);
                 }});
    f.push_back({"discipline",
                 [](const Scenario& s) -> std::optional<std::string> { return std::string(to_string(s.discipline)); },
                 [](Scenario& s, std::string_view v) {
                   for (auto d : {Discipline::NON_QOS, Discipline::EDCA, Discipline::RL}) {
                     if (to_string(d) == v) {
                       s.discipline = d;
                       return;
                     }
                   }
                   throw std::invalid_argument("unknown discipline '" + std::string(v) + "'");
                 }});
    f.push_back({"topology",
                 [](const Scenario& s) -> std::optional<std::string> {
                   if (!s.topology) return std::nullopt;
                   return std::string(to_string(*s.topology));
                 },
                 [](Scenario& s, std::string_view v) {
                   auto t = parse_topology(v);
                   if (!t) throw std::invalid_argument("unknown topology '" + std::string(v) + "'");
                   s.topology = t;
                 }});
    f.push_back({"reward_granularity",
                 [](const Scenario& s) -> std::optional<std::string> {
                   if (!s.reward_granularity) return std::nullopt;
                   return std::string(to_string(*s.reward_granularity));
                 },
                 [](Scenario& s, std::string_view v) {
                   auto g = parse_granularity(v);
                   if (!g) throw std::invalid_argument("unknown reward_granularity '" + std::string(v) + "'");
                   s.reward_granularity = g;
                 }});
    f.push_back(int_field("episodes", [](const Scenario& s) { return s.episodes; },
                          [](Scenario& s) -> int& { return s.episodes; }, 1, 1000000));
    f.push_back(int_field("warmup_episodes", [](const Scenario& s) { return s.warmup_episodes; },
                          [](Scenario& s) -> int& { return s.warmup_episodes; }, 0, 1000000));
    f.push_back(real_field("episode_duration", [](const Scenario& s) { return s.episode_duration; },
                           [](Scenario& s) -> double& { return s.episode_duration; }, 0.0, 1e7, true));
    f.push_back({"seed", [](const Scenario& s) -> std::optional<std::string> { return std::to_string(s.seed); },
                 [](Scenario& s, std::string_view v) {
                   auto i = parse_int<std::uint64_t>(v);
                   if (!i) throw std::invalid_argument("seed must be a non-negative integer");
                   s.seed = *i;
                 }});
    f.push_back({"episode_mode",
                 [](const Scenario& s) -> std::optional<std::string> { return std::string(to_string(s.episode_mode)); },
                 [](Scenario& s, std::string_view v) {
                   if (v == "REPLAY") {
                     s.episode_mode = EpisodeMode::REPLAY;
                   } else if (v == "FRESH") {
                     s.episode_mode = EpisodeMode::FRESH;
                   } else {
                     throw std::invalid_argument("episode_mode must be REPLAY or FRESH");
                   }
                 }});
    f.push_back({"trace_file",
                 [](const Scenario& s) -> std::optional<std::string> {
                   if (s.trace_file.empty()) return std::nullopt;
                   return s.trace_file;
                 },
                 [](Scenario& s, std::string_view v) { s.trace_file = std::string(v); }});
    f.push_back(int_field("max_vehicles", [](const Scenario& s) { return s.max_vehicles; },
                          [](Scenario& s) -> int& { return s.max_vehicles; }, 0, 100000000));

#define VQ_REAL(KEY, MEMBER, LO, HI, OPEN)                                                   \
  f.push_back(real_field(KEY, [](const Scenario& s) { return s.MEMBER; },                    \
                         [](Scenario& s) -> double& { return s.MEMBER; }, LO, HI, OPEN))
#define VQ_INT(KEY, MEMBER, LO, HI)                                                          \
  f.push_back(int_field(KEY, [](const Scenario& s) { return s.MEMBER; },                     \
                        [](Scenario& s) -> int& { return s.MEMBER; }, LO, HI))

    VQ_REAL("v_max", kinematics.v_max, 0.0, kInf, true);
    VQ_REAL("accel", kinematics.accel, 0.0, kInf, true);
    VQ_REAL("decel", kinematics.decel, 0.0, kInf, true);
    VQ_REAL("entry_interval", kinematics.entry_interval, 0.0, kInf, true);
    VQ_REAL("entry_speed", kinematics.entry_speed, 0.0, kInf, false);
    VQ_REAL("coverage_radius", kinematics.coverage_radius, 0.0, kInf, true);
    VQ_REAL("tile_length", kinematics.tile_length, 0.0, kInf, true);
    VQ_REAL("tile_width", kinematics.tile_width, 0.0, kInf, true);
    VQ_REAL("sojourn_cap", kinematics.sojourn_cap, 0.0, kInf, true);

    VQ_REAL("phy_rate", channel.phy_rate, 0.0, kInf, true);
    VQ_REAL("slot_time", channel.slot_time, 0.0, 1.0, true);
    VQ_REAL("sifs", channel.sifs, 0.0, 1.0, true);
    VQ_REAL("bandwidth", channel.bandwidth, 0.0, kInf, true);
    VQ_REAL("tx_power", channel.tx_power, 0.0, kInf, true);
    VQ_REAL("frequency", channel.frequency, 0.0, kInf, true);
    VQ_REAL("frame_overhead", channel.frame_overhead, 0.0, 1.0, false);
    VQ_INT("packet_size", channel.packet_size, 1, 65535);
    VQ_INT("queue_capacity", channel.queue_capacity, 1, 1000000);
    VQ_INT("retry_limit", channel.retry_limit, 0, 1000);
    f.push_back({"backoff",
                 [](const Scenario& s) -> std::optional<std::string> {
                   return std::string(s.channel.persistent_backoff ? "persistent" : "redraw");
                 },
                 [](Scenario& s, std::string_view v) {
                   if (v == "redraw") {
                     s.channel.persistent_backoff = false;
                   } else if (v == "persistent") {
                     s.channel.persistent_backoff = true;
                   } else {
                     throw std::invalid_argument("backoff must be redraw or persistent");
                   }
                 }});

    VQ_INT("active_init_ticks", edge.active_init_ticks, 1, 1000000);
    VQ_REAL("tick_period", edge.tick_period, 0.0, kInf, true);
    VQ_REAL("stats_window", edge.stats_window, 0.0, kInf, true);

    VQ_REAL("learning_rate", learning.learning_rate, 0.0, 1.0, true);
    VQ_REAL("discount", learning.discount, 0.0, 0.999999999, false);
    VQ_REAL("epsilon", learning.epsilon, 0.0, 1.0, false);
    VQ_INT("max_action", learning.max_action, 1, 10000);

    VQ_REAL("alpha1", reward.alpha1, 0.0, kInf, true);
    VQ_REAL("alpha2", reward.alpha2, 0.0, kInf, true);
    VQ_REAL("bonus", reward.bonus, 0.0, kInf, false);
    VQ_REAL("penalty", reward.penalty, 0.0, kInf, false);
    VQ_REAL("ratio_clip", reward.ratio_clip, 0.0, kInf, true);
    f.push_back({"no_sample",
                 [](const Scenario& s) -> std::optional<std::string> {
                   return std::string(s.reward.reuse_on_no_sample ? "reuse" : "skip");
                 },
                 [](Scenario& s, std::string_view v) {
                   if (v == "reuse") {
                     s.reward.reuse_on_no_sample = true;
                   } else if (v == "skip") {
                     s.reward.reuse_on_no_sample = false;
                   } else {
                     throw std::invalid_argument("no_sample must be reuse or skip");
                   }
                 }});

    VQ_INT("control_uplink_bytes", control.uplink_bytes, 1, 65535);
    VQ_INT("control_downlink_bytes", control.downlink_bytes, 1, 65535);
    VQ_INT("control_broadcast_bytes", control.broadcast_bytes, 1, 65535);
#undef VQ_REAL
#undef VQ_INT

    for (auto c : kAllCategories) {
      const std::string p = std::string(to_string(c)) + ".";
      const std::size_t i = index_of(c);
      auto add = [&](const std::string& suffix, double CategoryProfile::*m) {
        f.push_back(real_field(
            p + suffix, [i, m](const Scenario& s) { return s.profiles[i].*m; },
            [i, m](Scenario& s) -> double& { return s.profiles[i].*m; }, 0.0, kInf, true));
      };
      add("data_rate", &CategoryProfile::data_rate_bps);
      add("max_wait", &CategoryProfile::max_wait_s);
      add("throughput_min", &CategoryProfile::throughput_min_bps);
      add("latency_max", &CategoryProfile::latency_max_s);
    }
    return f;
  }();
  return table;
}

}  // namespace detail

/// Cross-field checks that a single key cannot express.
inline void validate(const Scenario& s, const std::string& origin = "<scenario>",
                     const std::map<std::string, int>& lines = {}) {
  auto line_of = [&](const std::string& k) {
    auto it = lines.find(k);
    return it == lines.end() ? 0 : it->second;
  };
  if (s.discipline == Discipline::RL) {
    if (!s.topology) throw ScenarioError(origin, line_of("discipline"), "missing required key 'topology' for discipline = RL");
  } else {
    if (s.topology)
      throw ScenarioError(origin, line_of("topology"), "'topology' requires discipline = RL");
    if (s.reward_granularity)
      throw ScenarioError(origin, line_of("reward_granularity"), "'reward_granularity' requires discipline = RL");
  }
  if (s.warmup_episodes >= s.episodes)
    throw ScenarioError(origin, line_of("warmup_episodes"), "warmup_episodes must be smaller than episodes");
  if (s.kinematics.entry_speed > s.kinematics.v_max)
    throw ScenarioError(origin, line_of("entry_speed"), "entry_speed must not exceed v_max");
  if (s.kinematics.coverage_radius > s.kinematics.tile_length / 2.0)
    throw ScenarioError(origin, line_of("coverage_radius"), "coverage must fit inside the tile");
}

inline Scenario parse_scenario(std::istream& in, const std::string& origin = "<scenario>") {
  Scenario s;
  std::map<std::string, int> lines;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ScenarioError(origin, lineno, "expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    const std::string_view value = trim(body.substr(eq + 1));
    if (lines.count(key)) throw ScenarioError(origin, lineno, "duplicate key '" + key + "'");
    const auto& table = detail::fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const detail::Field& f) { return f.key == key; });
    if (it == table.end()) throw ScenarioError(origin, lineno, "unknown key '" + key + "'");
    try {
      it->set(s, value);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(origin, lineno, e.what());
    }
    lines[key] = lineno;
  }
  validate(s, origin, lines);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, 0, "cannot open scenario file");
  return parse_scenario(in, path);
}

/// Applies one `key = value` override on top of an already loaded scenario.
/// Cross-field checks are left to validate().
inline void set_field(Scenario& s, const std::string& key, std::string_view value,
                      const std::string& origin = "<override>") {
  const auto& table = detail::fields();
  auto it = std::find_if(table.begin(), table.end(), [&](const detail::Field& f) { return f.key == key; });
  if (it == table.end()) throw ScenarioError(origin, 0, "unknown key '" + key + "'");
  try {
    it->set(s, trim(value));
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(origin, 0, e.what());
  }
}

inline void write_scenario(std::ostream& out, const Scenario& s) {
  for (const auto& f : detail::fields()) {
    if (auto v = f.get(s)) out << f.key << " = " << *v << '\n';
  }
}

inline std::string scenario_to_string(const Scenario& s) {
  std::ostringstream out;
  write_scenario(out, s);
  return out.str();
}

inline const std::vector<std::string>& testcase_names() {
  static const std::vector<std::string> names{"tc1a", "tc1b", "tc2", "tc3", "tc4c", "tc4d",
                                              "baseline_nonqos", "baseline_edca", "single"};
  return names;
}

/// Preset wiring of each named experiment on top of `base`.
inline Scenario make_testcase(const std::string& name, Scenario base = {}) {
  Scenario s = std::move(base);
  s.name = name;
  s.topology.reset();
  s.reward_granularity.reset();
  auto rl = [&](TopologyMode m, RewardGranularity g) {
    s.discipline = Discipline::RL;
    s.topology = m;
    s.reward_granularity = g;
  };
  if (name == "tc1a") {
    rl(TopologyMode::PER_VEHICLE_CENTRALIZED, RewardGranularity::NODE_SPECIFIC);
  } else if (name == "tc1b" || name == "tc3" || name == "tc4c") {
    rl(TopologyMode::PER_VEHICLE_CENTRALIZED, RewardGranularity::OVERALL);
  } else if (name == "tc2") {
    rl(TopologyMode::PER_CATEGORY, RewardGranularity::PER_CATEGORY);
  } else if (name == "tc4d") {
    rl(TopologyMode::PER_VEHICLE_DISTRIBUTED, RewardGranularity::OVERALL);
  } else if (name == "single") {
    rl(TopologyMode::SINGLE, RewardGranularity::OVERALL);
  } else if (name == "baseline_nonqos") {
    s.discipline = Discipline::NON_QOS;
  } else if (name == "baseline_edca") {
    s.discipline = Discipline::EDCA;
  } else {
    throw std::invalid_argument("unknown test case '" + name + "'");
  }
  validate(s);
  return s;
}

}  // namespace vanetq
