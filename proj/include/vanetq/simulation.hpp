#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "category.hpp"
#include "channel.hpp"
#include "edge_server.hpp"
#include "metrics.hpp"
#include "mobility.hpp"
#include "rl.hpp"
#include "scenario.hpp"
#include "sim_core.hpp"

namespace vanetq {

namespace event {
struct Spawn { int vehicle; };
struct EnterCoverage { int vehicle; };
struct LeaveCoverage { int vehicle; };
struct LeaveRoute { int vehicle; };
struct Decide { int vehicle; };
struct Flush { int vehicle; };
struct ChannelRound {};
struct TxEnd {};
struct Tick {};
}  // namespace event

using Event = std::variant<event::Spawn, event::EnterCoverage, event::LeaveCoverage, event::LeaveRoute,
                           event::Decide, event::Flush, event::ChannelRound, event::TxEnd, event::Tick>;

/// Application bytes produced at `rate_bps` over `seconds`, rounded down.
inline std::uint64_t buffered_bytes(double rate_bps, double seconds) {
  if (seconds <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::floor(rate_bps / 8.0 * seconds));
}

/// Packets needed for `bytes` with full packets of `packet_size` and a short tail.
inline std::uint64_t packets_for(std::uint64_t bytes, int packet_size) {
  const auto size = static_cast<std::uint64_t>(packet_size);
  return bytes / size + (bytes % size ? 1 : 0);
}

/// One reward handed to an agent. `fresh` is false when the reward was carried
/// over from an earlier window because the current one had no sample.
struct RewardObservation {
  double time;
  int vehicle;
  ServiceCategory category;
  double reward;
  bool fresh;
};

struct RunResult {
  std::vector<RunReport> episodes;
  RunReport pooled;  // post-warmup episodes
};

/// One simulated RSU cell driven by a scenario. Agents (and their Q-tables)
/// live for the whole run; everything else is rebuilt per episode.
class Simulation {
 public:
  explicit Simulation(Scenario scenario, bool record_trace = false)
      : sc_(std::move(scenario)),
        record_trace_(record_trace),
        mac_rng_(derive_stream(sc_.seed, "mac")),
        category_rng_(derive_stream(sc_.seed, "category-assignment")) {
    validate(sc_);
    sc_.kinematics.validate();
    sc_.channel.validate();
    sc_.edge.validate();
    sc_.learning.validate();
    sc_.reward.validate();
    if (sc_.discipline == Discipline::RL) {
      agents_ = std::make_unique<AgentPool>(sc_.agent_topology(), sc_.learning, sc_.seed);
    }
    if (!sc_.trace_file.empty()) {
      arrivals_ = load_arrival_trace(sc_.trace_file);
    } else if (sc_.episode_mode == EpisodeMode::REPLAY) {
      arrivals_ = spawn_schedule(sc_.kinematics, sc_.episode_duration, category_rng_,
                                 static_cast<std::size_t>(sc_.max_vehicles));
    }
  }

  /// Overrides the arrival schedule (used by tests and the trace option).
  void set_arrivals(std::vector<Arrival> a) {
    arrivals_ = std::move(a);
    arrivals_fixed_ = true;
  }

  void set_reward_observer(std::function<void(const RewardObservation&)> fn) { reward_observer_ = std::move(fn); }

  const Scenario& scenario() const { return sc_; }
  const AgentPool* agents() const { return agents_.get(); }
  const std::vector<Packet>& trace() const { return trace_; }
  int episodes_run() const { return episode_; }

  RunResult run() {
    RunResult r;
    for (int e = 0; e < sc_.episodes; ++e) r.episodes.push_back(run_episode());
    r.pooled = pool_reports(std::span<const RunReport>(r.episodes).subspan(sc_.pooled_from()));
    return r;
  }

  /// Runs the next episode until the clock reaches the episode duration.
  RunReport run_episode() {
    reset_episode();
    while (!events_.empty() && events_.next_time() <= sc_.episode_duration) {
      auto rec = events_.pop();
      clock_.advance_to(rec.fire_time);
      std::visit([this](auto& ev) { handle(ev); }, rec.payload);
    }
    RunReport report = finish_episode();
    ++episode_;
    return report;
  }

  /// Vehicles spawned and not yet past the route end.
  int vehicles_in_environment() const { return spawned_ - route_exits_; }

 private:
  struct VehicleRuntime {
    Vehicle initial;
    int station = 0;
    bool in_coverage = false;
    bool left_coverage = false;
    double enter_time = 0.0;
    double leave_time = 0.0;
    std::uint64_t flushed_bytes = 0;
    EventHandle decide_event;
    EventHandle flush_event;
    bool decide_pending = false;
    bool flush_pending = false;
    std::optional<AgentState> pending_state;
    int pending_action = 0;
    std::optional<double> last_reward;
    double delivered_bits = 0.0;
  };

  // -- episode lifecycle -----------------------------------------------------

  void reset_episode() {
    clock_ = SimClock(sc_.episode_duration, episode_);
    events_ = EventQueue<Event>();
    channel_ = std::make_unique<Channel>(sc_.channel, sc_.discipline);
    channel_->attach(kRsuStation);
    edge_ = std::make_unique<EdgeServer>(sc_.edge);
    vehicles_.clear();
    log_.clear();
    trace_.clear();
    accounting_ = {};
    control_ = {};
    next_packet_id_ = 0;
    busy_ = false;
    round_scheduled_ = false;
    in_flight_.reset();
    spawned_ = 0;
    route_exits_ = 0;

    // Ticks go in first: at equal times they fire before any decision.
    for (long long k = 1; static_cast<double>(k) * sc_.edge.tick_period <= sc_.episode_duration; ++k)
      schedule(static_cast<double>(k) * sc_.edge.tick_period, event::Tick{});

    if (!arrivals_fixed_ && sc_.trace_file.empty() && sc_.episode_mode == EpisodeMode::FRESH) {
      arrivals_ = spawn_schedule(sc_.kinematics, sc_.episode_duration, category_rng_,
                                 static_cast<std::size_t>(sc_.max_vehicles));
    }
    for (std::size_t i = 0; i < arrivals_.size(); ++i) {
      if (arrivals_[i].entry_time > sc_.episode_duration) break;
      if (sc_.max_vehicles != 0 && static_cast<int>(i) >= sc_.max_vehicles) break;
      Vehicle v;
      v.id = static_cast<int>(i);
      v.category = arrivals_[i].category;
      v.entry_time = arrivals_[i].entry_time;
      v.speed = sc_.kinematics.entry_speed;
      v.route_length = sc_.kinematics.tile_length;
      VehicleRuntime rt;
      rt.initial = v;
      rt.station = v.id + 1;
      vehicles_.push_back(rt);
    }
    for (const auto& v : vehicles_) schedule(v.initial.entry_time, event::Spawn{v.initial.id});
  }

  RunReport finish_episode() {
    const double end = sc_.episode_duration;
    RunReport r;
    r.scenario_id = sc_.name;
    r.seed = sc_.seed;
    r.episode_index = episode_;
    r.duration = end;
    r.traffic_signature = sc_.traffic_signature();
    r.metadata = metadata();

    // Everything still waiting at the end is queued or buffered.
    PerCategory<Accounting> acc = accounting_;
    channel_->for_each_packet([&](const Packet& p) {
      if (p.is_control) return;
      auto& a = acc[index_of(p.category)];
      ++a.queued_packets;
      a.queued_bytes += static_cast<std::uint64_t>(p.size);
    });
    if (in_flight_ && !in_flight_->is_control) {
      auto& a = acc[index_of(in_flight_->category)];
      ++a.queued_packets;
      a.queued_bytes += static_cast<std::uint64_t>(in_flight_->size);
    }
    for (auto& v : vehicles_) {
      if (!v.in_coverage) continue;
      const std::uint64_t gen = generated_bytes(v, end);
      auto& a = acc[index_of(v.initial.category)];
      a.buffered_bytes += gen - v.flushed_bytes;
      a.generated_bytes += gen - v.flushed_bytes;
    }
    for (auto& v : vehicles_) {
      if (!v.in_coverage && !v.left_coverage) continue;
      VehicleUsage u;
      u.category = v.initial.category;
      u.delivered_bits = v.delivered_bits;
      u.coverage_time = (v.in_coverage ? end : v.leave_time) - v.enter_time;
      r.vehicles[v.initial.id] = u;
    }
    for (auto c : kAllCategories) {
      auto& cr = r.at(c);
      cr.accounting = acc[index_of(c)];
      cr.latency_series = latency_series(log_, c, sc_.edge.stats_window, end);
      cr.throughput_series = throughput_series(log_, c, sc_.edge.stats_window, end);
      for (const auto& d : log_)
        if (!d.is_control && d.category == c) cr.latency_samples.push_back(d.latency);
    }
    r.control = control_;
    finalize_report(r);
    return r;
  }

  std::map<std::string, std::string> metadata() const {
    std::map<std::string, std::string> m;
    m["discipline"] = std::string(to_string(sc_.discipline));
    m["episode_mode"] = std::string(to_string(sc_.episode_mode));
    if (agents_) {
      const auto& t = agents_->topology();
      m["topology"] = std::string(to_string(t.mode));
      m["reward_granularity"] = std::string(to_string(t.reward_granularity));
      m["agents"] = std::to_string(agents_->size());
      m["control_model"] = t.centralized() ? "per-decision-report-and-action" : "per-tick-broadcast";
    } else {
      m["agents"] = "0";
      m["control_model"] = "none";
    }
    return m;
  }

  // -- helpers ---------------------------------------------------------------

  template <typename E>
  EventHandle schedule(double t, E e) {
    return events_.schedule(clock_.now(), t, Event{e});
  }

  Vehicle vehicle_at(const VehicleRuntime& v, double t) const {
    const double dt = t - v.initial.entry_time;
    return dt > 0.0 ? advance(v.initial, dt, sc_.kinematics) : v.initial;
  }

  const CategoryProfile& profile(ServiceCategory c) const { return sc_.profiles[index_of(c)]; }

  std::uint64_t generated_bytes(const VehicleRuntime& v, double t) const {
    return buffered_bytes(profile(v.initial.category).data_rate_bps, t - v.enter_time);
  }

  void kick_channel() {
    if (busy_ || round_scheduled_) return;
    round_scheduled_ = true;
    schedule(clock_.now(), event::ChannelRound{});
  }

  void count_drop(const Packet& p) {
    if (p.is_control) {
      ++control_.dropped;
    } else {
      auto& a = accounting_[index_of(p.category)];
      ++a.dropped_packets;
      a.dropped_bytes += static_cast<std::uint64_t>(p.size);
    }
    if (record_trace_) trace_.push_back(p);
  }

  void send_control(int station, int size) {
    Packet p;
    p.id = next_packet_id_++;
    p.src = station;
    p.size = size;
    p.created_at = clock_.now();
    p.is_control = true;
    ++control_.sent;
    control_.bytes_sent += static_cast<std::uint64_t>(size);
    if (!channel_->enqueue(station, p)) {
      count_drop(p);
      return;
    }
    kick_channel();
  }

  // -- mobility --------------------------------------------------------------

  void handle(const event::Spawn& e) {
    auto& v = vehicles_[e.vehicle];
    ++spawned_;
    const auto& kin = sc_.kinematics;
    const double t0 = v.initial.entry_time;
    schedule(t0 + time_to_position(v.initial, kin.coverage_begin(), kin), event::EnterCoverage{e.vehicle});
    schedule(t0 + time_to_position(v.initial, kin.coverage_end(), kin), event::LeaveCoverage{e.vehicle});
    schedule(t0 + time_to_position(v.initial, v.initial.route_length, kin), event::LeaveRoute{e.vehicle});
  }

  void handle(const event::EnterCoverage& e) {
    auto& v = vehicles_[e.vehicle];
    v.in_coverage = true;
    v.enter_time = clock_.now();
    channel_->attach(v.station);
    v.decide_event = schedule(clock_.now(), event::Decide{e.vehicle});
    v.decide_pending = true;
  }

  void handle(const event::LeaveCoverage& e) {
    auto& v = vehicles_[e.vehicle];
    if (!v.in_coverage) return;
    const double now = clock_.now();
    if (v.decide_pending) events_.cancel(v.decide_event);
    if (v.flush_pending) events_.cancel(v.flush_event);
    v.decide_pending = v.flush_pending = false;

    // Unsent application data is discarded with the vehicle.
    const std::uint64_t gen = generated_bytes(v, now);
    auto& a = accounting_[index_of(v.initial.category)];
    a.generated_bytes += gen - v.flushed_bytes;
    a.dropped_bytes += gen - v.flushed_bytes;
    v.flushed_bytes = gen;
    for (const auto& p : channel_->detach(v.station)) count_drop(p);

    if (agents_ && v.pending_state) {
      if (auto r = observe_reward(v)) {
        Agent& ag = agents_->agent_for_vehicle(v.initial.id, v.initial.category);
        q_update(ag.table, *v.pending_state, v.pending_action, *r, std::nullopt, sc_.learning);
      }
      v.pending_state.reset();
    }
    v.in_coverage = false;
    v.left_coverage = true;
    v.leave_time = now;
  }

  void handle(const event::LeaveRoute&) { ++route_exits_; }

  // -- application and agents -----------------------------------------------

  std::optional<double> observe_reward(VehicleRuntime& v) {
    const auto& stats = edge_->stats();
    const auto c = v.initial.category;
    std::optional<double> r;
    switch (agents_->topology().reward_granularity) {
      case RewardGranularity::NODE_SPECIFIC: {
        auto it = stats.per_vehicle.find(v.initial.id);
        std::optional<VehicleStats> vs;
        if (it != stats.per_vehicle.end()) vs = it->second;
        r = reward_node_specific(vs, profile(c), sc_.reward);
        break;
      }
      case RewardGranularity::OVERALL:
        r = reward_overall(stats, c, profile(c), sc_.reward);
        break;
      case RewardGranularity::PER_CATEGORY:
        r = reward_per_category(stats, c, sc_.profiles, sc_.reward);
        break;
    }
    if (r) {
      v.last_reward = r;
      notify(v, *r, true);
      return r;
    }
    if (sc_.reward.reuse_on_no_sample && v.last_reward) {
      notify(v, *v.last_reward, false);
      return v.last_reward;
    }
    return std::nullopt;
  }

  void notify(const VehicleRuntime& v, double r, bool fresh) {
    if (reward_observer_) reward_observer_({clock_.now(), v.initial.id, v.initial.category, r, fresh});
  }

  /// First tick time that is at or after `t` and strictly after `after`.
  double next_tick_at_or_after(double t, double after) const {
    const double period = sc_.edge.tick_period;
    auto k = static_cast<long long>(std::ceil(t / period));
    while (static_cast<double>(k) * period < t) ++k;
    while (static_cast<double>(k) * period <= after) ++k;
    return static_cast<double>(k) * period;
  }

  /// Agent-driven vehicles act, wait, flush and then decide again at the next
  /// statistics tick. Vehicles without an agent stream one packet per
  /// generation interval.
  void handle(const event::Decide& e) {
    auto& v = vehicles_[e.vehicle];
    v.decide_pending = false;
    if (!v.in_coverage) return;
    const double now = clock_.now();

    if (!agents_) {
      flush(v);
      const double interval = sc_.channel.packet_size * 8.0 / profile(v.initial.category).data_rate_bps;
      v.decide_event = schedule(now + interval, event::Decide{e.vehicle});
      v.decide_pending = true;
      return;
    }

    const Vehicle kin = vehicle_at(v, now);
    const auto level = discretize_sojourn(sojourn_time(kin, sc_.kinematics), sc_.kinematics.sojourn_cap);
    const AgentState s = build_state(level, edge_->counts(), v.initial.category, agents_->topology());
    Agent& ag = agents_->agent_for_vehicle(v.initial.id, v.initial.category);
    if (v.pending_state) {
      if (auto r = observe_reward(v)) q_update(ag.table, *v.pending_state, v.pending_action, *r, s, sc_.learning);
    }
    const int a = choose_action(ag.table, s, sc_.learning.epsilon, ag.explore);
    v.pending_state = s;
    v.pending_action = a;
    const double wait = action_to_wait(a, profile(v.initial.category).max_wait_s, sc_.learning.max_action);

    const int st[] = {v.station};
    for (const auto& c : emit_control_traffic(agents_->topology(), st, false, sc_.control))
      send_control(c.src_station, c.size);

    if (wait <= 0.0) {
      flush(v);
    } else {
      v.flush_event = schedule(now + wait, event::Flush{e.vehicle});
      v.flush_pending = true;
    }
    const double next = next_tick_at_or_after(now + wait, now);
    if (next <= sc_.episode_duration) {
      v.decide_event = schedule(next, event::Decide{e.vehicle});
      v.decide_pending = true;
    }
  }

  void handle(const event::Flush& e) {
    auto& v = vehicles_[e.vehicle];
    v.flush_pending = false;
    if (v.in_coverage) flush(v);
  }

  /// Packetizes everything buffered since the last flush into the MAC.
  void flush(VehicleRuntime& v) {
    const double now = clock_.now();
    const std::uint64_t gen = generated_bytes(v, now);
    std::uint64_t bytes = gen - v.flushed_bytes;
    if (bytes == 0) return;
    v.flushed_bytes = gen;
    const auto c = v.initial.category;
    auto& a = accounting_[index_of(c)];
    a.generated_bytes += bytes;
    const auto size = static_cast<std::uint64_t>(sc_.channel.packet_size);
    std::size_t room = channel_->free_space(v.station, c, false);
    bool enqueued = false;
    while (bytes > 0) {
      Packet p;
      p.id = next_packet_id_++;
      p.src = v.station;
      p.category = c;
      p.size = static_cast<int>(std::min(bytes, size));
      p.created_at = now;
      bytes -= static_cast<std::uint64_t>(p.size);
      ++a.generated_packets;
      if (room > 0) {
        channel_->enqueue(v.station, p);
        --room;
        enqueued = true;
      } else if (record_trace_) {
        count_drop(p);
      } else {
        // Bulk overflow: account for the remainder without materializing it.
        const std::uint64_t n = 1 + packets_for(bytes, sc_.channel.packet_size);
        a.generated_packets += n - 1;
        a.dropped_packets += n;
        a.dropped_bytes += static_cast<std::uint64_t>(p.size) + bytes;
        bytes = 0;
      }
    }
    if (enqueued) kick_channel();
  }

  // -- channel ---------------------------------------------------------------

  void handle(const event::ChannelRound&) {
    round_scheduled_ = false;
    if (busy_) return;
    TxOutcome out = channel_->contend_and_transmit(mac_rng_);
    for (const auto& p : out.dropped) count_drop(p);
    if (out.kind == TxOutcome::Kind::Idle) return;
    busy_ = true;
    in_flight_ = out.delivered;
    schedule(clock_.now() + out.duration(), event::TxEnd{});
  }

  void handle(const event::TxEnd&) {
    busy_ = false;
    if (in_flight_) {
      Packet p = *in_flight_;
      in_flight_.reset();
      p.delivered_at = clock_.now();
      deliver(p);
    }
    if (channel_->backlogged()) kick_channel();
  }

  void deliver(const Packet& p) {
    if (record_trace_) trace_.push_back(p);
    if (p.is_control) {
      ++control_.delivered;
      return;
    }
    auto& a = accounting_[index_of(p.category)];
    ++a.delivered_packets;
    a.delivered_bytes += static_cast<std::uint64_t>(p.size);
    DeliveryRecord d;
    d.vehicle_id = p.src - 1;
    d.category = p.category;
    d.delivered_at = *p.delivered_at;
    d.latency = *p.delivered_at - p.created_at;
    d.bits = p.size * 8.0;
    log_.push_back(d);
    edge_->record_delivery(d);
    vehicles_[d.vehicle_id].delivered_bits += d.bits;
  }

  // -- edge ------------------------------------------------------------------

  void handle(const event::Tick&) {
    edge_->tick();
    if (agents_) {
      for (const auto& c : emit_control_traffic(agents_->topology(), {}, true, sc_.control))
        send_control(c.src_station, c.size);
    }
  }

  Scenario sc_;
  bool record_trace_;
  RngStream mac_rng_;
  RngStream category_rng_;
  std::unique_ptr<AgentPool> agents_;
  std::function<void(const RewardObservation&)> reward_observer_;
  std::vector<Arrival> arrivals_;
  bool arrivals_fixed_ = false;
  int episode_ = 0;

  SimClock clock_;
  EventQueue<Event> events_;
  std::unique_ptr<Channel> channel_;
  std::unique_ptr<EdgeServer> edge_;
  std::vector<VehicleRuntime> vehicles_;
  std::vector<DeliveryRecord> log_;
  std::vector<Packet> trace_;
  PerCategory<Accounting> accounting_{};
  ControlAccounting control_;
  std::uint64_t next_packet_id_ = 0;
  bool busy_ = false;
  bool round_scheduled_ = false;
  std::optional<Packet> in_flight_;
  int spawned_ = 0;
  int route_exits_ = 0;
};

/// Writes `id,src,category,size,created_at,delivered_at|DROP,is_control`.
inline void write_packet_trace(std::ostream& out, std::span<const Packet> trace) {
  out << "id,src,category,size,created_at,delivered_at,is_control\n";
  for (const auto& p : trace) {
    out << p.id << ',' << p.src << ',' << (p.is_control ? "CTRL" : to_string(p.category)) << ',' << p.size << ','
        << format_double(p.created_at) << ',' << (p.delivered_at ? format_double(*p.delivered_at) : "DROP") << ','
        << (p.is_control ? 1 : 0) << '\n';
  }
}

}  // namespace vanetq
