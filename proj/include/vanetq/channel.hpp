#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "category.hpp"
#include "sim_core.hpp"

namespace vanetq {

enum class Discipline : std::uint8_t { NON_QOS, EDCA, RL };

constexpr std::string_view to_string(Discipline d) {
  switch (d) {
    case Discipline::NON_QOS: return "NON_QOS";
    case Discipline::EDCA: return "EDCA";
    case Discipline::RL: return "RL";
  }
  return "?";
}

/// EDCA access categories, highest priority first.
enum class AccessCategory : std::uint8_t { VO = 0, VI = 1, BE = 2, BK = 3 };

inline constexpr std::size_t kNumAccessCategories = 4;

struct EdcaParams {
  int cw_min;
  int cw_max;
  int aifsn;
  bool operator==(const EdcaParams&) const = default;
};

/// 802.11p EDCA defaults.
constexpr EdcaParams edca_params(AccessCategory ac) {
  switch (ac) {
    case AccessCategory::VO: return {3, 7, 2};
    case AccessCategory::VI: return {7, 15, 3};
    case AccessCategory::BE: return {15, 1023, 6};
    case AccessCategory::BK: return {15, 1023, 9};
  }
  return {15, 1023, 9};
}

/// Legacy DCF used by the single-queue discipline.
constexpr EdcaParams dcf_params() { return {15, 1023, 2}; }

/// HD Map has no access category of its own and rides AC_VI.
constexpr AccessCategory access_category_for(ServiceCategory c) {
  switch (c) {
    case ServiceCategory::VO: return AccessCategory::VO;
    case ServiceCategory::VI: return AccessCategory::VI;
    case ServiceCategory::HDMAP: return AccessCategory::VI;
    case ServiceCategory::BE: return AccessCategory::BE;
  }
  return AccessCategory::BE;
}

struct ChannelConfig {
  double phy_rate = 6e6;         // bit/s
  double slot_time = 13e-6;
  double sifs = 32e-6;
  double bandwidth = 10e6;       // Hz
  double tx_power = 0.2;         // W
  double frequency = 5.9e9;      // Hz
  double frame_overhead = 100e-6;
  int packet_size = 1000;        // bytes
  int queue_capacity = 500;      // packets per MAC queue
  int retry_limit = 7;
  // false: every backlogged queue redraws its backoff each round.
  // true: losers keep the remainder of their counter (802.11 freeze-and-resume).
  bool persistent_backoff = false;

  void validate() const {
    for (double v : {phy_rate, slot_time, sifs, bandwidth, tx_power, frequency}) {
      if (!(v > 0.0)) throw std::invalid_argument("channel values must be strictly positive");
    }
    if (frame_overhead < 0.0) throw std::invalid_argument("frame_overhead must be >= 0");
    if (packet_size <= 0 || queue_capacity <= 0 || retry_limit < 0)
      throw std::invalid_argument("packet_size and queue_capacity must be positive, retry_limit >= 0");
  }

  bool operator==(const ChannelConfig&) const = default;
};

struct Packet {
  std::uint64_t id = 0;
  int src = 0;  // station id; 0 is the RSU
  ServiceCategory category = ServiceCategory::VO;
  int size = 0;  // bytes
  double created_at = 0.0;
  std::optional<double> delivered_at;
  bool is_control = false;
};

/// Airtime of one frame: payload at the PHY rate plus a fixed per-frame overhead.
inline double frame_time(int size_bytes, const ChannelConfig& cfg) {
  return size_bytes * 8.0 / cfg.phy_rate + cfg.frame_overhead;
}

/// Mean of the uniform backoff draw from [0, cw_min].
inline double expected_backoff(const EdcaParams& p, const ChannelConfig& cfg) {
  return cfg.slot_time * p.cw_min / 2.0;
}

struct MacQueue {
  AccessCategory ac = AccessCategory::BE;
  EdcaParams params = edca_params(AccessCategory::BE);
  std::deque<Packet> packets;
  int cw = params.cw_min;
  int backoff = -1;  // slots left; negative means not drawn yet
  int retries = 0;

  MacQueue() = default;
  MacQueue(AccessCategory a, EdcaParams p) : ac(a), params(p), cw(p.cw_min) {
    if (p.cw_min > p.cw_max) throw std::invalid_argument("cw_min must not exceed cw_max");
  }

  bool empty() const { return packets.empty(); }
  std::size_t size() const { return packets.size(); }
};

/// Serial-service estimate of the time to drain a queue: sum over queued
/// packets of (frame time + expected backoff).
inline double queue_delay(const MacQueue& q, const ChannelConfig& cfg) {
  const double bf = expected_backoff(q.params, cfg);
  double total = 0.0;
  for (const auto& p : q.packets) total += frame_time(p.size, cfg) + bf;
  return total;
}

struct QueueRef {
  int station = 0;
  std::size_t queue = 0;
  bool operator==(const QueueRef&) const = default;
};

struct TxOutcome {
  enum class Kind { Idle, Success, Collision };
  Kind kind = Kind::Idle;
  double access_delay = 0.0;  // SIFS + idle slots before the frame starts
  double busy_time = 0.0;     // medium occupancy of the frame(s)
  std::optional<Packet> delivered;  // head-of-line packet of the winner
  std::optional<QueueRef> winner;
  std::vector<QueueRef> colliders;
  std::vector<Packet> dropped;  // retry-limit drops caused by this round

  double duration() const { return access_delay + busy_time; }
};

/// Single collision domain shared by the RSU and every vehicle in coverage.
class Channel {
 public:
  Channel(ChannelConfig cfg, Discipline discipline) : cfg_(cfg), discipline_(discipline) { cfg_.validate(); }

  const ChannelConfig& config() const { return cfg_; }
  Discipline discipline() const { return discipline_; }

  /// Creates (or re-activates) the MAC queues of a station.
  void attach(int station) {
    if (station < 0) throw std::invalid_argument("negative station id");
    if (static_cast<std::size_t>(station) >= stations_.size()) stations_.resize(station + 1);
    Station& s = stations_[station];
    if (!s.active) active_.insert(std::upper_bound(active_.begin(), active_.end(), station), station);
    s.active = true;
    s.queues.clear();
    if (discipline_ == Discipline::NON_QOS) {
      s.queues.emplace_back(AccessCategory::BE, dcf_params());
    } else {
      for (std::size_t i = 0; i < kNumAccessCategories; ++i) {
        const auto ac = static_cast<AccessCategory>(i);
        s.queues.emplace_back(ac, edca_params(ac));
      }
    }
  }

  /// Deactivates a station and returns the packets it still held.
  std::vector<Packet> detach(int station) {
    std::vector<Packet> left;
    Station& s = at(station);
    for (auto& q : s.queues) {
      left.insert(left.end(), q.packets.begin(), q.packets.end());
    }
    s.queues.clear();
    s.active = false;
    active_.erase(std::find(active_.begin(), active_.end(), station));
    return left;
  }

  bool attached(int station) const {
    return station >= 0 && static_cast<std::size_t>(station) < stations_.size() && stations_[station].active;
  }

  std::size_t queue_index(ServiceCategory c, bool is_control) const {
    if (discipline_ == Discipline::NON_QOS) return 0;
    if (is_control) return static_cast<std::size_t>(AccessCategory::VO);
    return static_cast<std::size_t>(access_category_for(c));
  }

  /// Appends to the queue chosen by the discipline. Returns false when the
  /// queue is full and the packet is dropped.
  bool enqueue(int station, Packet p) {
    Station& s = at(station);
    MacQueue& q = s.queues.at(queue_index(p.category, p.is_control));
    if (q.size() >= static_cast<std::size_t>(cfg_.queue_capacity)) return false;
    q.packets.push_back(std::move(p));
    return true;
  }

  /// Free slots in the queue a packet of this kind would join.
  std::size_t free_space(int station, ServiceCategory c, bool is_control) const {
    const Station& s = stations_.at(station);
    const MacQueue& q = s.queues.at(queue_index(c, is_control));
    return static_cast<std::size_t>(cfg_.queue_capacity) - q.size();
  }

  const MacQueue& queue(QueueRef r) const { return stations_.at(r.station).queues.at(r.queue); }

  bool backlogged() const {
    for (int si : active_) {
      const auto& s = stations_[si];
      for (const auto& q : s.queues)
        if (!q.empty()) return true;
    }
    return false;
  }

  template <typename Fn>
  void for_each_packet(Fn&& fn) const {
    for (int si : active_) {
      const auto& s = stations_[si];
      for (const auto& q : s.queues)
        for (const auto& p : q.packets) fn(p);
    }
  }

  /// One contention round. Every backlogged queue counts down AIFSN plus its
  /// backoff; the earliest expiry wins. Equal expiries on different stations
  /// collide and double their windows; within one station the higher-priority
  /// queue wins and the others back off as if they had collided.
  TxOutcome contend_and_transmit(RngStream& rng) {
    TxOutcome out;
    int best = INT32_MAX;
    for (int si : active_) {
      Station& s = stations_[si];
      for (auto& q : s.queues) {
        if (q.empty()) continue;
        if (q.backoff < 0 || !cfg_.persistent_backoff) q.backoff = static_cast<int>(rng.uniform_int(0, q.cw));
        best = std::min(best, q.params.aifsn + q.backoff);
      }
    }
    if (best == INT32_MAX) return out;

    // Highest-priority expiring queue per station; lower ones suffer a virtual collision.
    std::vector<QueueRef> heads;
    std::vector<QueueRef> virtual_losers;
    for (int si : active_) {
      Station& s = stations_[si];
      bool have_head = false;
      for (std::size_t qi = 0; qi < s.queues.size(); ++qi) {
        MacQueue& q = s.queues[qi];
        if (q.empty()) continue;
        if (q.params.aifsn + q.backoff == best) {
          if (!have_head) {
            heads.push_back({si, qi});
            have_head = true;
          } else {
            virtual_losers.push_back({si, qi});
          }
        } else {
          q.backoff -= std::max(0, best - q.params.aifsn);
        }
      }
    }

    out.access_delay = cfg_.sifs + best * cfg_.slot_time;
    for (auto r : virtual_losers) on_collision(r, out);

    if (heads.size() == 1) {
      MacQueue& q = stations_[heads[0].station].queues[heads[0].queue];
      out.kind = TxOutcome::Kind::Success;
      out.delivered = q.packets.front();
      q.packets.pop_front();
      out.busy_time = frame_time(out.delivered->size, cfg_);
      q.cw = q.params.cw_min;
      q.retries = 0;
      q.backoff = -1;
      out.winner = heads[0];
    } else {
      out.kind = TxOutcome::Kind::Collision;
      for (auto r : heads) {
        const MacQueue& q = stations_[r.station].queues[r.queue];
        out.busy_time = std::max(out.busy_time, frame_time(q.packets.front().size, cfg_));
        out.colliders.push_back(r);
      }
      for (auto r : heads) on_collision(r, out);
    }
    return out;
  }

 private:
  struct Station {
    bool active = false;
    std::vector<MacQueue> queues;
  };

  Station& at(int station) {
    if (!attached(station)) throw std::logic_error("station " + std::to_string(station) + " is not attached");
    return stations_[station];
  }

  void on_collision(QueueRef r, TxOutcome& out) {
    MacQueue& q = stations_[r.station].queues[r.queue];
    ++q.retries;
    q.backoff = -1;
    if (q.retries > cfg_.retry_limit) {
      out.dropped.push_back(q.packets.front());
      q.packets.pop_front();
      q.retries = 0;
      q.cw = q.params.cw_min;
    } else {
      q.cw = std::min(2 * q.cw + 1, q.params.cw_max);
    }
  }

  ChannelConfig cfg_;
  Discipline discipline_;
  std::vector<Station> stations_;
  std::vector<int> active_;  // ascending station ids
};

}  // namespace vanetq
