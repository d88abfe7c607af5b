#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "category.hpp"

namespace vanetq {

/// Vehicles heard recently by the RSU. Each packet refreshes the sender's
/// counter; each tick decrements all counters and forgets those reaching zero.
class ActiveUserMap {
 public:
  struct Entry {
    ServiceCategory category;
    int counter;
  };

  explicit ActiveUserMap(int init_ticks = 3) : init_ticks_(init_ticks) {
    if (init_ticks < 1) throw std::invalid_argument("active-user counter must start at >= 1");
  }

  void observe(int vehicle_id, ServiceCategory c) { entries_[vehicle_id] = Entry{c, init_ticks_}; }

  void tick() {
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (--it->second.counter <= 0) {
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
  }

  bool contains(int vehicle_id) const { return entries_.count(vehicle_id) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::map<int, Entry>& entries() const { return entries_; }
  int init_ticks() const { return init_ticks_; }

 private:
  int init_ticks_;
  std::map<int, Entry> entries_;
};

struct ActiveCounts {
  int total = 0;  // T_v
  PerCategory<int> per_category{};  // T_cv

  bool operator==(const ActiveCounts&) const = default;
};

inline ActiveCounts active_counts(const ActiveUserMap& users) {
  ActiveCounts out;
  for (const auto& [id, e] : users.entries()) {
    ++out.per_category[index_of(e.category)];
    ++out.total;
  }
  return out;
}

/// One received packet as seen by the RSU.
struct DeliveryRecord {
  int vehicle_id = 0;
  ServiceCategory category = ServiceCategory::VO;
  double delivered_at = 0.0;
  double latency = 0.0;
  double bits = 0.0;
  bool is_control = false;
};

struct CategoryStats {
  std::optional<double> mean_latency;  // empty when nothing was delivered
  double throughput_bps = 0.0;
  std::size_t packets = 0;
};

struct VehicleStats {
  ServiceCategory category = ServiceCategory::VO;
  std::optional<double> mean_latency;
  double throughput_bps = 0.0;
};

struct NetworkStats {
  double window = 1.0;
  PerCategory<CategoryStats> per_category{};
  std::map<int, VehicleStats> per_vehicle;
};

/// Window statistics over application deliveries; control packets are ignored.
inline NetworkStats aggregate_stats(std::span<const DeliveryRecord> deliveries, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("stats window must be positive");
  NetworkStats s;
  s.window = window;
  PerCategory<double> lat_sum{};
  PerCategory<double> bits{};
  std::map<int, std::pair<double, std::size_t>> veh_lat;
  std::map<int, double> veh_bits;
  for (const auto& d : deliveries) {
    if (d.is_control) continue;
    const auto i = index_of(d.category);
    lat_sum[i] += d.latency;
    bits[i] += d.bits;
    ++s.per_category[i].packets;
    auto& vl = veh_lat[d.vehicle_id];
    vl.first += d.latency;
    ++vl.second;
    veh_bits[d.vehicle_id] += d.bits;
    s.per_vehicle[d.vehicle_id].category = d.category;
  }
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    auto& c = s.per_category[i];
    if (c.packets > 0) c.mean_latency = lat_sum[i] / static_cast<double>(c.packets);
    c.throughput_bps = bits[i] / window;
  }
  for (auto& [id, v] : s.per_vehicle) {
    const auto& [sum, n] = veh_lat[id];
    v.mean_latency = sum / static_cast<double>(n);
    v.throughput_bps = veh_bits[id] / window;
  }
  return s;
}

struct EdgeConfig {
  int active_init_ticks = 3;
  double tick_period = 1.0;
  double stats_window = 1.0;

  void validate() const {
    if (active_init_ticks < 1) throw std::invalid_argument("active_init_ticks must be >= 1");
    if (!(tick_period > 0.0) || !(stats_window > 0.0))
      throw std::invalid_argument("tick_period and stats_window must be positive");
  }

  bool operator==(const EdgeConfig&) const = default;
};

/// RSU-side aggregation point. Collects deliveries for the current window,
/// tracks active users, and publishes the statistics agents read.
class EdgeServer {
 public:
  explicit EdgeServer(EdgeConfig cfg = {}) : cfg_(cfg), users_(cfg.active_init_ticks) {
    cfg_.validate();
    latest_.window = cfg_.stats_window;
  }

  void observe_packet(int vehicle_id, ServiceCategory c) { users_.observe(vehicle_id, c); }

  void record_delivery(const DeliveryRecord& d) {
    if (d.is_control) return;
    observe_packet(d.vehicle_id, d.category);
    window_.push_back(d);
  }

  /// Closes the current window: decays the active-user map and publishes
  /// fresh statistics.
  const NetworkStats& tick() {
    users_.tick();
    latest_ = aggregate_stats(window_, cfg_.stats_window);
    window_.clear();
    return latest_;
  }

  ActiveCounts counts() const { return active_counts(users_); }
  const NetworkStats& stats() const { return latest_; }
  const ActiveUserMap& users() const { return users_; }
  const EdgeConfig& config() const { return cfg_; }

 private:
  EdgeConfig cfg_;
  ActiveUserMap users_;
  std::vector<DeliveryRecord> window_;
  NetworkStats latest_;
};

}  // namespace vanetq
