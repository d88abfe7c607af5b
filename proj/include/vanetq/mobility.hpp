#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "category.hpp"
#include "sim_core.hpp"

namespace vanetq {

struct KinematicsConfig {
  double v_max = 17.0;           // m/s
  double accel = 2.6;            // m/s^2
  double decel = 4.5;            // m/s^2
  double entry_interval = 0.66;  // s between consecutive arrivals
  double entry_speed = 0.0;      // m/s when entering the route
  double coverage_radius = 100.0;
  double tile_length = 300.0;
  double tile_width = 100.0;
  double sojourn_cap = 20.0;     // coverage_radius / 5 m/s

  double rsu_position() const { return tile_length / 2.0; }
  double coverage_begin() const { return rsu_position() - coverage_radius; }
  double coverage_end() const { return rsu_position() + coverage_radius; }

  void validate() const {
    for (double v : {v_max, accel, decel, entry_interval, coverage_radius, tile_length, tile_width, sojourn_cap}) {
      if (!(v > 0.0)) throw std::invalid_argument("kinematics values must be strictly positive");
    }
    if (entry_speed < 0.0 || entry_speed > v_max) throw std::invalid_argument("entry_speed must lie in [0, v_max]");
  }

  bool operator==(const KinematicsConfig&) const = default;
};

struct Vehicle {
  int id = 0;
  ServiceCategory category = ServiceCategory::VO;
  double position = 0.0;  // metres along the route
  double speed = 0.0;
  double entry_time = 0.0;
  double route_length = 300.0;

  bool exited() const { return position >= route_length; }
};

struct Arrival {
  double entry_time;
  ServiceCategory category;
  bool operator==(const Arrival&) const = default;
};

/// Arrivals on the fixed entry grid t = k * entry_interval, t < horizon.
/// max_vehicles == 0 means unbounded.
inline std::vector<Arrival> spawn_schedule(const KinematicsConfig& kin, double horizon, RngStream& rng,
                                           std::size_t max_vehicles = 0) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  std::vector<Arrival> out;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * kin.entry_interval;
    if (t >= horizon) break;
    if (max_vehicles != 0 && out.size() >= max_vehicles) break;
    const auto c = static_cast<ServiceCategory>(rng.uniform_int(0, kNumCategories - 1));
    out.push_back({t, c});
  }
  return out;
}

/// Constant acceleration up to v_max, constant speed afterwards.
inline Vehicle advance(Vehicle v, double dt, const KinematicsConfig& kin) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance requires dt > 0");
  if (v.speed >= kin.v_max) {
    v.speed = kin.v_max;
    v.position += kin.v_max * dt;
    return v;
  }
  const double t_acc = (kin.v_max - v.speed) / kin.accel;
  if (dt <= t_acc) {
    v.position += v.speed * dt + 0.5 * kin.accel * dt * dt;
    v.speed = std::min(kin.v_max, v.speed + kin.accel * dt);
  } else {
    v.position += v.speed * t_acc + 0.5 * kin.accel * t_acc * t_acc + kin.v_max * (dt - t_acc);
    v.speed = kin.v_max;
  }
  return v;
}

/// Time until the vehicle reaches `target`; 0 if it is already there or beyond.
inline double time_to_position(const Vehicle& v, double target, const KinematicsConfig& kin) {
  const double gap = target - v.position;
  if (gap <= 0.0) return 0.0;
  if (v.speed >= kin.v_max) return gap / kin.v_max;
  const double d_acc = (kin.v_max * kin.v_max - v.speed * v.speed) / (2.0 * kin.accel);
  if (gap <= d_acc) {
    return (-v.speed + std::sqrt(v.speed * v.speed + 2.0 * kin.accel * gap)) / kin.accel;
  }
  return (kin.v_max - v.speed) / kin.accel + (gap - d_acc) / kin.v_max;
}

inline double distance_to_rsu(const Vehicle& v, const KinematicsConfig& kin) {
  return std::abs(v.position - kin.rsu_position());
}

inline bool in_coverage(const Vehicle& v, const KinematicsConfig& kin) {
  return distance_to_rsu(v, kin) <= kin.coverage_radius;
}

/// Remaining time under coverage at the current speed: (radius - d) / speed.
/// A stationary vehicle reports the quantizer cap.
inline double sojourn_time(const Vehicle& v, const KinematicsConfig& kin) {
  if (v.speed <= 0.0) return kin.sojourn_cap;
  return std::max(0.0, (kin.coverage_radius - distance_to_rsu(v, kin)) / v.speed);
}

/// Sojourn level in {0..4}; 0 is the shortest remaining coverage time.
struct SojournLevel {
  int level = 0;
  bool operator==(const SojournLevel&) const = default;
};

inline constexpr int kSojournLevels = 5;

inline SojournLevel discretize_sojourn(double sojourn_s, double cap) {
  if (sojourn_s < 0.0) throw std::invalid_argument("sojourn time must be non-negative");
  if (sojourn_s >= cap) return {kSojournLevels - 1};
  const int lvl = static_cast<int>(std::floor(kSojournLevels * sojourn_s / cap));
  return {std::clamp(lvl, 0, kSojournLevels - 1)};
}

/// Reads `entry_time_s,category` lines. Blank lines and '#' comments are skipped.
inline std::vector<Arrival> parse_arrival_trace(std::istream& in, const std::string& origin = "<trace>") {
  std::vector<Arrival> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto comma = line.find(',');
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    if (comma == std::string::npos) fail("expected 'entry_time_s,category'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string t_str = trim(line.substr(0, comma));
    const std::string c_str = trim(line.substr(comma + 1));
    double t = 0.0;
    std::size_t used = 0;
    try {
      t = std::stod(t_str, &used);
    } catch (const std::exception&) {
      fail("bad entry time '" + t_str + "'");
    }
    if (used != t_str.size() || !(t >= 0.0)) fail("bad entry time '" + t_str + "'");
    auto c = parse_category(c_str);
    if (!c) fail("unknown category '" + c_str + "'");
    if (!out.empty() && t < out.back().entry_time) fail("entry times must be non-decreasing");
    out.push_back({t, *c});
  }
  return out;
}

inline std::vector<Arrival> load_arrival_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open arrival trace '" + path + "'");
  return parse_arrival_trace(in, path);
}

}  // namespace vanetq
