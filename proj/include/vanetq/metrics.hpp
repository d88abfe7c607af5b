#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "category.hpp"
#include "edge_server.hpp"
#include "text_io.hpp"

namespace vanetq {

struct CdfPoint {
  double value;
  double cumulative;
  bool operator==(const CdfPoint&) const = default;
};

/// Empirical CDF with one step per distinct value. Empty input yields
/// nullopt rather than an empty curve.
inline std::optional<std::vector<CdfPoint>> cdf(std::span<const double> samples) {
  if (samples.empty()) return std::nullopt;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

/// Jain's index (sum x)^2 / (n * sum x^2). Undefined (nullopt) for empty or
/// all-zero input.
inline std::optional<double> jain_fairness(std::span<const double> xs) {
  if (xs.empty()) return std::nullopt;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double x : xs) {
    if (x < 0.0) throw std::invalid_argument("fairness inputs must be non-negative");
    sum += x;
    sum_sq += x * x;
  }
  if (sum_sq == 0.0) return std::nullopt;
  return std::min(1.0, (sum * sum) / (static_cast<double>(xs.size()) * sum_sq));
}

struct SeriesPoint {
  double time;   // window end
  double value;
  std::size_t samples = 0;
  bool operator==(const SeriesPoint&) const = default;
};

inline std::size_t window_count(double duration, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("window must be positive");
  return static_cast<std::size_t>(std::ceil(duration / window - 1e-9));
}

inline std::size_t window_of(double t, double window, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(std::floor(t / window)));
}

/// Delivered application bits per second in consecutive windows.
inline std::vector<SeriesPoint> throughput_series(std::span<const DeliveryRecord> log, ServiceCategory c,
                                                  double window, double duration) {
  const std::size_t n = window_count(duration, window);
  std::vector<SeriesPoint> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k].time = (k + 1) * window;
  if (n == 0) return out;
  for (const auto& d : log) {
    if (d.is_control || d.category != c) continue;
    auto& p = out[window_of(d.delivered_at, window, n)];
    p.value += d.bits;
    ++p.samples;
  }
  for (auto& p : out) p.value /= window;
  return out;
}

/// Mean application latency per window; windows without deliveries are omitted.
inline std::vector<SeriesPoint> latency_series(std::span<const DeliveryRecord> log, ServiceCategory c,
                                               double window, double duration) {
  const std::size_t n = window_count(duration, window);
  std::vector<SeriesPoint> acc(n);
  for (std::size_t k = 0; k < n; ++k) acc[k].time = (k + 1) * window;
  if (n == 0) return {};
  for (const auto& d : log) {
    if (d.is_control || d.category != c) continue;
    auto& p = acc[window_of(d.delivered_at, window, n)];
    p.value += d.latency;
    ++p.samples;
  }
  std::vector<SeriesPoint> out;
  for (auto& p : acc) {
    if (p.samples == 0) continue;
    p.value /= static_cast<double>(p.samples);
    out.push_back(p);
  }
  return out;
}

/// Sample-weighted mean of a latency series.
inline std::optional<double> series_mean(std::span<const SeriesPoint> series) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : series) {
    sum += p.value * static_cast<double>(p.samples);
    n += p.samples;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Bits and coverage time of one vehicle, used for fairness.
struct VehicleUsage {
  ServiceCategory category = ServiceCategory::VO;
  double delivered_bits = 0.0;
  double coverage_time = 0.0;
};

/// Packet and byte accounting of one category. At every instant
/// generated = delivered + dropped + queued + buffered (bytes), and the same
/// without the buffer term for packets.
struct Accounting {
  std::uint64_t generated_packets = 0;
  std::uint64_t delivered_packets = 0;
  std::uint64_t dropped_packets = 0;
  std::uint64_t queued_packets = 0;
  std::uint64_t generated_bytes = 0;
  std::uint64_t delivered_bytes = 0;
  std::uint64_t dropped_bytes = 0;
  std::uint64_t queued_bytes = 0;
  std::uint64_t buffered_bytes = 0;

  Accounting& operator+=(const Accounting& o) {
    generated_packets += o.generated_packets;
    delivered_packets += o.delivered_packets;
    dropped_packets += o.dropped_packets;
    queued_packets += o.queued_packets;
    generated_bytes += o.generated_bytes;
    delivered_bytes += o.delivered_bytes;
    dropped_bytes += o.dropped_bytes;
    queued_bytes += o.queued_bytes;
    buffered_bytes += o.buffered_bytes;
    return *this;
  }

  bool balanced() const {
    return generated_packets == delivered_packets + dropped_packets + queued_packets &&
           generated_bytes == delivered_bytes + dropped_bytes + queued_bytes + buffered_bytes;
  }

  bool operator==(const Accounting&) const = default;
};

struct CategoryReport {
  std::vector<SeriesPoint> latency_series;
  std::vector<SeriesPoint> throughput_series;
  std::vector<double> latency_samples;
  std::optional<std::vector<CdfPoint>> cdf_latency;
  std::optional<std::vector<CdfPoint>> cdf_throughput;
  Accounting accounting;
  std::optional<double> mean_latency;
  double mean_throughput = 0.0;  // bit/s over the reported duration
  std::optional<double> fairness;

  std::uint64_t packets_received() const { return accounting.delivered_packets; }
  std::uint64_t packets_dropped() const { return accounting.dropped_packets; }
  /// Fraction of generated application bytes that reached the RSU.
  double delivery_ratio() const {
    return accounting.generated_bytes == 0
               ? 0.0
               : static_cast<double>(accounting.delivered_bytes) / static_cast<double>(accounting.generated_bytes);
  }
};

struct ControlAccounting {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t bytes_sent = 0;

  ControlAccounting& operator+=(const ControlAccounting& o) {
    sent += o.sent;
    delivered += o.delivered;
    dropped += o.dropped;
    bytes_sent += o.bytes_sent;
    return *this;
  }
};

struct RunReport {
  std::string scenario_id;
  std::uint64_t seed = 0;
  int episode_index = 0;  // -1 for a report pooled over episodes
  int episodes_pooled = 1;
  double duration = 0.0;  // seconds covered by the report
  std::string traffic_signature;
  std::map<std::string, std::string> metadata;
  PerCategory<CategoryReport> per_category{};
  std::map<int, VehicleUsage> vehicles;
  ControlAccounting control;

  const CategoryReport& at(ServiceCategory c) const { return per_category[index_of(c)]; }
  CategoryReport& at(ServiceCategory c) { return per_category[index_of(c)]; }
};

/// Fills means, CDFs and fairness from the series, samples and usage.
inline void finalize_report(RunReport& r) {
  for (auto c : kAllCategories) {
    auto& cr = r.at(c);
    cr.cdf_latency = cdf(cr.latency_samples);
    std::vector<double> tput;
    tput.reserve(cr.throughput_series.size());
    for (const auto& p : cr.throughput_series) tput.push_back(p.value);
    cr.cdf_throughput = cdf(tput);
    if (!cr.latency_samples.empty()) {
      cr.mean_latency = std::accumulate(cr.latency_samples.begin(), cr.latency_samples.end(), 0.0) /
                        static_cast<double>(cr.latency_samples.size());
    } else {
      cr.mean_latency.reset();
    }
    cr.mean_throughput = r.duration > 0.0 ? static_cast<double>(cr.accounting.delivered_bytes) * 8.0 / r.duration : 0.0;
    std::vector<double> per_vehicle;
    for (const auto& [id, u] : r.vehicles) {
      if (u.category != c || u.coverage_time <= 0.0) continue;
      per_vehicle.push_back(u.delivered_bits / u.coverage_time);
    }
    cr.fairness = jain_fairness(per_vehicle);
  }
}

/// Concatenates episode reports into one: series are shifted onto a common
/// time axis, samples and counts are pooled, and per-vehicle usage is summed
/// by vehicle id.
inline RunReport pool_reports(std::span<const RunReport> episodes) {
  if (episodes.empty()) throw std::invalid_argument("nothing to pool");
  RunReport out;
  out.scenario_id = episodes.front().scenario_id;
  out.seed = episodes.front().seed;
  out.traffic_signature = episodes.front().traffic_signature;
  out.metadata = episodes.front().metadata;
  out.episode_index = -1;
  out.episodes_pooled = static_cast<int>(episodes.size());
  double offset = 0.0;
  for (const auto& ep : episodes) {
    for (auto c : kAllCategories) {
      const auto& src = ep.at(c);
      auto& dst = out.at(c);
      for (auto p : src.latency_series) {
        p.time += offset;
        dst.latency_series.push_back(p);
      }
      for (auto p : src.throughput_series) {
        p.time += offset;
        dst.throughput_series.push_back(p);
      }
      dst.latency_samples.insert(dst.latency_samples.end(), src.latency_samples.begin(), src.latency_samples.end());
      dst.accounting += src.accounting;
    }
    for (const auto& [id, u] : ep.vehicles) {
      auto& v = out.vehicles[id];
      v.category = u.category;
      v.delivered_bits += u.delivered_bits;
      v.coverage_time += u.coverage_time;
    }
    out.control += ep.control;
    offset += ep.duration;
  }
  out.duration = offset;
  finalize_report(out);
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

/// Signed relative change of a treatment against a baseline. Positive values
/// are improvements: lower latency, higher throughput, higher fairness.
struct CategoryDelta {
  std::optional<double> latency_reduction;
  std::optional<double> throughput_gain;
  std::optional<double> fairness_gain;
};

struct ComparisonTable {
  std::string baseline_id;
  std::string treatment_id;
  PerCategory<CategoryDelta> per_category{};
};

inline std::optional<double> relative_reduction(std::optional<double> baseline, std::optional<double> treatment) {
  if (!baseline || !treatment || *baseline == 0.0) return std::nullopt;
  return (*baseline - *treatment) / *baseline;
}

inline std::optional<double> relative_gain(std::optional<double> baseline, std::optional<double> treatment) {
  if (!baseline || !treatment || *baseline == 0.0) return std::nullopt;
  return (*treatment - *baseline) / *baseline;
}

/// Scalar summary of one category; this is what the summary file stores.
struct CategorySummary {
  std::optional<double> mean_latency;
  double mean_throughput = 0.0;
  std::optional<double> fairness;
  std::uint64_t packets_received = 0;
  std::uint64_t packets_dropped = 0;
  std::uint64_t packets_generated = 0;
  double delivery_ratio = 0.0;
};

struct RunSummary {
  std::string scenario_id;
  std::uint64_t seed = 0;
  int episode_index = 0;
  int episodes_pooled = 1;
  double duration = 0.0;
  std::string traffic_signature;
  std::map<std::string, std::string> metadata;
  PerCategory<CategorySummary> per_category{};
  ControlAccounting control;
};

inline RunSummary summarize(const RunReport& r) {
  RunSummary s;
  s.scenario_id = r.scenario_id;
  s.seed = r.seed;
  s.episode_index = r.episode_index;
  s.episodes_pooled = r.episodes_pooled;
  s.duration = r.duration;
  s.traffic_signature = r.traffic_signature;
  s.metadata = r.metadata;
  s.control = r.control;
  for (auto c : kAllCategories) {
    const auto& cr = r.at(c);
    auto& cs = s.per_category[index_of(c)];
    cs.mean_latency = cr.mean_latency;
    cs.mean_throughput = cr.mean_throughput;
    cs.fairness = cr.fairness;
    cs.packets_received = cr.packets_received();
    cs.packets_dropped = cr.packets_dropped();
    cs.packets_generated = cr.accounting.generated_packets;
    cs.delivery_ratio = cr.delivery_ratio();
  }
  return s;
}

/// Refuses to compare runs that did not see the same traffic.
inline ComparisonTable compare(const RunSummary& baseline, const RunSummary& treatment) {
  if (baseline.traffic_signature != treatment.traffic_signature) {
    throw std::invalid_argument("cannot compare runs with different traffic: '" + baseline.traffic_signature +
                                "' vs '" + treatment.traffic_signature + "'");
  }
  ComparisonTable t;
  t.baseline_id = baseline.scenario_id;
  t.treatment_id = treatment.scenario_id;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    const auto& b = baseline.per_category[i];
    const auto& x = treatment.per_category[i];
    t.per_category[i].latency_reduction = relative_reduction(b.mean_latency, x.mean_latency);
    t.per_category[i].throughput_gain = relative_gain(b.mean_throughput, x.mean_throughput);
    t.per_category[i].fairness_gain = relative_gain(b.fairness, x.fairness);
  }
  return t;
}

inline ComparisonTable compare(const RunReport& baseline, const RunReport& treatment) {
  return compare(summarize(baseline), summarize(treatment));
}

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::optional<double> json_opt(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline void write_series(const std::filesystem::path& p, std::span<const SeriesPoint> s) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << "time,value\n";
  for (const auto& pt : s) out << format_double(pt.time) << ',' << format_double(pt.value) << '\n';
}

inline void write_cdf(const std::filesystem::path& p, const std::optional<std::vector<CdfPoint>>& c) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << "value,cumulative\n";
  if (!c) return;
  for (const auto& pt : *c) out << format_double(pt.value) << ',' << format_double(pt.cumulative) << '\n';
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["scenario_id"] = s.scenario_id;
  j["seed"] = s.seed;
  j["episode_index"] = s.episode_index;
  j["episodes_pooled"] = s.episodes_pooled;
  j["duration_s"] = s.duration;
  j["traffic_signature"] = s.traffic_signature;
  j["metadata"] = s.metadata;
  auto& cats = j["categories"];
  for (auto c : kAllCategories) {
    const auto& cs = s.per_category[index_of(c)];
    nlohmann::ordered_json cj;
    cj["mean_latency_s"] = detail::opt_json(cs.mean_latency);
    cj["mean_throughput_bps"] = cs.mean_throughput;
    cj["fairness"] = detail::opt_json(cs.fairness);
    cj["packets_received"] = cs.packets_received;
    cj["packets_dropped"] = cs.packets_dropped;
    cj["packets_generated"] = cs.packets_generated;
    cj["delivery_ratio"] = cs.delivery_ratio;
    cats[std::string(to_string(c))] = cj;
  }
  j["control"] = {{"sent", s.control.sent},
                  {"delivered", s.control.delivered},
                  {"dropped", s.control.dropped},
                  {"bytes_sent", s.control.bytes_sent}};
  return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  s.scenario_id = j.at("scenario_id").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.episode_index = j.at("episode_index").get<int>();
  s.episodes_pooled = j.at("episodes_pooled").get<int>();
  s.duration = j.at("duration_s").get<double>();
  s.traffic_signature = j.at("traffic_signature").get<std::string>();
  s.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  for (auto c : kAllCategories) {
    const auto& cj = j.at("categories").at(std::string(to_string(c)));
    auto& cs = s.per_category[index_of(c)];
    cs.mean_latency = detail::json_opt(cj.at("mean_latency_s"));
    cs.mean_throughput = cj.at("mean_throughput_bps").get<double>();
    cs.fairness = detail::json_opt(cj.at("fairness"));
    cs.packets_received = cj.at("packets_received").get<std::uint64_t>();
    cs.packets_dropped = cj.at("packets_dropped").get<std::uint64_t>();
    cs.packets_generated = cj.at("packets_generated").get<std::uint64_t>();
    cs.delivery_ratio = cj.at("delivery_ratio").get<double>();
  }
  const auto& ctl = j.at("control");
  s.control.sent = ctl.at("sent").get<std::uint64_t>();
  s.control.delivered = ctl.at("delivered").get<std::uint64_t>();
  s.control.dropped = ctl.at("dropped").get<std::uint64_t>();
  s.control.bytes_sent = ctl.at("bytes_sent").get<std::uint64_t>();
  return s;
}

inline constexpr const char* kSummaryFile = "summary.json";

/// Writes summary.json plus `time,value` series and `value,cumulative` CDFs
/// per category into `dir`.
inline void export_report(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / kSummaryFile);
    if (!out) throw std::runtime_error("cannot write " + (dir / kSummaryFile).string());
    out << to_json(summarize(r)).dump(2) << '\n';
  }
  for (auto c : kAllCategories) {
    const std::string cat(to_string(c));
    const auto& cr = r.at(c);
    detail::write_series(dir / ("latency_" + cat + ".csv"), cr.latency_series);
    detail::write_series(dir / ("throughput_" + cat + ".csv"), cr.throughput_series);
    detail::write_cdf(dir / ("cdf_latency_" + cat + ".csv"), cr.cdf_latency);
    detail::write_cdf(dir / ("cdf_throughput_" + cat + ".csv"), cr.cdf_throughput);
  }
}

inline RunSummary load_summary(const std::filesystem::path& dir) {
  std::ifstream in(dir / kSummaryFile);
  if (!in) throw std::runtime_error("no " + std::string(kSummaryFile) + " in " + dir.string());
  return summary_from_json(nlohmann::json::parse(in));
}

}  // namespace vanetq
