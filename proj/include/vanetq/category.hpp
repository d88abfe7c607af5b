#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace vanetq {

/// Application service carried by a vehicle. The numeric order is the
/// order used for every per-category array in the library.
enum class ServiceCategory : std::uint8_t { VO = 0, VI = 1, HDMAP = 2, BE = 3 };

inline constexpr std::size_t kNumCategories = 4;

inline constexpr std::array<ServiceCategory, kNumCategories> kAllCategories{
    ServiceCategory::VO, ServiceCategory::VI, ServiceCategory::HDMAP, ServiceCategory::BE};

template <typename T>
using PerCategory = std::array<T, kNumCategories>;

constexpr std::size_t index_of(ServiceCategory c) { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(ServiceCategory c) {
  switch (c) {
    case ServiceCategory::VO: return "VO";
    case ServiceCategory::VI: return "VI";
    case ServiceCategory::HDMAP: return "HDMAP";
    case ServiceCategory::BE: return "BE";
  }
  return "?";
}

inline std::optional<ServiceCategory> parse_category(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

/// Traffic profile and QoS targets of one service category.
struct CategoryProfile {
  double data_rate_bps = 0.0;     // application generation rate
  double max_wait_s = 0.0;        // upper bound of the waiting-time action
  double throughput_min_bps = 0.0;
  double latency_max_s = 0.0;

  bool operator==(const CategoryProfile&) const = default;
};

inline PerCategory<CategoryProfile> default_profiles() {
  PerCategory<CategoryProfile> p{};
  p[index_of(ServiceCategory::VO)] = {100e3, 0.92, 100e3, 0.150};
  p[index_of(ServiceCategory::VI)] = {5e6, 2.0, 1.25e6, 0.100};
  p[index_of(ServiceCategory::HDMAP)] = {4e6, 2.0, 1.25e6, 0.100};
  p[index_of(ServiceCategory::BE)] = {28e6, 8.0, 1.0e6, 1.000};
  return p;
}

}  // namespace vanetq
