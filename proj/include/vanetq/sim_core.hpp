#pragma once

#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace vanetq {

/// Virtual time of one episode.
class SimClock {
 public:
  explicit SimClock(double episode_duration = 0.0, int episode_index = 0)
      : episode_duration_(episode_duration), episode_index_(episode_index) {
    if (!(episode_duration >= 0.0)) throw std::invalid_argument("episode duration must be >= 0");
  }

  double now() const { return now_; }
  double episode_duration() const { return episode_duration_; }
  int episode_index() const { return episode_index_; }

  void advance_to(double t) {
    if (t < now_) throw std::logic_error("clock moved backwards");
    if (t > episode_duration_) throw std::logic_error("clock moved past episode end");
    now_ = t;
  }

 private:
  double now_ = 0.0;
  double episode_duration_;
  int episode_index_;
};

struct EventHandle {
  std::uint64_t sequence = 0;
  bool operator==(const EventHandle&) const = default;
};

/// Time-ordered event queue. Ties on fire time dequeue in insertion order.
template <typename Payload>
class EventQueue {
 public:
  struct Record {
    double fire_time;
    std::uint64_t sequence;
    Payload payload;
  };

  EventHandle schedule(double now, double fire_time, Payload payload) {
    if (fire_time < now) throw std::logic_error("event scheduled in the past");
    const std::uint64_t seq = next_sequence_++;
    heap_.push(Record{fire_time, seq, std::move(payload)});
    return EventHandle{seq};
  }

  // The handle must refer to an event that has not fired yet.
  void cancel(EventHandle h) { cancelled_.insert(h.sequence); }

  bool empty() {
    skip_cancelled();
    return heap_.empty();
  }

  double next_time() {
    skip_cancelled();
    return heap_.top().fire_time;
  }

  Record pop() {
    skip_cancelled();
    Record r = heap_.top();
    heap_.pop();
    return r;
  }

 private:
  struct Later {
    bool operator()(const Record& a, const Record& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.sequence > b.sequence;
    }
  };

  void skip_cancelled() {
    while (!heap_.empty()) {
      auto it = cancelled_.find(heap_.top().sequence);
      if (it == cancelled_.end()) return;
      cancelled_.erase(it);
      heap_.pop();
    }
  }

  std::priority_queue<Record, std::vector<Record>, Later> heap_;
  std::unordered_set<std::uint64_t> cancelled_;
  std::uint64_t next_sequence_ = 0;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named pseudo-random substream. Identical (seed, label) pairs always
/// yield identical sequences.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view label) {
    const std::uint64_t h = fnv1a64(label);
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [lo, hi], both inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

 private:
  std::mt19937_64 engine_;
};

inline RngStream derive_stream(std::uint64_t master_seed, std::string_view label) {
  return RngStream(master_seed, label);
}

}  // namespace vanetq
