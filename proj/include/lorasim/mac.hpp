#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lorasim/node.hpp"
#include "lorasim/rng.hpp"

namespace lorasim {

enum class Outcome { Received, Collided, Lost, DeadlineMissed, Undeliverable };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Received: return "received";
    case Outcome::Collided: return "collided";
    case Outcome::Lost: return "lost";
    case Outcome::DeadlineMissed: return "deadline-missed";
    case Outcome::Undeliverable: return "undeliverable";
  }
  return "?";
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "received") return Outcome::Received;
  if (s == "collided") return Outcome::Collided;
  if (s == "lost") return Outcome::Lost;
  if (s == "deadline-missed") return Outcome::DeadlineMissed;
  if (s == "undeliverable") return Outcome::Undeliverable;
  throw ParseError("unknown outcome '" + s + "'");
}

// One transmission attempt, from release to its final fate.
struct AttemptRecord {
  int node_id = 0;
  std::int64_t seq = 0;                   // per-run attempt index
  std::int64_t scheduled_release_ms = 0;  // schedule value, local clock
  std::int64_t intended_global_us = 0;    // release mapped to the global axis
  std::optional<std::int64_t> air_start_us;
  std::optional<std::int64_t> arrival_us;  // gateway delivery instant
  std::optional<std::int64_t> deadline_us;
  std::int64_t toa_us = 0;
  int spreading_factor = 7;
  int channel_index = 0;
  std::vector<std::uint8_t> payload;
  int backoffs = 0;
  int hops = 0;
  double rssi_dbm = 0.0;  // valid once airborne
  double snr_db = 0.0;
  std::optional<Outcome> outcome;

  double release_error_ms() const {
    return air_start_us ? static_cast<double>(*air_start_us -
                                              intended_global_us) /
                              1000.0
                        : 0.0;
  }
};

// Carrier-sense parameters: listen, back off when busy, hop through the
// channel order until idle or out of hops.
struct CsmaParams {
  double sense_duration_ms = 5.0;
  double backoff_min_ms = 10.0;
  double backoff_max_ms = 50.0;
  int max_hops = 8;
  std::vector<int> hop_order;
  double backoff_energy_mj = 0.356;
  double sensing_failure_prob = 0.0;  // 0: perfect carrier sensing

  void validate() const {
    if (sense_duration_ms < 0) throw ValidationError("negative sense duration");
    if (backoff_min_ms < 0 || backoff_min_ms > backoff_max_ms)
      throw ValidationError("backoff window must satisfy 0 <= min <= max");
    if (max_hops < 0) throw ValidationError("negative hop limit");
    if (backoff_energy_mj < 0) throw ValidationError("negative backoff energy");
    if (sensing_failure_prob < 0 || sensing_failure_prob > 1)
      throw ValidationError("sensing failure probability outside [0,1]");
  }

  std::size_t hop_position(int channel) const {
    if (hop_order.empty()) throw std::invalid_argument("empty hop order");
    auto it = std::find(hop_order.begin(), hop_order.end(), channel);
    if (it == hop_order.end())
      throw std::invalid_argument("channel " + std::to_string(channel) +
                                  " not in hop order");
    return static_cast<std::size_t>(it - hop_order.begin());
  }
};

struct CsmaScanResult {
  std::optional<int> channel;  // unset: hops exhausted, undeliverable
  int backoffs = 0;
  int hops = 0;
  double elapsed_ms = 0.0;  // sensing plus backoff time until the decision
};

// One attempt against a static busy view. Each busy sense costs one backoff
// and one hop; a busy sense with no hops left ends the attempt, so
// backoffs == hops <= max_hops always holds. The engine replays the same
// rule event by event against the live channel occupancy.
template <typename BusyPred>
CsmaScanResult csma_scan(const CsmaParams& p, int start_channel,
                         BusyPred&& busy, RngStream& backoff_rng) {
  p.validate();
  std::size_t pos = p.hop_position(start_channel);
  CsmaScanResult r;
  r.elapsed_ms = p.sense_duration_ms;
  for (;;) {
    const int ch = p.hop_order[pos];
    if (!busy(ch)) {
      r.channel = ch;
      return r;
    }
    if (r.hops == p.max_hops) return r;
    ++r.backoffs;
    ++r.hops;
    pos = (pos + 1) % p.hop_order.size();
    r.elapsed_ms +=
        backoff_rng.uniform(p.backoff_min_ms, p.backoff_max_ms) +
        p.sense_duration_ms;
  }
}

// Received frames that arrived after their deadline are re-marked; collided
// and lost frames keep their fate.
inline void apply_deadline(AttemptRecord& rec) {
  if (!rec.deadline_us || !rec.arrival_us) return;
  if (rec.outcome == Outcome::Received && *rec.arrival_us > *rec.deadline_us)
    rec.outcome = Outcome::DeadlineMissed;
}

}  // namespace lorasim
