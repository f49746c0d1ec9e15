#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorasim/phy.hpp"
#include "lorasim/schedule.hpp"

namespace lorasim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance_m(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Local oscillator with rate error plus periodic NTP-style correction.
// Each sync re-draws the residual offset within +/- sync_error_bound.
struct ClockModel {
  double drift_ppm = 20.0;
  double initial_offset_ms = 0.0;
  double sync_period_s = 64.0;
  double sync_error_bound_ms = 1.0;

  void validate() const {
    if (std::abs(drift_ppm) > 1000.0)
      throw ValidationError("clock drift above 1000 ppm");
    if (sync_period_s <= 0)
      throw ValidationError("sync period must be positive");
    if (sync_error_bound_ms < 0)
      throw ValidationError("negative sync error bound");
  }
};

// global = local + drift * (local - last_sync) + residual, with the residual
// re-drawn at each sync. Error stays within
// sync_error_bound + drift * (elapsed since sync).
inline double local_to_global_ms(const ClockModel& clock, double local_ms,
                                 double last_sync_global_ms,
                                 double residual_ms = 0.0) {
  if (local_ms < 0) throw std::invalid_argument("negative local time");
  const double drift = clock.drift_ppm * 1e-6;
  return local_ms + drift * (local_ms - last_sync_global_ms) + residual_ms;
}

// Engine-side clock state, kept in microseconds.
class DriftingClock {
 public:
  explicit DriftingClock(const ClockModel& model)
      : model_(model), residual_us_(model.initial_offset_ms * 1000.0) {
    model.validate();
  }

  double to_global(double local_us) const {
    const double d = model_.drift_ppm * 1e-6;
    return local_us + d * (local_us - last_sync_us_) + residual_us_;
  }

  double to_local(double global_us) const {
    const double d = model_.drift_ppm * 1e-6;
    return (global_us + d * last_sync_us_ - residual_us_) / (1.0 + d);
  }

  // |local reading - true time| at a global instant, in ms.
  double error_ms_at(double global_us) const {
    return std::abs(to_local(global_us) - global_us) / 1000.0;
  }

  void resync(double now_global_us, double new_residual_us) {
    last_sync_us_ = now_global_us;
    residual_us_ = new_residual_us;
  }

  const ClockModel& model() const { return model_; }

 private:
  ClockModel model_;
  double last_sync_us_ = 0.0;
  double residual_us_ = 0.0;
};

enum class BusRequestResult { GrantedNow, Enqueued };

// The exclusive command bus between a master and its radios. At most one
// owner at any simulated instant; waiters are served strict FIFO.
struct BusState {
  std::optional<int> owner;
  std::deque<int> grant_queue;
  std::optional<std::int64_t> busy_until_us;

  BusRequestResult request(int node, std::int64_t now_us) {
    (void)now_us;
    if (owner == node ||
        std::find(grant_queue.begin(), grant_queue.end(), node) !=
            grant_queue.end())
      throw std::logic_error("duplicate outstanding bus request from node " +
                             std::to_string(node));
    if (!owner) {
      owner = node;
      return BusRequestResult::GrantedNow;
    }
    grant_queue.push_back(node);
    return BusRequestResult::Enqueued;
  }

  // Ownership transfers to the queue head atomically at `now`.
  std::optional<int> release(int node, std::int64_t now_us) {
    if (owner != node)
      throw std::logic_error("bus release by non-owner node " +
                             std::to_string(node));
    busy_until_us = now_us;
    if (grant_queue.empty()) {
      owner.reset();
      return std::nullopt;
    }
    owner = grant_queue.front();
    grant_queue.pop_front();
    return owner;
  }
};

struct MasterSpec {
  int master_id = 0;
  std::vector<std::pair<int, RadioConfig>> radios;  // (node_id, config)
  Vec2 position_m;
  ClockModel clock;
  CapacityBudget budget;

  void validate() const {
    clock.validate();
    budget.validate();
    if (radios.empty())
      throw ValidationError("master " + std::to_string(master_id) +
                            " has no radios");
    if (static_cast<int>(radios.size()) > max_radios_per_master(budget))
      throw ValidationError("master " + std::to_string(master_id) +
                            " exceeds its GPIO fan-out capacity");
    for (const auto& [node, cfg] : radios) {
      if (node < 0) throw ValidationError("negative node id");
      cfg.validate();
    }
  }
};

struct Topology {
  std::vector<MasterSpec> masters;
  Vec2 gateway_position_m{50.0, 0.0};  // default: 50 m line of sight
  ChannelTable channel_table;
  LinkModel link_model;

  void validate() const {
    if (masters.empty()) throw ValidationError("topology has no masters");
    channel_table.validate();
    link_model.validate();
    std::set<int> seen;
    for (const MasterSpec& m : masters) {
      m.validate();
      for (const auto& [node, cfg] : m.radios) {
        if (!seen.insert(node).second)
          throw ValidationError("duplicate node id " + std::to_string(node));
        if (cfg.channel_index >= channel_table.size())
          throw ValidationError("node " + std::to_string(node) +
                                " channel index outside channel table");
      }
    }
  }

  int total_radios() const {
    int n = 0;
    for (const MasterSpec& m : masters) n += static_cast<int>(m.radios.size());
    return n;
  }

  // Radios grouped by bus, one bus per master, in master order.
  std::vector<std::vector<int>> nodes_by_bus() const {
    std::vector<std::vector<int>> out;
    for (const MasterSpec& m : masters) {
      std::vector<int> bus;
      for (const auto& [node, cfg] : m.radios) bus.push_back(node);
      out.push_back(std::move(bus));
    }
    return out;
  }

  std::map<int, RadioConfig> config_by_node() const {
    std::map<int, RadioConfig> out;
    for (const MasterSpec& m : masters)
      for (const auto& [node, cfg] : m.radios) out.emplace(node, cfg);
    return out;
  }
};

}  // namespace lorasim
