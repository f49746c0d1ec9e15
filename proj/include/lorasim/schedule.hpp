#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lorasim/phy.hpp"
#include "lorasim/rng.hpp"

namespace lorasim {

// The unit of TDMA control: which radio transmits when, on which SF/CH.
struct ScheduleEvent {
  int node_id = 0;
  std::int64_t release_ms = 0;
  int spreading_factor = 7;
  int channel_index = 0;

  bool operator==(const ScheduleEvent&) const = default;
};

inline bool release_order(const ScheduleEvent& a, const ScheduleEvent& b) {
  return a.release_ms != b.release_ms ? a.release_ms < b.release_ms
                                      : a.node_id < b.node_id;
}

struct Schedule {
  std::vector<ScheduleEvent> events;  // sorted by (release, node)
  std::int64_t horizon_ms = 0;
  bool periodic = false;
  std::optional<std::int64_t> period_ms;

  bool operator==(const Schedule&) const = default;

  void validate() const {
    if (horizon_ms < 0) throw ValidationError("negative horizon");
    if (periodic && (!period_ms || *period_ms <= 0))
      throw ValidationError("periodic schedule needs a positive period");
    std::map<int, std::int64_t> phase;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const ScheduleEvent& e = events[i];
      if (i > 0 && release_order(e, events[i - 1]))
        throw ValidationError("events not sorted at index " + std::to_string(i));
      if (e.node_id < 0) throw ValidationError("negative node id");
      if (e.release_ms < 0 || e.release_ms > horizon_ms)
        throw ValidationError("release " + std::to_string(e.release_ms) +
                              " ms outside horizon");
      if (e.spreading_factor < kMinSf || e.spreading_factor > kMaxSf)
        throw ValidationError("event spreading factor outside 7..12");
      if (e.channel_index < 0) throw ValidationError("negative channel index");
      if (periodic) {
        auto [it, fresh] = phase.emplace(e.node_id, e.release_ms % *period_ms);
        if (!fresh && e.release_ms % *period_ms != it->second)
          throw ValidationError("node " + std::to_string(e.node_id) +
                                " releases are not phase + k*period");
      }
    }
  }
};

inline Schedule generate_periodic(int nodes, std::int64_t period_ms,
                                  std::span<const std::int64_t> phase_offsets_ms,
                                  std::span<const int> sf_per_node,
                                  std::span<const int> ch_per_node,
                                  std::int64_t horizon_ms) {
  if (nodes < 1) throw std::invalid_argument("need at least one node");
  if (period_ms < 1) throw std::invalid_argument("period must be positive");
  if (static_cast<int>(phase_offsets_ms.size()) != nodes ||
      static_cast<int>(sf_per_node.size()) != nodes ||
      static_cast<int>(ch_per_node.size()) != nodes)
    throw std::invalid_argument("per-node lists must have one entry per node");
  Schedule s;
  s.horizon_ms = horizon_ms;
  s.periodic = true;
  s.period_ms = period_ms;
  for (int n = 0; n < nodes; ++n) {
    if (phase_offsets_ms[n] < 0 || phase_offsets_ms[n] >= period_ms)
      throw std::invalid_argument("phase offset outside [0, period)");
    for (std::int64_t t = phase_offsets_ms[n]; t <= horizon_ms; t += period_ms)
      s.events.push_back({n, t, sf_per_node[n], ch_per_node[n]});
  }
  std::sort(s.events.begin(), s.events.end(), release_order);
  s.validate();
  return s;
}

// Releases drawn uniformly over the horizon; one node drawn per event.
// Same seed, same schedule.
inline Schedule generate_aperiodic(int nodes, int total_events,
                                   std::int64_t horizon_ms, std::uint64_t seed,
                                   std::span<const int> sf_per_node,
                                   std::span<const int> ch_per_node) {
  if (nodes < 1) throw std::invalid_argument("need at least one node");
  if (total_events < 0) throw std::invalid_argument("negative event count");
  if (static_cast<int>(sf_per_node.size()) != nodes ||
      static_cast<int>(ch_per_node.size()) != nodes)
    throw std::invalid_argument("per-node lists must have one entry per node");
  Schedule s;
  s.horizon_ms = horizon_ms;
  RngStream rng(seed, "aperiodic");
  for (int i = 0; i < total_events; ++i) {
    const int n = static_cast<int>(rng.uniform_int(0, nodes - 1));
    const std::int64_t t = rng.uniform_int(0, horizon_ms);
    s.events.push_back({n, t, sf_per_node[n], ch_per_node[n]});
  }
  std::sort(s.events.begin(), s.events.end(), release_order);
  s.validate();
  return s;
}

// Serialization law of one exclusive bus: every frame occupies it for the
// command overhead plus the full airtime, so the feasible period scales
// linearly with the radio count.
inline double min_period_ms(int sf, int payload_len, int radios_on_bus,
                            double bus_overhead_ms, RadioConfig cfg) {
  if (radios_on_bus < 1)
    throw std::invalid_argument("need at least one radio on the bus");
  if (bus_overhead_ms < 0) throw std::invalid_argument("negative bus overhead");
  cfg.spreading_factor = sf;
  return radios_on_bus * (time_on_air_ms(cfg, payload_len) + bus_overhead_ms);
}

struct ScheduleConflict {
  enum class Kind { Bus, Air };
  Kind kind = Kind::Bus;
  int node_a = 0;
  int node_b = 0;
  std::int64_t release_a_ms = 0;
  std::int64_t release_b_ms = 0;
  int bus_id = -1;  // -1 for air conflicts
};

// Feasibility check before simulating. Bus conflicts: two events on one bus
// whose [release, release + ToA + overhead) windows overlap. Air conflicts:
// same channel and SF with overlapping airtime across buses. Empty result
// means the schedule is conflict-free.
inline std::vector<ScheduleConflict> validate_schedule(
    const Schedule& s, const std::vector<std::vector<int>>& nodes_by_bus,
    const std::map<int, RadioConfig>& cfg_by_node, double bus_overhead_ms,
    int payload_len = 21) {
  s.validate();
  std::map<int, int> bus_of;
  for (std::size_t b = 0; b < nodes_by_bus.size(); ++b)
    for (int n : nodes_by_bus[b]) bus_of[n] = static_cast<int>(b);

  struct Window {
    const ScheduleEvent* ev;
    int bus;
    double start, air_end, bus_end;
  };
  std::vector<Window> win;
  win.reserve(s.events.size());
  for (const ScheduleEvent& e : s.events) {
    auto bus_it = bus_of.find(e.node_id);
    auto cfg_it = cfg_by_node.find(e.node_id);
    if (bus_it == bus_of.end() || cfg_it == cfg_by_node.end())
      throw ValidationError("unknown node id " + std::to_string(e.node_id));
    RadioConfig cfg = cfg_it->second;
    cfg.spreading_factor = e.spreading_factor;
    const double toa = time_on_air_ms(cfg, payload_len);
    const double start = static_cast<double>(e.release_ms);
    win.push_back(
        {&e, bus_it->second, start, start + toa, start + toa + bus_overhead_ms});
  }

  std::vector<ScheduleConflict> out;
  for (std::size_t i = 0; i < win.size(); ++i) {
    for (std::size_t j = i + 1; j < win.size(); ++j) {
      const Window& a = win[i];
      const Window& b = win[j];
      if (a.bus == b.bus && a.start < b.bus_end && b.start < a.bus_end) {
        out.push_back({ScheduleConflict::Kind::Bus, a.ev->node_id,
                       b.ev->node_id, a.ev->release_ms, b.ev->release_ms,
                       a.bus});
      } else if (a.bus != b.bus &&
                 a.ev->channel_index == b.ev->channel_index &&
                 a.ev->spreading_factor == b.ev->spreading_factor &&
                 a.start < b.air_end && b.start < a.air_end) {
        out.push_back({ScheduleConflict::Kind::Air, a.ev->node_id,
                       b.ev->node_id, a.ev->release_ms, b.ev->release_ms, -1});
      }
    }
  }
  return out;
}

inline long long memory_footprint_bytes(int bytes_per_event,
                                        double events_per_s_per_device,
                                        int devices, double duration_s) {
  if (bytes_per_event < 0 || events_per_s_per_device < 0 || devices < 0 ||
      duration_s < 0)
    throw std::invalid_argument("memory footprint factors must be non-negative");
  return std::llround(static_cast<double>(bytes_per_event) *
                      events_per_s_per_device * devices * duration_s);
}

// Platform budget of one master: what the supply can feed and what the pin
// header can fan out to.
struct CapacityBudget {
  double supply_current_a = 2.5;
  double board_active_current_a = 0.5;
  double radio_tx_current_a = 0.7;
  double radio_idle_current_a = 5e-9;
  int gpio_pins_total = 28;
  int gpio_pins_per_radio = 4;  // NSS, NRST, BUSY, DIO1
  int bytes_per_event = 13;

  void validate() const {
    if (supply_current_a < 0 || board_active_current_a < 0 ||
        radio_tx_current_a < 0 || radio_idle_current_a < 0)
      throw ValidationError("negative current in capacity budget");
    if (supply_current_a < board_active_current_a)
      throw ValidationError("supply current below board active current");
    if (gpio_pins_total < 0 || gpio_pins_per_radio < 0 || bytes_per_event < 0)
      throw ValidationError("negative count in capacity budget");
  }
};

struct PowerReport {
  double headroom_a = 0.0;
  bool feasible = false;
  int max_concurrent_tx = 0;
};

inline PowerReport power_budget(const CapacityBudget& b, int concurrent_tx) {
  b.validate();
  if (concurrent_tx < 0)
    throw std::invalid_argument("negative transmitter count");
  const double headroom = b.supply_current_a - b.board_active_current_a;
  if (b.radio_tx_current_a <= 0) {
    if (concurrent_tx > 0)
      throw std::invalid_argument(
          "radio tx current is zero but transmitters requested");
    return {headroom, true, 0};
  }
  const bool feasible = concurrent_tx * b.radio_tx_current_a <= headroom + 1e-12;
  const int max_tx =
      static_cast<int>(std::floor(headroom / b.radio_tx_current_a + 1e-9));
  return {headroom, feasible, max_tx};
}

inline int max_radios_per_master(int gpio_total, int gpio_per_radio) {
  if (gpio_per_radio < 1)
    throw std::invalid_argument("need at least one GPIO pin per radio");
  if (gpio_total < 0) throw std::invalid_argument("negative GPIO count");
  return gpio_total / gpio_per_radio;
}

inline int max_radios_per_master(const CapacityBudget& b) {
  return max_radios_per_master(b.gpio_pins_total, b.gpio_pins_per_radio);
}

// --- schedule file format ---------------------------------------------
// {"horizon_ms":..,"period_ms":..|null,"events":[{"node":..,"t_ms":..,
//  "sf":..,"ch":..},...]}  Events must be sorted; the parser rejects
// unsorted input.

inline std::string schedule_to_json(const Schedule& s) {
  nlohmann::ordered_json j;
  j["horizon_ms"] = s.horizon_ms;
  if (s.period_ms)
    j["period_ms"] = *s.period_ms;
  else
    j["period_ms"] = nullptr;
  j["events"] = nlohmann::ordered_json::array();
  for (const ScheduleEvent& e : s.events) {
    j["events"].push_back({{"node", e.node_id},
                           {"t_ms", e.release_ms},
                           {"sf", e.spreading_factor},
                           {"ch", e.channel_index}});
  }
  return j.dump(2) + "\n";
}

inline Schedule schedule_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("schedule: ") + e.what());
  }
  Schedule s;
  try {
    s.horizon_ms = j.at("horizon_ms").get<std::int64_t>();
    if (j.contains("period_ms") && !j.at("period_ms").is_null()) {
      s.period_ms = j.at("period_ms").get<std::int64_t>();
      s.periodic = true;
    }
    for (const auto& je : j.at("events")) {
      s.events.push_back({je.at("node").get<int>(),
                          je.at("t_ms").get<std::int64_t>(),
                          je.at("sf").get<int>(), je.at("ch").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schedule: ") + e.what());
  }
  for (std::size_t i = 1; i < s.events.size(); ++i)
    if (release_order(s.events[i], s.events[i - 1]))
      throw ParseError("schedule: events not sorted at index " +
                       std::to_string(i));
  s.validate();
  return s;
}

}  // namespace lorasim
