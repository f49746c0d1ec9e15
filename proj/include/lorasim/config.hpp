#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lorasim/engine.hpp"

namespace lorasim {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

namespace detail {

inline nlohmann::json canonical_scenario_json(const Scenario& sc) {
  nlohmann::json j;  // plain json sorts keys: canonical by construction
  j["name"] = sc.name;
  j["horizon_ms"] = sc.horizon_ms;
  j["mac"] = to_string(sc.mac);
  j["bus_overhead_ms"] = sc.bus_overhead_ms;
  j["payload_fixed_len"] =
      sc.payload.fixed_len ? nlohmann::json(*sc.payload.fixed_len) : nullptr;
  switch (sc.deadline.kind) {
    case DeadlinePolicy::Kind::None: j["deadline"] = "none"; break;
    case DeadlinePolicy::Kind::Implicit: j["deadline"] = "implicit"; break;
    case DeadlinePolicy::Kind::Fixed: j["deadline"] = sc.deadline.fixed_ms; break;
  }
  j["energy"] = {{"supply_voltage_v", sc.energy.supply_voltage_v},
                 {"tx_current_a", sc.energy.tx_current_a},
                 {"backoff_energy_mj", sc.energy.backoff_energy_mj}};
  if (sc.mac == MacKind::Csma) {
    j["csma"] = {{"sense_duration_ms", sc.csma.sense_duration_ms},
                 {"backoff_min_ms", sc.csma.backoff_min_ms},
                 {"backoff_max_ms", sc.csma.backoff_max_ms},
                 {"max_hops", sc.csma.max_hops},
                 {"hop_order", sc.csma.hop_order},
                 {"backoff_energy_mj", sc.csma.backoff_energy_mj},
                 {"sensing_failure_prob", sc.csma.sensing_failure_prob}};
  }
  j["channel_table_hz"] = sc.topology.channel_table.frequencies_hz;
  j["gateway_position_m"] = {sc.topology.gateway_position_m.x,
                             sc.topology.gateway_position_m.y};
  const LinkModel& lm = sc.topology.link_model;
  nlohmann::json floors;
  for (const auto& [sf, db] : lm.snr_floor_db_by_sf)
    floors[std::to_string(sf)] = db;
  j["link"] = {{"path_loss_exponent", lm.path_loss_exponent},
               {"reference_loss_db", lm.reference_loss_db},
               {"reference_distance_m", lm.reference_distance_m},
               {"shadowing_sigma_db", lm.shadowing_sigma_db},
               {"noise_floor_dbm", lm.noise_floor_dbm},
               {"snr_floor_db_by_sf", floors},
               {"capture_threshold_db",
                lm.capture_threshold_db ? nlohmann::json(*lm.capture_threshold_db)
                                        : nullptr}};
  j["masters"] = nlohmann::json::array();
  for (const MasterSpec& m : sc.topology.masters) {
    nlohmann::json radios = nlohmann::json::array();
    for (const auto& [node, cfg] : m.radios)
      radios.push_back({{"node", node},
                        {"sf", cfg.spreading_factor},
                        {"bw_hz", cfg.bandwidth_hz},
                        {"coding_rate", cfg.coding_rate},
                        {"ch", cfg.channel_index},
                        {"tx_power_dbm", cfg.tx_power_dbm},
                        {"preamble_symbols", cfg.preamble_symbols},
                        {"crc", cfg.crc_enabled},
                        {"explicit_header", cfg.explicit_header}});
    j["masters"].push_back(
        {{"id", m.master_id},
         {"position_m", {m.position_m.x, m.position_m.y}},
         {"clock",
          {{"drift_ppm", m.clock.drift_ppm},
           {"initial_offset_ms", m.clock.initial_offset_ms},
           {"sync_period_s", m.clock.sync_period_s},
           {"sync_error_bound_ms", m.clock.sync_error_bound_ms}}},
         {"budget",
          {{"supply_current_a", m.budget.supply_current_a},
           {"board_active_current_a", m.budget.board_active_current_a},
           {"radio_tx_current_a", m.budget.radio_tx_current_a},
           {"radio_idle_current_a", m.budget.radio_idle_current_a},
           {"gpio_pins_total", m.budget.gpio_pins_total},
           {"gpio_pins_per_radio", m.budget.gpio_pins_per_radio},
           {"bytes_per_event", m.budget.bytes_per_event}}},
         {"radios", radios}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const ScheduleEvent& e : sc.schedule.events)
    events.push_back({{"node", e.node_id},
                      {"t_ms", e.release_ms},
                      {"sf", e.spreading_factor},
                      {"ch", e.channel_index}});
  j["schedule"] = {{"horizon_ms", sc.schedule.horizon_ms},
                   {"period_ms", sc.schedule.period_ms
                                     ? nlohmann::json(*sc.schedule.period_ms)
                                     : nullptr},
                   {"events", events}};
  return j;
}

}  // namespace detail

// Stable hash of the fully resolved scenario; identifies a run's inputs in
// every trace and report.
inline std::string scenario_digest(const Scenario& sc) {
  const std::string canon = detail::canonical_scenario_json(sc).dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

namespace detail {

inline CsmaParams csma_from_json(const nlohmann::json& j) {
  CsmaParams p;
  p.sense_duration_ms = j.value("sense_duration_ms", p.sense_duration_ms);
  p.backoff_min_ms = j.value("backoff_min_ms", p.backoff_min_ms);
  p.backoff_max_ms = j.value("backoff_max_ms", p.backoff_max_ms);
  p.max_hops = j.value("max_hops", p.max_hops);
  if (j.contains("hop_order"))
    p.hop_order = j.at("hop_order").get<std::vector<int>>();
  p.backoff_energy_mj = j.value("backoff_energy_mj", p.backoff_energy_mj);
  p.sensing_failure_prob =
      j.value("sensing_failure_prob", p.sensing_failure_prob);
  return p;
}

inline RadioConfig radio_from_json(const nlohmann::json& j) {
  RadioConfig cfg;
  cfg.spreading_factor = j.value("sf", cfg.spreading_factor);
  cfg.bandwidth_hz = j.value("bw_hz", cfg.bandwidth_hz);
  cfg.coding_rate = j.value("coding_rate", cfg.coding_rate);
  cfg.channel_index = j.value("ch", cfg.channel_index);
  cfg.tx_power_dbm = j.value("tx_power_dbm", cfg.tx_power_dbm);
  cfg.preamble_symbols = j.value("preamble_symbols", cfg.preamble_symbols);
  cfg.crc_enabled = j.value("crc", cfg.crc_enabled);
  cfg.explicit_header = j.value("explicit_header", cfg.explicit_header);
  return cfg;
}

inline Schedule schedule_from_config(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir) {
  if (j.contains("file")) {
    const std::filesystem::path p = j.at("file").get<std::string>();
    return schedule_from_json(
        read_file(p.is_absolute() ? p : base_dir / p));
  }
  if (j.contains("periodic")) {
    const auto& g = j.at("periodic");
    const int nodes = g.at("nodes").get<int>();
    const std::int64_t period = g.at("period_ms").get<std::int64_t>();
    const std::int64_t horizon = g.at("horizon_ms").get<std::int64_t>();
    std::vector<std::int64_t> phases;
    if (g.contains("phases_ms"))
      phases = g.at("phases_ms").get<std::vector<std::int64_t>>();
    else  // stagger slots evenly by default
      for (int i = 0; i < nodes; ++i)
        phases.push_back(i * period / std::max(nodes, 1));
    auto broadcast = [&](const char* key, int fallback) {
      std::vector<int> v;
      if (!g.contains(key)) {
        v.assign(nodes, fallback);
      } else if (g.at(key).is_array()) {
        v = g.at(key).get<std::vector<int>>();
      } else {
        v.assign(nodes, g.at(key).get<int>());
      }
      return v;
    };
    return generate_periodic(nodes, period, phases, broadcast("sf", 7),
                             broadcast("ch", 0), horizon);
  }
  if (j.contains("aperiodic")) {
    const auto& g = j.at("aperiodic");
    const int nodes = g.at("nodes").get<int>();
    auto broadcast = [&](const char* key, int fallback) {
      std::vector<int> v;
      if (!g.contains(key)) {
        v.assign(nodes, fallback);
      } else if (g.at(key).is_array()) {
        v = g.at(key).get<std::vector<int>>();
      } else {
        v.assign(nodes, g.at(key).get<int>());
      }
      return v;
    };
    return generate_aperiodic(nodes, g.at("events").get<int>(),
                              g.at("horizon_ms").get<std::int64_t>(),
                              g.value("seed", std::uint64_t{1}),
                              broadcast("sf", 7), broadcast("ch", 0));
  }
  throw ValidationError("schedule section needs file, periodic or aperiodic");
}

}  // namespace detail

inline Scenario scenario_from_json(const std::string& text,
                                   const std::filesystem::path& base_dir = ".") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  Scenario sc;
  try {
    sc.name = j.value("name", sc.name);
    sc.horizon_ms = j.at("horizon_ms").get<std::int64_t>();
    if (j.contains("seeds"))
      sc.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    sc.bus_overhead_ms = j.value("bus_overhead_ms", sc.bus_overhead_ms);
    if (j.contains("payload") && j.at("payload").contains("fixed_len") &&
        !j.at("payload").at("fixed_len").is_null())
      sc.payload.fixed_len = j.at("payload").at("fixed_len").get<int>();
    if (j.contains("deadline")) {
      const auto& d = j.at("deadline");
      if (d.is_string() && d.get<std::string>() == "implicit")
        sc.deadline.kind = DeadlinePolicy::Kind::Implicit;
      else if (d.is_number()) {
        sc.deadline.kind = DeadlinePolicy::Kind::Fixed;
        sc.deadline.fixed_ms = d.get<std::int64_t>();
      } else if (!d.is_string() || d.get<std::string>() != "none")
        throw ValidationError("deadline must be \"none\", \"implicit\" or ms");
    }
    const auto& mac = j.at("mac");
    const std::string kind = mac.at("type").get<std::string>();
    if (kind == "tdma") {
      sc.mac = MacKind::Tdma;
    } else if (kind == "csma") {
      sc.mac = MacKind::Csma;
      sc.csma = detail::csma_from_json(mac);
    } else {
      throw ValidationError("mac type must be tdma or csma");
    }
    if (j.contains("energy")) {
      const auto& e = j.at("energy");
      sc.energy.supply_voltage_v =
          e.value("supply_voltage_v", sc.energy.supply_voltage_v);
      sc.energy.tx_current_a = e.value("tx_current_a", sc.energy.tx_current_a);
      sc.energy.backoff_energy_mj =
          e.value("backoff_energy_mj", sc.energy.backoff_energy_mj);
    }

    for (const double mhz :
         j.at("channel_table_mhz").get<std::vector<double>>())
      sc.topology.channel_table.frequencies_hz.push_back(
          static_cast<long long>(std::llround(mhz * 1e6)));
    if (j.contains("gateway_position_m")) {
      const auto& g = j.at("gateway_position_m");
      sc.topology.gateway_position_m = {g.at(0).get<double>(),
                                        g.at(1).get<double>()};
    }
    if (j.contains("link")) {
      const auto& l = j.at("link");
      LinkModel& lm = sc.topology.link_model;
      lm.path_loss_exponent = l.value("path_loss_exponent", lm.path_loss_exponent);
      lm.reference_loss_db = l.value("reference_loss_db", lm.reference_loss_db);
      lm.reference_distance_m =
          l.value("reference_distance_m", lm.reference_distance_m);
      lm.shadowing_sigma_db = l.value("shadowing_sigma_db", lm.shadowing_sigma_db);
      lm.noise_floor_dbm = l.value("noise_floor_dbm", lm.noise_floor_dbm);
      if (l.contains("snr_floor_db_by_sf")) {
        lm.snr_floor_db_by_sf.clear();
        for (const auto& [key, val] : l.at("snr_floor_db_by_sf").items())
          lm.snr_floor_db_by_sf[std::stoi(key)] = val.get<double>();
      }
      if (l.contains("capture_threshold_db") &&
          !l.at("capture_threshold_db").is_null())
        lm.capture_threshold_db = l.at("capture_threshold_db").get<double>();
    }
    for (const auto& jm : j.at("masters")) {
      MasterSpec m;
      m.master_id = jm.at("id").get<int>();
      if (jm.contains("position_m"))
        m.position_m = {jm.at("position_m").at(0).get<double>(),
                        jm.at("position_m").at(1).get<double>()};
      if (jm.contains("clock")) {
        const auto& c = jm.at("clock");
        m.clock.drift_ppm = c.value("drift_ppm", m.clock.drift_ppm);
        m.clock.initial_offset_ms =
            c.value("initial_offset_ms", m.clock.initial_offset_ms);
        m.clock.sync_period_s = c.value("sync_period_s", m.clock.sync_period_s);
        m.clock.sync_error_bound_ms =
            c.value("sync_error_bound_ms", m.clock.sync_error_bound_ms);
      }
      if (jm.contains("budget")) {
        const auto& b = jm.at("budget");
        m.budget.supply_current_a =
            b.value("supply_current_a", m.budget.supply_current_a);
        m.budget.board_active_current_a =
            b.value("board_active_current_a", m.budget.board_active_current_a);
        m.budget.radio_tx_current_a =
            b.value("radio_tx_current_a", m.budget.radio_tx_current_a);
        m.budget.radio_idle_current_a =
            b.value("radio_idle_current_a", m.budget.radio_idle_current_a);
        m.budget.gpio_pins_total =
            b.value("gpio_pins_total", m.budget.gpio_pins_total);
        m.budget.gpio_pins_per_radio =
            b.value("gpio_pins_per_radio", m.budget.gpio_pins_per_radio);
        m.budget.bytes_per_event =
            b.value("bytes_per_event", m.budget.bytes_per_event);
      }
      for (const auto& jr : jm.at("radios"))
        m.radios.push_back(
            {jr.at("node").get<int>(), detail::radio_from_json(jr)});
      sc.topology.masters.push_back(std::move(m));
    }
    sc.schedule = detail::schedule_from_config(j.at("schedule"), base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  sc.validate();
  sc.digest = scenario_digest(sc);
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_file(path), path.parent_path());
}

}  // namespace lorasim
