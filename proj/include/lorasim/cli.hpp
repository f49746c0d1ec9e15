#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lorasim/analysis.hpp"
#include "lorasim/config.hpp"
#include "lorasim/engine.hpp"

namespace lorasim::cli {

// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// All outputs land atomically: write a sibling temp file, then rename.
inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

// --- trace JSON-lines ----------------------------------------------------
// One run header, one line per attempt, one per reception, one per node
// energy counter. Field order is fixed for golden-file comparisons.

inline std::string trace_to_jsonl(const RunTrace& t) {
  using J = nlohmann::ordered_json;
  std::string out;
  J head{{"type", "run"},
         {"seed", t.seed},
         {"digest", t.scenario_digest},
         {"mac", to_string(t.mac)},
         {"horizon_ms", t.horizon_ms},
         {"bus_overhead_ms", t.bus_overhead_ms},
         {"supply_voltage_v", t.energy_params.supply_voltage_v},
         {"tx_current_a", t.energy_params.tx_current_a},
         {"backoff_energy_mj", t.energy_params.backoff_energy_mj},
         {"max_clock_error_ms", t.max_clock_error_ms}};
  out += head.dump() + "\n";
  for (const AttemptRecord& a : t.attempts) {
    J ja{{"type", "attempt"},
         {"node", a.node_id},
         {"seq", a.seq},
         {"release_ms", a.scheduled_release_ms},
         {"intended_ms", a.intended_global_us / 1000.0},
         {"start_ms", a.air_start_us ? J(*a.air_start_us / 1000.0) : J(nullptr)},
         {"arrival_ms", a.arrival_us ? J(*a.arrival_us / 1000.0) : J(nullptr)},
         {"deadline_ms", a.deadline_us ? J(*a.deadline_us / 1000.0) : J(nullptr)},
         {"toa_ms", a.toa_us / 1000.0},
         {"sf", a.spreading_factor},
         {"ch", a.channel_index},
         {"size", a.payload.size()},
         {"data", base64_encode(a.payload)},
         {"backoffs", a.backoffs},
         {"hops", a.hops},
         {"rssi_dbm", a.air_start_us ? J(a.rssi_dbm) : J(nullptr)},
         {"snr_db", a.air_start_us ? J(a.snr_db) : J(nullptr)},
         {"outcome", a.outcome ? to_string(*a.outcome) : "?"}};
    out += ja.dump() + "\n";
  }
  for (const GatewayReception& rx : t.receptions) {
    J jr{{"type", "rx"},
         {"node", rx.node_id},
         {"tmst", rx.tmst},
         {"chan", rx.channel_index},
         {"rfch", rx.rf_chain},
         {"freq_hz", rx.freq_hz},
         {"stat", rx.stat},
         {"sf", rx.spreading_factor},
         {"bw_hz", rx.bandwidth_hz},
         {"cr", rx.coding_rate},
         {"lsnr", rx.lsnr_db},
         {"rssi", rx.rssi_dbm},
         {"size", rx.payload.size()},
         {"data", base64_encode(rx.payload)},
         {"arrival_ms", rx.arrival_us / 1000.0}};
    out += jr.dump() + "\n";
  }
  for (const NodeEnergy& e : t.energy) {
    J je{{"type", "energy"},
         {"node", e.node_id},
         {"tx_ms", e.tx_time_ms},
         {"backoffs", e.backoffs},
         {"hops", e.hops}};
    out += je.dump() + "\n";
  }
  return out;
}

inline RunTrace trace_from_jsonl(const std::string& text) {
  RunTrace t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "run") {
        t.seed = j.at("seed").get<std::uint64_t>();
        t.scenario_digest = j.at("digest").get<std::string>();
        t.mac = j.at("mac").get<std::string>() == "csma" ? MacKind::Csma
                                                         : MacKind::Tdma;
        t.horizon_ms = j.at("horizon_ms").get<std::int64_t>();
        t.bus_overhead_ms = j.at("bus_overhead_ms").get<double>();
        t.energy_params.supply_voltage_v = j.at("supply_voltage_v").get<double>();
        t.energy_params.tx_current_a = j.at("tx_current_a").get<double>();
        t.energy_params.backoff_energy_mj =
            j.at("backoff_energy_mj").get<double>();
        t.max_clock_error_ms = j.at("max_clock_error_ms").get<double>();
        have_header = true;
      } else if (type == "attempt") {
        AttemptRecord a;
        a.node_id = j.at("node").get<int>();
        a.seq = j.at("seq").get<std::int64_t>();
        a.scheduled_release_ms = j.at("release_ms").get<std::int64_t>();
        a.intended_global_us =
            static_cast<std::int64_t>(std::llround(j.at("intended_ms").get<double>() * 1000.0));
        if (!j.at("start_ms").is_null())
          a.air_start_us = static_cast<std::int64_t>(
              std::llround(j.at("start_ms").get<double>() * 1000.0));
        if (!j.at("arrival_ms").is_null())
          a.arrival_us = static_cast<std::int64_t>(
              std::llround(j.at("arrival_ms").get<double>() * 1000.0));
        if (!j.at("deadline_ms").is_null())
          a.deadline_us = static_cast<std::int64_t>(
              std::llround(j.at("deadline_ms").get<double>() * 1000.0));
        a.toa_us = static_cast<std::int64_t>(
            std::llround(j.at("toa_ms").get<double>() * 1000.0));
        a.spreading_factor = j.at("sf").get<int>();
        a.channel_index = j.at("ch").get<int>();
        a.payload = base64_decode(j.at("data").get<std::string>());
        a.backoffs = j.at("backoffs").get<int>();
        a.hops = j.at("hops").get<int>();
        if (!j.at("rssi_dbm").is_null()) a.rssi_dbm = j.at("rssi_dbm").get<double>();
        if (!j.at("snr_db").is_null()) a.snr_db = j.at("snr_db").get<double>();
        a.outcome = outcome_from_string(j.at("outcome").get<std::string>());
        t.attempts.push_back(std::move(a));
      } else if (type == "rx") {
        GatewayReception rx;
        rx.node_id = j.at("node").get<int>();
        rx.tmst = j.at("tmst").get<std::uint32_t>();
        rx.channel_index = j.at("chan").get<int>();
        rx.rf_chain = j.at("rfch").get<int>();
        rx.freq_hz = j.at("freq_hz").get<long long>();
        rx.stat = j.at("stat").get<int>();
        rx.spreading_factor = j.at("sf").get<int>();
        rx.bandwidth_hz = j.at("bw_hz").get<int>();
        rx.coding_rate = j.at("cr").get<int>();
        rx.lsnr_db = j.at("lsnr").get<double>();
        rx.rssi_dbm = j.at("rssi").get<int>();
        rx.payload = base64_decode(j.at("data").get<std::string>());
        rx.arrival_us = static_cast<std::int64_t>(
            std::llround(j.at("arrival_ms").get<double>() * 1000.0));
        t.receptions.push_back(std::move(rx));
      } else if (type == "energy") {
        t.energy.push_back({j.at("node").get<int>(), j.at("tx_ms").get<double>(),
                            j.at("backoffs").get<int>(), j.at("hops").get<int>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("missing or bad field: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_header) throw ParseError("trace has no run header line");
  return t;
}

// --- CSV and plot data ----------------------------------------------------

inline std::string metrics_csv_header() {
  return "seed,digest,mac,sent,received,collided,lost,deadline_missed,"
         "undeliverable,plr,prr,prr_with_deadlines,latency_mean_ms,"
         "latency_max_ms,release_err_min_ms,release_err_max_ms,"
         "release_err_mean_ms,release_err_stdev_ms\n";
}

inline std::string metrics_csv_row(const RunTrace& t, const MetricsReport& m) {
  std::ostringstream row;
  row << t.seed << ',' << t.scenario_digest << ',' << to_string(t.mac) << ','
      << m.sent << ',' << m.received << ',' << m.collided << ',' << m.lost
      << ',' << m.deadline_missed << ',' << m.undeliverable << ','
      << fmt_double(m.plr) << ',' << fmt_double(m.prr) << ','
      << fmt_double(m.prr_with_deadlines) << ',' << fmt_double(m.latency_mean_ms)
      << ',' << fmt_double(m.latency_max_ms) << ','
      << fmt_double(m.release_error_ms.min) << ','
      << fmt_double(m.release_error_ms.max) << ','
      << fmt_double(m.release_error_ms.mean) << ','
      << fmt_double(m.release_error_ms.stdev) << '\n';
  return row.str();
}

inline std::string energy_csv_header() {
  return "seed,digest,mac,supply_voltage_v,tx_current_a,airborne_attempts,"
         "backoffs,tx_energy_mj,csma_overhead_mj,total_mj\n";
}

inline std::string energy_csv_row(const RunTrace& t, const EnergyReport& e) {
  std::ostringstream row;
  row << t.seed << ',' << t.scenario_digest << ',' << to_string(t.mac) << ','
      << fmt_double(e.supply_voltage_v) << ',' << fmt_double(t.energy_params.tx_current_a)
      << ',' << e.airborne_attempts << ',' << e.backoffs << ','
      << fmt_double(e.tx_energy_mj) << ',' << fmt_double(e.csma_overhead_mj)
      << ',' << fmt_double(e.total_mj) << '\n';
  return row.str();
}

// sf/ch vs mean rssi/snr, gnuplot-style columns
inline std::string plot_by_key(const std::map<int, ChannelStats>& by,
                               const char* key_name) {
  std::ostringstream out;
  out << "# " << key_name << " mean_rssi_dbm mean_snr_db count\n";
  for (const auto& [k, st] : by)
    out << k << ' ' << fmt_double(st.mean_rssi_dbm) << ' '
        << fmt_double(st.mean_snr_db) << ' ' << st.count << '\n';
  return out.str();
}

inline std::string plot_jitter_histogram(const RunTrace& t) {
  std::map<std::int64_t, int> bins;  // 1 ms bins of release error
  for (const AttemptRecord& a : t.attempts)
    if (a.air_start_us)
      ++bins[static_cast<std::int64_t>(std::floor(a.release_error_ms()))];
  std::ostringstream out;
  out << "# release_error_bin_ms count\n";
  for (const auto& [bin, n] : bins) out << bin << ' ' << n << '\n';
  return out.str();
}

inline std::string pretty_report(const RunTrace& t, const MetricsReport& m,
                                 const EnergyReport& e) {
  std::ostringstream out;
  out << "run seed=" << t.seed << " digest=" << t.scenario_digest
      << " mac=" << to_string(t.mac) << '\n';
  if (t.mac == MacKind::Csma)
    out << "  note: radios sense and hop independently; the shared bus still "
           "serializes attempts within one master\n";
  out << "  sent " << m.sent << ", received " << m.received << ", collided "
      << m.collided << ", lost " << m.lost << ", deadline-missed "
      << m.deadline_missed << ", undeliverable " << m.undeliverable << '\n'
      << "  plr " << fmt_double(m.plr) << "  prr " << fmt_double(m.prr)
      << "  prr(with deadlines) " << fmt_double(m.prr_with_deadlines) << '\n'
      << "  latency mean " << fmt_double(m.latency_mean_ms) << " ms, max "
      << fmt_double(m.latency_max_ms) << " ms\n"
      << "  release error [" << fmt_double(m.release_error_ms.min) << ", "
      << fmt_double(m.release_error_ms.max) << "] mean "
      << fmt_double(m.release_error_ms.mean) << " stdev "
      << fmt_double(m.release_error_ms.stdev) << " ms\n"
      << "  max clock error " << fmt_double(t.max_clock_error_ms) << " ms\n"
      << "  energy: tx " << fmt_double(e.tx_energy_mj) << " mJ + overhead "
      << fmt_double(e.csma_overhead_mj) << " mJ = " << fmt_double(e.total_mj)
      << " mJ @ " << fmt_double(e.supply_voltage_v) << " V\n";
  for (const auto& [sf, st] : m.by_sf)
    out << "  sf" << sf << ": mean rssi " << fmt_double(st.mean_rssi_dbm)
        << " dBm, mean snr " << fmt_double(st.mean_snr_db) << " dB ("
        << st.count << " rx)\n";
  for (const auto& [ch, st] : m.by_ch)
    out << "  ch" << ch << ": mean rssi " << fmt_double(st.mean_rssi_dbm)
        << " dBm, mean snr " << fmt_double(st.mean_snr_db) << " dB ("
        << st.count << " rx)\n";
  return out.str();
}

// --- commands --------------------------------------------------------------

struct SimulateOutputs {
  std::vector<std::filesystem::path> files;
};

inline SimulateOutputs run_simulate(const Scenario& sc,
                                    const std::filesystem::path& out_dir,
                                    std::ostream& log) {
  SimulateOutputs outputs;
  std::string metrics_csv = metrics_csv_header();
  std::string energy_csv = energy_csv_header();
  std::string report;
  // run everything first; nothing is written if any seed fails
  struct PerSeed {
    std::uint64_t seed;
    std::string trace, rxpk;
  };
  std::vector<PerSeed> done;
  MetricsReport last_metrics;
  for (const std::uint64_t seed : sc.seeds) {
    const RunTrace t = run(sc, seed);
    const MetricsReport m = compute_metrics(t);
    const EnergyReport e =
        compute_energy(t, sc.energy.supply_voltage_v, sc.energy.tx_current_a,
                       sc.energy.backoff_energy_mj);
    metrics_csv += metrics_csv_row(t, m);
    energy_csv += energy_csv_row(t, e);
    report += pretty_report(t, m, e);
    done.push_back(
        {seed, trace_to_jsonl(t), emit_rxpk(t.receptions, sc.topology.channel_table)});
    last_metrics = m;
  }
  for (const PerSeed& p : done) {
    const auto trace_path =
        out_dir / (sc.name + "_trace_s" + std::to_string(p.seed) + ".jsonl");
    const auto rxpk_path =
        out_dir / (sc.name + "_rxpk_s" + std::to_string(p.seed) + ".log");
    write_atomic(trace_path, p.trace);
    write_atomic(rxpk_path, p.rxpk);
    outputs.files.push_back(trace_path);
    outputs.files.push_back(rxpk_path);
  }
  const auto metrics_path = out_dir / (sc.name + "_metrics.csv");
  const auto energy_path = out_dir / (sc.name + "_energy.csv");
  const auto report_path = out_dir / (sc.name + "_report.txt");
  const auto sf_path = out_dir / (sc.name + "_snr_by_sf.dat");
  const auto ch_path = out_dir / (sc.name + "_snr_by_ch.dat");
  write_atomic(metrics_path, metrics_csv);
  write_atomic(energy_path, energy_csv);
  write_atomic(report_path, report);
  write_atomic(sf_path, plot_by_key(last_metrics.by_sf, "sf"));
  write_atomic(ch_path, plot_by_key(last_metrics.by_ch, "ch"));
  outputs.files.insert(outputs.files.end(),
                       {metrics_path, energy_path, report_path, sf_path, ch_path});
  for (const auto& f : outputs.files) log << "wrote " << f.string() << '\n';
  return outputs;
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"deterministic multi-radio LoRa testbed simulator"};
  app.require_subcommand(1);

  // gen-schedule
  auto* gen = app.add_subcommand("gen-schedule", "generate a schedule file");
  int g_nodes = 1;
  std::int64_t g_period = 1000, g_horizon = 10000;
  std::string g_sf = "7", g_ch = "0", g_phases, g_out = "schedule.json";
  bool g_aperiodic = false;
  int g_events = 0;
  std::uint64_t g_seed = 1;
  gen->add_option("--nodes", g_nodes, "radio count");
  gen->add_option("--period-ms", g_period, "period (periodic schedules)");
  gen->add_option("--horizon-ms", g_horizon, "last release instant");
  gen->add_option("--sf", g_sf, "spreading factor, single value or per-node list");
  gen->add_option("--ch", g_ch, "channel index, single value or per-node list");
  gen->add_option("--phases-ms", g_phases,
                  "per-node phase offsets; default staggers slots evenly");
  gen->add_flag("--aperiodic", g_aperiodic, "uniform releases instead of periodic");
  gen->add_option("--events", g_events, "total event count (aperiodic)");
  gen->add_option("--seed", g_seed, "seed for aperiodic release draws");
  gen->add_option("-o,--out", g_out, "output path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scenario config");
  std::string s_config;
  std::string s_outdir;
  bool s_strict = false;
  sim->add_option("config", s_config, "scenario config JSON")->required();
  sim->add_option("--out-dir", s_outdir, "output directory (default: config's output.dir or .)");
  sim->add_flag("--strict", s_strict,
                "treat schedule bus/air conflicts as validation failures");

  // min-period
  auto* mp = app.add_subcommand("min-period",
                                "analytic and empirical minimum transmission period");
  int mp_sf = 7, mp_radios = 1, mp_payload = 21, mp_bw = 125000, mp_cr = 3,
      mp_events = 200;
  double mp_overhead = 19.1;
  std::int64_t mp_lo = 0, mp_hi = 0;
  std::uint64_t mp_seed = 1;
  mp->add_option("--sf", mp_sf, "spreading factor");
  mp->add_option("--radios", mp_radios, "radios on one bus");
  mp->add_option("--payload", mp_payload, "payload bytes");
  mp->add_option("--overhead-ms", mp_overhead, "bus command overhead per frame");
  mp->add_option("--bw", mp_bw, "bandwidth Hz");
  mp->add_option("--cr", mp_cr, "coding rate 1..4");
  mp->add_option("--events", mp_events, "events per node per probe");
  mp->add_option("--lo", mp_lo, "search bracket low (ms)");
  mp->add_option("--hi", mp_hi, "search bracket high (ms)");
  mp->add_option("--seed", mp_seed, "probe seed");

  // analyze
  auto* an = app.add_subcommand("analyze", "metrics and plot data from traces or rxpk logs");
  std::vector<std::string> a_inputs;
  bool a_rxpk = false;
  std::string a_deadline;
  std::string a_outdir = ".";
  std::string a_prefix = "analysis";
  an->add_option("inputs", a_inputs, "trace .jsonl files (or rxpk logs with --rxpk)")
      ->required();
  an->add_flag("--rxpk", a_rxpk, "inputs are gateway rxpk logs");
  an->add_option("--with-deadlines", a_deadline,
                 "re-evaluate outcomes under a deadline: ms value");
  an->add_option("--out-dir", a_outdir, "output directory");
  an->add_option("--prefix", a_prefix, "output file prefix");

  // capacity
  auto* cap = app.add_subcommand("capacity", "memory, power and GPIO planners");
  int c_bytes = 13, c_devices = 10, c_gpio_total = 28, c_gpio_per = 4, c_tx = 1;
  double c_events_s = 1.0, c_days = 1.0, c_supply = 2.5, c_board = 0.5,
         c_txa = 0.7;
  bool c_shared_spi = false;
  cap->add_option("--bytes-per-event", c_bytes, "schedule entry size");
  cap->add_option("--events-per-sec", c_events_s, "events per second per device");
  cap->add_option("--devices", c_devices, "device count");
  cap->add_option("--days", c_days, "duration in days");
  cap->add_option("--supply-a", c_supply, "supply current");
  cap->add_option("--board-a", c_board, "bare-board active current");
  cap->add_option("--tx-a", c_txa, "radio transmit current");
  cap->add_option("--concurrent-tx", c_tx, "requested concurrent transmitters");
  cap->add_option("--gpio-total", c_gpio_total, "GPIO pin count");
  cap->add_option("--gpio-per-radio", c_gpio_per, "pins consumed per radio");
  cap->add_flag("--gpio-shared-spi", c_shared_spi,
                "reserve 3 pins for the shared MOSI/MISO/SCLK lines");

  // compare-mac
  auto* cm = app.add_subcommand("compare-mac",
                                "run one scenario under TDMA and CSMA, compare energy");
  std::string cm_config, cm_outdir;
  cm->add_option("config", cm_config, "scenario config JSON")->required();
  cm->add_option("--out-dir", cm_outdir, "output directory");

  try {
    std::vector<const char*> argv{"lorasim"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen) {
      if (g_nodes < 1) throw std::invalid_argument("--nodes must be >= 1");
      auto broadcast = [&](const std::string& text) {
        std::vector<int> v = parse_int_list(text);
        if (static_cast<int>(v.size()) == 1) v.assign(g_nodes, v[0]);
        if (static_cast<int>(v.size()) != g_nodes)
          throw std::invalid_argument("list length must match --nodes");
        return v;
      };
      const std::vector<int> sfs = broadcast(g_sf);
      const std::vector<int> chs = broadcast(g_ch);
      Schedule s;
      if (g_aperiodic) {
        s = generate_aperiodic(g_nodes, g_events, g_horizon, g_seed, sfs, chs);
      } else {
        std::vector<std::int64_t> phases;
        if (g_phases.empty()) {
          for (int i = 0; i < g_nodes; ++i)
            phases.push_back(i * g_period / g_nodes);
        } else {
          for (int v : parse_int_list(g_phases)) phases.push_back(v);
          if (static_cast<int>(phases.size()) != g_nodes)
            throw std::invalid_argument("--phases-ms length must match --nodes");
        }
        s = generate_periodic(g_nodes, g_period, phases, sfs, chs, g_horizon);
      }
      write_atomic(g_out, schedule_to_json(s));
      out << "wrote " << g_out << " (" << s.events.size() << " events)\n";
      return kExitOk;
    }

    if (*sim) {
      const Scenario sc = load_scenario(s_config);
      if (s_strict) {
        const auto conflicts = validate_schedule(
            sc.schedule, sc.topology.nodes_by_bus(), sc.topology.config_by_node(),
            sc.bus_overhead_ms,
            sc.payload.fixed_len ? *sc.payload.fixed_len : 21);
        if (!conflicts.empty())
          throw ValidationError("schedule has " +
                                std::to_string(conflicts.size()) +
                                " bus/air conflicts (strict mode)");
      }
      const std::filesystem::path dir =
          !s_outdir.empty()
              ? std::filesystem::path(s_outdir)
              : std::filesystem::path(s_config).parent_path() / "out";
      run_simulate(sc, dir, out);
      return kExitOk;
    }

    if (*mp) {
      if (mp_radios < 1) throw std::invalid_argument("--radios must be >= 1");
      RadioConfig cfg;
      cfg.spreading_factor = mp_sf;
      cfg.bandwidth_hz = mp_bw;
      cfg.coding_rate = mp_cr;
      const double analytic =
          min_period_ms(mp_sf, mp_payload, mp_radios, mp_overhead, cfg);
      Scenario tmpl;
      tmpl.name = "min-period";
      tmpl.topology.channel_table.frequencies_hz = {868'100'000};
      MasterSpec m;
      m.master_id = 0;
      m.clock = ClockModel{0.0, 0.0, 64.0, 0.0};
      m.radios.push_back({0, cfg});
      tmpl.topology.masters.push_back(m);
      tmpl.bus_overhead_ms = mp_overhead;
      tmpl.payload.fixed_len = mp_payload;
      tmpl.seeds = {mp_seed};
      if (mp_lo == 0) mp_lo = std::max<std::int64_t>(1, static_cast<std::int64_t>(analytic / 2));
      if (mp_hi == 0) mp_hi = static_cast<std::int64_t>(analytic * 2) + 2;
      const std::int64_t empirical = find_min_period_empirical(
          tmpl, mp_sf, mp_radios, mp_lo, mp_hi, mp_events);
      const double diff = std::abs(static_cast<double>(empirical) - analytic);
      out << "sf " << mp_sf << " radios " << mp_radios << " payload "
          << mp_payload << " B overhead " << fmt_double(mp_overhead) << " ms\n"
          << "  analytic  " << fmt_double(analytic) << " ms\n"
          << "  empirical " << empirical << " ms (binary search, 1 ms steps)\n";
      if (diff > 1.0)
        out << "  DISAGREEMENT beyond search resolution: " << fmt_double(diff)
            << " ms\n";
      else
        out << "  agreement within search resolution\n";
      return kExitOk;
    }

    if (*an) {
      std::string metrics_csv = metrics_csv_header();
      std::string prr_dat = "# index prr prr_with_deadlines digest\n";
      int idx = 0;
      std::map<int, ChannelStats> by_sf, by_ch;
      std::string reports;
      for (const std::string& input : a_inputs) {
        if (a_rxpk) {
          const auto receptions = parse_rxpk(read_file(input));
          out << input << ": " << receptions.size() << " receptions\n";
          std::map<long long, int> by_freq;
          for (const auto& rx : receptions) ++by_freq[rx.freq_hz];
          for (const auto& [hz, n] : by_freq)
            out << "  " << fmt_double(static_cast<double>(hz) / 1e6) << " MHz: "
                << n << '\n';
          continue;
        }
        RunTrace t = trace_from_jsonl(read_file(input));
        if (!a_deadline.empty()) t = with_deadline(std::move(t), std::stoll(a_deadline));
        const MetricsReport m = compute_metrics(t);
        const EnergyReport e = compute_energy(
            t, t.energy_params.supply_voltage_v, t.energy_params.tx_current_a,
            t.energy_params.backoff_energy_mj);
        metrics_csv += metrics_csv_row(t, m);
        reports += pretty_report(t, m, e);
        prr_dat += std::to_string(idx) + ' ' + fmt_double(m.prr) + ' ' +
                   fmt_double(m.prr_with_deadlines) + ' ' + t.scenario_digest +
                   '\n';
        by_sf = m.by_sf;
        by_ch = m.by_ch;
        const auto jit_path = std::filesystem::path(a_outdir) /
                              (a_prefix + "_jitter_hist_" + std::to_string(idx) +
                               ".dat");
        write_atomic(jit_path, plot_jitter_histogram(t));
        ++idx;
      }
      if (!a_rxpk) {
        const std::filesystem::path dir = a_outdir;
        write_atomic(dir / (a_prefix + "_metrics.csv"), metrics_csv);
        write_atomic(dir / (a_prefix + "_report.txt"), reports);
        write_atomic(dir / (a_prefix + "_snr_by_sf.dat"), plot_by_key(by_sf, "sf"));
        write_atomic(dir / (a_prefix + "_snr_by_ch.dat"), plot_by_key(by_ch, "ch"));
        write_atomic(dir / (a_prefix + "_prr.dat"), prr_dat);
        out << "wrote " << (dir / (a_prefix + "_metrics.csv")).string() << '\n';
      }
      return kExitOk;
    }

    if (*cap) {
      const long long bytes = memory_footprint_bytes(
          c_bytes, c_events_s, c_devices, c_days * 86400.0);
      CapacityBudget b;
      b.supply_current_a = c_supply;
      b.board_active_current_a = c_board;
      b.radio_tx_current_a = c_txa;
      const PowerReport p = power_budget(b, c_tx);
      const int gpio_total = c_shared_spi ? c_gpio_total - 3 : c_gpio_total;
      const int radios = max_radios_per_master(gpio_total, c_gpio_per);
      out << "memory: " << c_bytes << " B/event x " << fmt_double(c_events_s)
          << " ev/s x " << c_devices << " devices x " << fmt_double(c_days)
          << " days = " << bytes << " bytes\n"
          << "power: supply " << fmt_double(c_supply) << " A - board "
          << fmt_double(c_board) << " A -> headroom " << fmt_double(p.headroom_a)
          << " A; " << c_tx << " concurrent tx "
          << (p.feasible ? "feasible" : "INFEASIBLE") << "; max "
          << p.max_concurrent_tx << " at " << fmt_double(c_txa) << " A each\n"
          << "gpio: " << gpio_total << " pins / " << c_gpio_per
          << " per radio -> " << radios << " radios\n";
      return kExitOk;
    }

    if (*cm) {
      Scenario sc = load_scenario(cm_config);
      const std::filesystem::path dir =
          !cm_outdir.empty()
              ? std::filesystem::path(cm_outdir)
              : std::filesystem::path(cm_config).parent_path() / "out";
      std::string csv =
          "mac,seed,attempts,airborne,received,plr,tx_energy_mj,"
          "overhead_mj,total_mj\n";
      for (MacKind mac : {MacKind::Tdma, MacKind::Csma}) {
        Scenario variant = sc;
        variant.mac = mac;
        if (mac == MacKind::Csma && variant.csma.hop_order.empty())
          for (int ch = 0; ch < variant.topology.channel_table.size(); ++ch)
            variant.csma.hop_order.push_back(ch);
        variant.digest = scenario_digest(variant);
        for (const std::uint64_t seed : variant.seeds) {
          const RunTrace t = run(variant, seed);
          const MetricsReport m = compute_metrics(t);
          const EnergyReport e = compute_energy(
              t, variant.energy.supply_voltage_v, variant.energy.tx_current_a,
              variant.energy.backoff_energy_mj);
          std::ostringstream row;
          row << to_string(mac) << ',' << seed << ',' << m.sent << ','
              << e.airborne_attempts << ',' << m.received << ','
              << fmt_double(m.plr) << ',' << fmt_double(e.tx_energy_mj) << ','
              << fmt_double(e.csma_overhead_mj) << ',' << fmt_double(e.total_mj)
              << '\n';
          csv += row.str();
        }
      }
      const auto path = dir / (sc.name + "_mac_comparison.csv");
      write_atomic(path, csv);
      out << "wrote " << path.string() << '\n';
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lorasim::cli
