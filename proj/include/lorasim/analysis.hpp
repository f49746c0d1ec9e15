#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lorasim/engine.hpp"

namespace lorasim {

struct Stats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stdev = 0.0;  // population
};

inline Stats summarize(std::span<const double> xs) {
  Stats s;
  if (xs.empty()) return s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stdev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

struct ChannelStats {
  double mean_rssi_dbm = 0.0;
  double mean_snr_db = 0.0;
  int count = 0;
};

struct MetricsReport {
  int sent = 0;
  int received = 0;  // on time
  int collided = 0;
  int lost = 0;
  int deadline_missed = 0;
  int undeliverable = 0;
  double plr = 0.0;
  double prr = 1.0;  // deadline-blind: late frames still count as delivered
  double prr_with_deadlines = 1.0;
  double latency_mean_ms = 0.0;
  double latency_max_ms = 0.0;
  Stats release_error_ms;
  std::map<int, ChannelStats> by_sf;  // over gateway receptions
  std::map<int, ChannelStats> by_ch;
  bool csma = false;
};

// Empty traces report zero loss / PRR 1 so ratios stay total.
inline MetricsReport compute_metrics(const RunTrace& trace) {
  MetricsReport r;
  r.csma = trace.mac == MacKind::Csma;
  r.sent = static_cast<int>(trace.attempts.size());
  r.received = trace.count(Outcome::Received);
  r.collided = trace.count(Outcome::Collided);
  r.lost = trace.count(Outcome::Lost);
  r.deadline_missed = trace.count(Outcome::DeadlineMissed);
  r.undeliverable = trace.count(Outcome::Undeliverable);
  if (r.sent > 0) {
    r.prr = static_cast<double>(r.received + r.deadline_missed) / r.sent;
    r.prr_with_deadlines = static_cast<double>(r.received) / r.sent;
  }
  r.plr = 1.0 - r.prr;

  std::vector<double> latencies, release_errors;
  for (const AttemptRecord& a : trace.attempts) {
    if (a.air_start_us) release_errors.push_back(a.release_error_ms());
    if (a.arrival_us &&
        (a.outcome == Outcome::Received || a.outcome == Outcome::DeadlineMissed))
      latencies.push_back(
          static_cast<double>(*a.arrival_us - a.intended_global_us) / 1000.0);
  }
  r.release_error_ms = summarize(release_errors);
  if (!latencies.empty()) {
    const Stats ls = summarize(latencies);
    r.latency_mean_ms = ls.mean;
    r.latency_max_ms = ls.max;
  }

  std::map<int, std::pair<double, double>> sf_sum, ch_sum;
  std::map<int, int> sf_n, ch_n;
  for (const GatewayReception& rx : trace.receptions) {
    sf_sum[rx.spreading_factor].first += rx.rssi_dbm;
    sf_sum[rx.spreading_factor].second += rx.lsnr_db;
    ++sf_n[rx.spreading_factor];
    ch_sum[rx.channel_index].first += rx.rssi_dbm;
    ch_sum[rx.channel_index].second += rx.lsnr_db;
    ++ch_n[rx.channel_index];
  }
  for (const auto& [sf, sums] : sf_sum)
    r.by_sf[sf] = {sums.first / sf_n[sf], sums.second / sf_n[sf], sf_n[sf]};
  for (const auto& [ch, sums] : ch_sum)
    r.by_ch[ch] = {sums.first / ch_n[ch], sums.second / ch_n[ch], ch_n[ch]};
  return r;
}

// Re-evaluate a finished trace under a (different) relative deadline.
inline RunTrace with_deadline(RunTrace trace, std::int64_t deadline_rel_ms) {
  if (deadline_rel_ms <= 0)
    throw std::invalid_argument("deadline must be positive");
  for (AttemptRecord& a : trace.attempts) {
    a.deadline_us = a.intended_global_us + deadline_rel_ms * 1000;
    if (a.outcome == Outcome::DeadlineMissed) a.outcome = Outcome::Received;
    apply_deadline(a);
  }
  return trace;
}

struct EnergyReport {
  double supply_voltage_v = 0.0;
  double tx_energy_mj = 0.0;
  double csma_overhead_mj = 0.0;
  double total_mj = 0.0;
  int airborne_attempts = 0;
  int backoffs = 0;
};

// Transmit energy is V * I_tx * airtime per airborne attempt; CSMA adds a
// fixed charge per backoff.
inline EnergyReport compute_energy(const RunTrace& trace, double voltage_v,
                                   double i_tx_a, double backoff_energy_mj) {
  if (voltage_v <= 0 || i_tx_a <= 0)
    throw std::invalid_argument("voltage and current must be positive");
  if (backoff_energy_mj < 0)
    throw std::invalid_argument("negative backoff energy");
  EnergyReport r;
  r.supply_voltage_v = voltage_v;
  for (const AttemptRecord& a : trace.attempts) {
    if (!a.air_start_us) continue;
    ++r.airborne_attempts;
    r.tx_energy_mj +=
        voltage_v * i_tx_a * (static_cast<double>(a.toa_us) / 1000.0);
  }
  for (const AttemptRecord& a : trace.attempts) r.backoffs += a.backoffs;
  r.csma_overhead_mj = r.backoffs * backoff_energy_mj;
  r.total_mj = r.tx_energy_mj + r.csma_overhead_mj;
  return r;
}

// Smallest period with zero deadline misses, found by binary search with
// one simulator run per probe. Brackets must satisfy: lo infeasible,
// hi feasible.
inline std::int64_t find_min_period_empirical(const Scenario& base, int sf,
                                              int radios, std::int64_t lo_ms,
                                              std::int64_t hi_ms,
                                              int events_per_node = 200) {
  if (radios < 1) throw std::invalid_argument("need at least one radio");
  if (lo_ms < 1 || lo_ms >= hi_ms)
    throw std::invalid_argument("invalid search bracket");

  Scenario probe = base;
  if (base.topology.masters.empty())
    throw std::invalid_argument("scenario template has no masters");
  MasterSpec master = base.topology.masters.front();
  const RadioConfig cfg_proto = master.radios.front().second;
  master.radios.clear();
  for (int i = 0; i < radios; ++i) master.radios.push_back({i, cfg_proto});
  probe.topology.masters = {master};
  probe.mac = MacKind::Tdma;
  probe.deadline.kind = DeadlinePolicy::Kind::Implicit;

  auto feasible = [&](std::int64_t period) {
    // All radios release together each period. The common phase leaves room
    // for the first bus acquisition; a release inside [0, overhead) could
    // not hit its slot even on an idle bus.
    const std::int64_t phase = std::min<std::int64_t>(
        period - 1,
        static_cast<std::int64_t>(std::ceil(probe.bus_overhead_ms)) + 1);
    const std::vector<std::int64_t> phases(radios, phase);
    const std::vector<int> sfs(radios, sf);
    const std::vector<int> chs(radios, cfg_proto.channel_index);
    probe.schedule = generate_periodic(radios, period, phases, sfs, chs,
                                       phase + period * (events_per_node - 1));
    probe.horizon_ms = probe.schedule.horizon_ms;
    const RunTrace t = run(probe, probe.seeds.front());
    return t.count(Outcome::DeadlineMissed) == 0;
  };

  if (feasible(lo_ms))
    throw std::invalid_argument("search bracket: low bound already feasible");
  if (!feasible(hi_ms))
    throw std::invalid_argument("search bracket: high bound infeasible");
  while (hi_ms - lo_ms > 1) {
    const std::int64_t mid = lo_ms + (hi_ms - lo_ms) / 2;
    (feasible(mid) ? hi_ms : lo_ms) = mid;
  }
  return hi_ms;
}

// --- base64 ------------------------------------------------------------

namespace detail {
inline constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    std::uint32_t block = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < data.size()) block |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < data.size()) block |= data[i + 2];
    out += detail::kB64Alphabet[(block >> 18) & 0x3f];
    out += detail::kB64Alphabet[(block >> 12) & 0x3f];
    out += i + 1 < data.size() ? detail::kB64Alphabet[(block >> 6) & 0x3f] : '=';
    out += i + 2 < data.size() ? detail::kB64Alphabet[block & 0x3f] : '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0)
    throw std::invalid_argument("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        vals[k] = 0;
        ++pad;
      } else {
        vals[k] = value_of(c);
        if (vals[k] < 0 || pad > 0)
          throw std::invalid_argument("invalid base64 character");
      }
    }
    const std::uint32_t block = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                (static_cast<std::uint32_t>(vals[1]) << 12) |
                                (static_cast<std::uint32_t>(vals[2]) << 6) |
                                static_cast<std::uint32_t>(vals[3]);
    out.push_back(static_cast<std::uint8_t>((block >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((block >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(block & 0xff));
  }
  return out;
}

// --- rxpk codec ----------------------------------------------------------
// One {"rxpk":[...]} object per reception, packet-forwarder style. Field
// formats are fixed: freq with six decimals, datr "SF<sf>BW<khz>",
// codr "4/<4+cr>", lsnr with one decimal, rssi integral.

inline std::string emit_rxpk(std::span<const GatewayReception> receptions,
                             const ChannelTable& table) {
  std::string out;
  char buf[512];
  for (const GatewayReception& rx : receptions) {
    if (rx.channel_index < 0 || rx.channel_index >= table.size())
      throw std::invalid_argument("reception channel index outside table");
    const std::string data = base64_encode(rx.payload);
    std::snprintf(
        buf, sizeof(buf),
        "{\"rxpk\":[{\"tmst\":%u,\"chan\":%d,\"rfch\":%d,\"freq\":%.6f,"
        "\"stat\":%d,\"modu\":\"LORA\",\"datr\":\"SF%dBW%d\",\"codr\":\"4/"
        "%d\",\"lsnr\":%.1f,\"rssi\":%d,\"size\":%d,\"data\":\"%s\"}]}",
        rx.tmst, rx.channel_index, rx.rf_chain, table.freq_mhz(rx.channel_index),
        rx.stat, rx.spreading_factor, rx.bandwidth_hz / 1000, rx.coding_rate + 4,
        rx.lsnr_db, rx.rssi_dbm, static_cast<int>(rx.payload.size()),
        data.c_str());
    out += buf;
    out += '\n';
  }
  return out;
}

// Inverse of emit_rxpk. Unknown fields are ignored; anything before the
// first '{' on a line (UDP header remnants in captured logs) is skipped.
inline std::vector<GatewayReception> parse_rxpk(std::string_view text) {
  std::vector<GatewayReception> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::size_t brace = line.find('{');
    if (brace == std::string_view::npos) {
      if (line.find_first_not_of(" \t\r") != std::string_view::npos)
        throw ParseError(line_no, "no JSON object found");
      continue;  // blank line
    }
    line.remove_prefix(brace);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.contains("rxpk") || !j["rxpk"].is_array())
      throw ParseError(line_no, "missing rxpk array");
    for (const auto& p : j["rxpk"]) {
      GatewayReception rx;
      try {
        rx.tmst = p.at("tmst").get<std::uint32_t>();
        rx.channel_index = p.at("chan").get<int>();
        rx.rf_chain = p.value("rfch", 0);
        rx.stat = p.value("stat", 1);
        rx.freq_hz =
            static_cast<long long>(std::llround(p.at("freq").get<double>() * 1e6));
        const std::string datr = p.at("datr").get<std::string>();
        int sf = 0, bw_khz = 0;
        if (std::sscanf(datr.c_str(), "SF%dBW%d", &sf, &bw_khz) != 2)
          throw ParseError(line_no, "bad datr '" + datr + "'");
        rx.spreading_factor = sf;
        rx.bandwidth_hz = bw_khz * 1000;
        const std::string codr = p.at("codr").get<std::string>();
        int denom = 0;
        if (std::sscanf(codr.c_str(), "4/%d", &denom) != 1)
          throw ParseError(line_no, "bad codr '" + codr + "'");
        rx.coding_rate = denom - 4;
        rx.lsnr_db = p.at("lsnr").get<double>();
        rx.rssi_dbm = p.at("rssi").get<int>();
        const int size = p.at("size").get<int>();
        try {
          rx.payload = base64_decode(p.at("data").get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ParseError(line_no, e.what());
        }
        if (static_cast<int>(rx.payload.size()) != size)
          throw ParseError(line_no, "size field disagrees with payload");
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, std::string("missing or bad field: ") + e.what());
      }
      rx.arrival_us = rx.tmst;
      out.push_back(std::move(rx));
    }
  }
  return out;
}

inline bool codec_equal(const GatewayReception& a, const GatewayReception& b) {
  return a.tmst == b.tmst && a.channel_index == b.channel_index &&
         a.rf_chain == b.rf_chain && a.freq_hz == b.freq_hz &&
         a.stat == b.stat && a.spreading_factor == b.spreading_factor &&
         a.bandwidth_hz == b.bandwidth_hz && a.coding_rate == b.coding_rate &&
         a.lsnr_db == b.lsnr_db && a.rssi_dbm == b.rssi_dbm &&
         a.payload == b.payload;
}

}  // namespace lorasim
