#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorasim/errors.hpp"

namespace lorasim {

inline constexpr int kMinSf = 7;
inline constexpr int kMaxSf = 12;
inline constexpr int kMaxPayloadBytes = 255;
// Low-data-rate optimization turns on once a symbol lasts longer than this.
inline constexpr double kLdroSymbolThresholdMs = 16.0;

// Payload above the SX126x frame limit. Distinct type so callers can tell
// it apart from plain argument errors.
class PayloadTooLongError : public std::length_error {
 public:
  explicit PayloadTooLongError(int len)
      : std::length_error("payload length " + std::to_string(len) +
                          " exceeds " + std::to_string(kMaxPayloadBytes) +
                          " bytes") {}
};

// Air parameters of one radio. Spreading factor and channel index are the
// per-event knobs; the rest normally stays fixed for a run.
struct RadioConfig {
  int spreading_factor = 7;
  int bandwidth_hz = 125000;
  int coding_rate = 3;  // FEC 4/(4+coding_rate); 3 means "4/7"
  int channel_index = 0;
  double tx_power_dbm = 0.0;
  int preamble_symbols = 8;
  bool crc_enabled = true;
  bool explicit_header = true;

  void validate() const {
    if (spreading_factor < kMinSf || spreading_factor > kMaxSf)
      throw std::invalid_argument("spreading factor " +
                                  std::to_string(spreading_factor) +
                                  " outside 7..12");
    if (bandwidth_hz != 125000 && bandwidth_hz != 250000 &&
        bandwidth_hz != 500000)
      throw std::invalid_argument("bandwidth " + std::to_string(bandwidth_hz) +
                                  " Hz not one of 125/250/500 kHz");
    if (coding_rate < 1 || coding_rate > 4)
      throw std::invalid_argument("coding rate " + std::to_string(coding_rate) +
                                  " outside 1..4");
    if (channel_index < 0)
      throw std::invalid_argument("negative channel index");
    if (preamble_symbols < 1)
      throw std::invalid_argument("preamble must have at least one symbol");
  }
};

// Ordered carrier list; an event's channel index points into it.
struct ChannelTable {
  std::vector<long long> frequencies_hz;
  long long band_min_hz = 863'000'000;
  long long band_max_hz = 870'000'000;

  int size() const { return static_cast<int>(frequencies_hz.size()); }
  double freq_mhz(int index) const {
    return static_cast<double>(frequencies_hz.at(index)) / 1e6;
  }

  void validate() const {
    if (frequencies_hz.empty())
      throw ValidationError("channel table is empty");
    for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
      if (i > 0 && frequencies_hz[i] <= frequencies_hz[i - 1])
        throw ValidationError("channel table not strictly ascending at index " +
                              std::to_string(i));
      if (frequencies_hz[i] < band_min_hz || frequencies_hz[i] > band_max_hz)
        throw ValidationError("channel " + std::to_string(frequencies_hz[i]) +
                              " Hz outside configured band");
    }
  }
};

inline std::map<int, double> default_snr_floors() {
  return {{7, -7.5}, {8, -10.0}, {9, -12.5},
          {10, -15.0}, {11, -17.5}, {12, -20.0}};
}

// Deterministic log-distance channel. Shadowing draws come from the run's
// seeded generator, never from inside this model.
struct LinkModel {
  double path_loss_exponent = 2.0;
  double reference_loss_db = 40.0;
  double reference_distance_m = 1.0;
  double shadowing_sigma_db = 0.0;
  double noise_floor_dbm = -117.0;
  std::map<int, double> snr_floor_db_by_sf = default_snr_floors();
  std::optional<double> capture_threshold_db;  // unset: no capture effect

  double snr_floor(int sf) const { return snr_floor_db_by_sf.at(sf); }

  // Reported gateway SNR improves with SF by the same margin the
  // demodulation floors relax; models despreading gain.
  double despreading_gain_db(int sf) const {
    return snr_floor(kMinSf) - snr_floor(sf);
  }

  void validate() const {
    if (reference_distance_m <= 0)
      throw ValidationError("reference distance must be positive");
    if (shadowing_sigma_db < 0)
      throw ValidationError("negative shadowing sigma");
    double prev = std::numeric_limits<double>::infinity();
    for (int sf = kMinSf; sf <= kMaxSf; ++sf) {
      auto it = snr_floor_db_by_sf.find(sf);
      if (it == snr_floor_db_by_sf.end())
        throw ValidationError("snr floor table missing SF" + std::to_string(sf));
      if (it->second >= prev)
        throw ValidationError("snr floors must strictly decrease with SF");
      prev = it->second;
    }
  }
};

inline double symbol_time_ms(int sf, int bandwidth_hz) {
  return 1000.0 * static_cast<double>(1 << sf) /
         static_cast<double>(bandwidth_hz);
}

inline bool low_data_rate_optimize(int sf, int bandwidth_hz) {
  return symbol_time_ms(sf, bandwidth_hz) > kLdroSymbolThresholdMs;
}

// Frame airtime in ms:
//   T_sym = 2^SF / BW
//   n_pay = 8 + max(ceil((8 PL - 4 SF + 28 + 16 CRC - 20 IH)
//                        / (4 (SF - 2 DE))) * (CR + 4), 0)
//   ToA   = (preamble + 4.25) T_sym + n_pay T_sym
inline double time_on_air_ms(const RadioConfig& cfg, int payload_len) {
  cfg.validate();
  if (payload_len < 0) throw std::invalid_argument("negative payload length");
  if (payload_len > kMaxPayloadBytes) throw PayloadTooLongError(payload_len);

  const double t_sym = symbol_time_ms(cfg.spreading_factor, cfg.bandwidth_hz);
  const int de = low_data_rate_optimize(cfg.spreading_factor, cfg.bandwidth_hz)
                     ? 1
                     : 0;
  const int ih = cfg.explicit_header ? 0 : 1;
  const int crc = cfg.crc_enabled ? 1 : 0;
  const double numer = 8.0 * payload_len - 4.0 * cfg.spreading_factor + 28.0 +
                       16.0 * crc - 20.0 * ih;
  const double denom = 4.0 * (cfg.spreading_factor - 2 * de);
  const double n_payload =
      8.0 + std::max(std::ceil(numer / denom) * (cfg.coding_rate + 4), 0.0);
  return (cfg.preamble_symbols + 4.25) * t_sym + n_payload * t_sym;
}

// Transmit watchdog: 5 ms plus five times the expected airtime.
inline double tx_timeout_ms(double toa_ms) {
  if (toa_ms <= 0) throw std::invalid_argument("time on air must be positive");
  return 5.0 + 5.0 * toa_ms;
}

struct LinkBudget {
  double rssi_dbm = 0.0;
  double snr_db = 0.0;
};

inline LinkBudget link_budget(const LinkModel& model, double tx_power_dbm,
                              double distance_m, double shadow_draw_db) {
  if (distance_m <= 0) throw std::invalid_argument("distance must be positive");
  const double loss_db =
      model.reference_loss_db +
      10.0 * model.path_loss_exponent *
          std::log10(distance_m / model.reference_distance_m);
  const double rssi = tx_power_dbm - loss_db + shadow_draw_db;
  return {rssi, rssi - model.noise_floor_dbm};
}

// Inclusive at the floor: a frame exactly at the demodulation limit decodes.
inline bool decodable(const LinkModel& model, double snr_db, int sf) {
  if (sf < kMinSf || sf > kMaxSf)
    throw std::invalid_argument("spreading factor outside 7..12");
  return snr_db >= model.snr_floor(sf);
}

struct FrameOnAir {
  std::int64_t frame_id = 0;
  int channel_index = 0;
  int spreading_factor = 7;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  double rssi_dbm = 0.0;
};

// Two frames conflict iff same channel, same SF, and their air intervals
// overlap with positive measure. Different SFs on one channel are treated
// as orthogonal. Without a capture threshold every member of a conflict
// loses; with one, a frame survives only if it beats each of its peers by
// at least the threshold.
inline std::map<std::int64_t, bool> arbitrate_collisions(
    std::span<const FrameOnAir> frames,
    std::optional<double> capture_threshold_db) {
  std::map<std::int64_t, bool> survives;
  std::map<std::pair<int, int>, std::vector<const FrameOnAir*>> groups;
  for (const FrameOnAir& f : frames) {
    if (f.start_us >= f.end_us)
      throw std::invalid_argument("frame interval must have positive length");
    groups[{f.channel_index, f.spreading_factor}].push_back(&f);
    survives[f.frame_id] = true;
  }
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(),
              [](const FrameOnAir* a, const FrameOnAir* b) {
                return a->start_us < b->start_us;
              });
    for (std::size_t i = 0; i < group.size(); ++i) {
      bool alive = true;
      for (std::size_t j = 0; j < group.size(); ++j) {
        if (i == j) continue;
        const bool overlap = group[i]->start_us < group[j]->end_us &&
                             group[j]->start_us < group[i]->end_us;
        if (!overlap) continue;
        if (!capture_threshold_db) {
          alive = false;
          break;
        }
        if (group[i]->rssi_dbm < group[j]->rssi_dbm + *capture_threshold_db) {
          alive = false;
          break;
        }
      }
      if (!alive) survives[group[i]->frame_id] = false;
    }
  }
  return survives;
}

}  // namespace lorasim
