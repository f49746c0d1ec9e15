#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "lorasim/mac.hpp"
#include "lorasim/node.hpp"
#include "lorasim/phy.hpp"
#include "lorasim/rng.hpp"
#include "lorasim/schedule.hpp"

namespace lorasim {

enum class MacKind { Tdma, Csma };

inline const char* to_string(MacKind m) {
  return m == MacKind::Tdma ? "tdma" : "csma";
}

struct DeadlinePolicy {
  enum class Kind { None, Implicit, Fixed };
  Kind kind = Kind::None;
  std::int64_t fixed_ms = 0;  // used when kind == Fixed
};

struct PayloadSpec {
  // Default payload is the text "Packet <n> from Radio <node+1>"; a fixed
  // length pads or truncates that text.
  std::optional<int> fixed_len;
};

struct EnergyParams {
  double supply_voltage_v = 5.0;
  double tx_current_a = 0.7;
  double backoff_energy_mj = 0.356;
};

struct Scenario {
  std::string name = "scenario";
  Topology topology;
  MacKind mac = MacKind::Tdma;
  Schedule schedule;
  CsmaParams csma;
  double bus_overhead_ms = 19.1;
  std::int64_t horizon_ms = 0;
  DeadlinePolicy deadline;
  PayloadSpec payload;
  EnergyParams energy;
  std::vector<std::uint64_t> seeds{1};
  std::string digest;

  // Structural validation. Timing conflicts are not checked here: schedules
  // with contention are legal inputs and resolve through bus queueing and
  // collision arbitration.
  void validate() const {
    topology.validate();
    schedule.validate();
    if (horizon_ms < schedule.horizon_ms)
      throw ValidationError("scenario horizon shorter than schedule horizon");
    if (bus_overhead_ms < 0) throw ValidationError("negative bus overhead");
    if (seeds.empty()) throw ValidationError("no seeds configured");
    if (energy.supply_voltage_v <= 0 || energy.tx_current_a <= 0)
      throw ValidationError("energy parameters must be positive");
    const auto cfgs = topology.config_by_node();
    for (const ScheduleEvent& e : schedule.events) {
      if (!cfgs.count(e.node_id))
        throw ValidationError("schedule references unknown node " +
                              std::to_string(e.node_id));
      if (e.channel_index >= topology.channel_table.size())
        throw ValidationError("schedule channel index outside channel table");
    }
    if (mac == MacKind::Csma) {
      csma.validate();
      if (csma.hop_order.empty()) throw ValidationError("empty hop order");
      for (int ch : csma.hop_order)
        if (ch < 0 || ch >= topology.channel_table.size())
          throw ValidationError("hop order channel outside channel table");
      for (const ScheduleEvent& e : schedule.events)
        if (std::find(csma.hop_order.begin(), csma.hop_order.end(),
                      e.channel_index) == csma.hop_order.end())
          throw ValidationError("schedule channel " +
                                std::to_string(e.channel_index) +
                                " missing from hop order");
    }
    if (deadline.kind == DeadlinePolicy::Kind::Implicit && !schedule.periodic)
      throw ValidationError("implicit deadlines need a periodic schedule");
    if (deadline.kind == DeadlinePolicy::Kind::Fixed && deadline.fixed_ms <= 0)
      throw ValidationError("fixed deadline must be positive");
  }
};

// What the gateway logs for one decoded frame; exactly the rxpk-visible
// fields plus bookkeeping for analysis.
struct GatewayReception {
  std::uint32_t tmst = 0;  // microsecond counter truncated to 32 bits
  int channel_index = 0;
  int rf_chain = 0;
  long long freq_hz = 0;
  int stat = 1;
  int spreading_factor = 7;
  int bandwidth_hz = 125000;
  int coding_rate = 3;
  double lsnr_db = 0.0;  // reported in 0.1 dB steps
  int rssi_dbm = 0;
  std::vector<std::uint8_t> payload;
  std::int64_t arrival_us = 0;
  int node_id = -1;  // -1 when reconstructed from a log
};

struct NodeEnergy {
  int node_id = 0;
  double tx_time_ms = 0.0;
  int backoffs = 0;
  int hops = 0;
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::string scenario_digest;
  MacKind mac = MacKind::Tdma;
  std::int64_t horizon_ms = 0;
  double bus_overhead_ms = 0.0;
  EnergyParams energy_params;
  std::vector<AttemptRecord> attempts;
  std::vector<GatewayReception> receptions;
  std::vector<NodeEnergy> energy;
  double max_clock_error_ms = 0.0;

  int count(Outcome o) const {
    int n = 0;
    for (const AttemptRecord& a : attempts)
      if (a.outcome == o) ++n;
    return n;
  }
};

enum class SimEventKind {
  Release,
  BusGrant,
  TxStart,
  TxEnd,
  GatewayDeliver,
  ClockSync,
  CsmaSense,
  SimEnd
};

struct SimEvent {
  std::int64_t time_us = 0;
  std::int64_t seq = 0;  // tie-break: total order is (time_us, seq)
  SimEventKind kind = SimEventKind::SimEnd;
  int node = -1;
  int master = -1;
};

namespace detail {

inline std::int64_t us_from_ms(double ms) {
  return static_cast<std::int64_t>(std::llround(ms * 1000.0));
}

inline std::vector<std::uint8_t> make_payload(const PayloadSpec& spec,
                                              int node_id,
                                              std::int64_t counter) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "Packet %lld from Radio %d",
                static_cast<long long>(counter), node_id + 1);
  std::string text(buf);
  if (spec.fixed_len) text.resize(static_cast<std::size_t>(*spec.fixed_len), ' ');
  return {text.begin(), text.end()};
}

// Single-run kernel. One event loop, one seeded generator with named
// substreams, all state owned here.
class Kernel {
 public:
  Kernel(const Scenario& sc, std::uint64_t seed)
      : sc_(sc),
        seed_(seed),
        rng_shadow_(seed, "shadowing"),
        rng_backoff_(seed, "backoff"),
        rng_clock_(seed, "clock"),
        rng_sensing_(seed, "sensing") {}

  RunTrace run() {
    sc_.validate();
    build_tables();
    const std::int64_t horizon_us = sc_.horizon_ms * 1000;

    for (std::size_t m = 0; m < masters_.size(); ++m) {
      const double period_us = masters_[m].clock.model().sync_period_s * 1e6;
      if (sc_.topology.masters[m].clock.drift_ppm != 0.0 ||
          sc_.topology.masters[m].clock.sync_error_bound_ms != 0.0 ||
          sc_.topology.masters[m].clock.initial_offset_ms != 0.0)
        push(us_from_ms(period_us / 1000.0), SimEventKind::ClockSync, -1,
             static_cast<int>(m));
    }
    for (std::size_t n = 0; n < nodes_.size(); ++n)
      if (!nodes_[n].events.empty())
        push(release_wake_us(static_cast<int>(n), 0), SimEventKind::Release,
             static_cast<int>(n), nodes_[n].master);
    push(horizon_us, SimEventKind::SimEnd, -1, -1);

    std::int64_t last_time = 0;
    while (!queue_.empty()) {
      const SimEvent ev = queue_.top();
      queue_.pop();
      if (ev.time_us < last_time)
        throw std::logic_error("event executed out of causal order");
      last_time = ev.time_us;
      dispatch(ev);
    }
    finalize(horizon_us);
    return std::move(trace_);
  }

 private:
  struct NodeRt {
    int node_id = 0;
    int master = 0;
    RadioConfig cfg;
    std::vector<const ScheduleEvent*> events;
    std::size_t cursor = 0;
    std::int64_t tx_counter = 0;
    std::optional<std::size_t> attempt;  // index into trace_.attempts
    std::size_t hop_pos = 0;
    int hops_used = 0;
    double tx_time_ms = 0.0;
    int backoffs = 0;
    int hops = 0;
  };

  struct MasterRt {
    BusState bus;
    DriftingClock clock;
    double gw_distance_m = 0.0;
    int on_air = 0;
    int max_concurrent_tx = 0;
  };

  void build_tables() {
    node_index_.clear();
    for (std::size_t m = 0; m < sc_.topology.masters.size(); ++m) {
      const MasterSpec& spec = sc_.topology.masters[m];
      MasterRt rt{BusState{}, DriftingClock(spec.clock),
                  distance_m(spec.position_m, sc_.topology.gateway_position_m),
                  0, power_budget(spec.budget, 0).max_concurrent_tx};
      masters_.push_back(std::move(rt));
      for (const auto& [node_id, cfg] : spec.radios) {
        node_index_[node_id] = nodes_.size();
        nodes_.push_back(
            {node_id, static_cast<int>(m), cfg, {}, 0, 0, std::nullopt, 0, 0,
             0.0, 0, 0});
      }
    }
    for (const ScheduleEvent& e : sc_.schedule.events)
      nodes_[node_index_.at(e.node_id)].events.push_back(&e);

    on_air_per_channel_.assign(sc_.topology.channel_table.size(), 0);
    trace_.seed = seed_;
    trace_.scenario_digest = sc_.digest;
    trace_.mac = sc_.mac;
    trace_.horizon_ms = sc_.horizon_ms;
    trace_.bus_overhead_ms = sc_.bus_overhead_ms;
    trace_.energy_params = sc_.energy;
  }

  void push(std::int64_t t, SimEventKind kind, int node, int master) {
    queue_.push(SimEvent{t, next_seq_++, kind, node, master});
  }

  std::int64_t overhead_us() const { return us_from_ms(sc_.bus_overhead_ms); }
  std::int64_t sense_us() const {
    return us_from_ms(sc_.csma.sense_duration_ms);
  }

  // TDMA anticipates the command overhead so that, uncontended, the frame
  // hits the air exactly at its release instant. CSMA starts the whole
  // procedure at the release.
  std::int64_t release_wake_us(int n, std::size_t cursor) const {
    const NodeRt& node = nodes_[n];
    const DriftingClock& ck = masters_[node.master].clock;
    std::int64_t local = node.events[cursor]->release_ms * 1000;
    if (sc_.mac == MacKind::Tdma) local = std::max<std::int64_t>(0, local - overhead_us());
    return std::max<std::int64_t>(
        0, static_cast<std::int64_t>(
               std::llround(ck.to_global(static_cast<double>(local)))));
  }

  void dispatch(const SimEvent& ev) {
    switch (ev.kind) {
      case SimEventKind::Release: on_release(ev); break;
      case SimEventKind::BusGrant: on_grant(ev.node, ev.time_us); break;
      case SimEventKind::TxStart: on_tx_start(ev.node, ev.time_us); break;
      case SimEventKind::TxEnd: on_tx_end(ev.node, ev.time_us); break;
      case SimEventKind::GatewayDeliver: break;  // arrival already recorded
      case SimEventKind::ClockSync: on_clock_sync(ev.master, ev.time_us); break;
      case SimEventKind::CsmaSense: on_csma_sense(ev.node, ev.time_us); break;
      case SimEventKind::SimEnd: audit_clocks(ev.time_us); break;
    }
  }

  void on_release(const SimEvent& ev) {
    NodeRt& n = nodes_[ev.node];
    MasterRt& m = masters_[n.master];
    const ScheduleEvent& se = *n.events[n.cursor];
    const std::int64_t release_local_us = se.release_ms * 1000;

    // A sync may have pulled the local clock back; wait out the remainder.
    std::int64_t wake_local = release_local_us;
    if (sc_.mac == MacKind::Tdma)
      wake_local = std::max<std::int64_t>(0, wake_local - overhead_us());
    if (m.clock.to_local(static_cast<double>(ev.time_us)) <
        static_cast<double>(wake_local) - 0.5) {
      push(std::max(ev.time_us + 1,
                    static_cast<std::int64_t>(std::llround(
                        m.clock.to_global(static_cast<double>(wake_local))))),
           SimEventKind::Release, ev.node, n.master);
      return;
    }

    AttemptRecord rec;
    rec.node_id = n.node_id;
    rec.seq = static_cast<std::int64_t>(trace_.attempts.size());
    rec.scheduled_release_ms = se.release_ms;
    rec.intended_global_us = static_cast<std::int64_t>(std::llround(
        m.clock.to_global(static_cast<double>(release_local_us))));
    rec.spreading_factor = se.spreading_factor;
    rec.channel_index = se.channel_index;
    rec.payload = make_payload(sc_.payload, n.node_id, n.tx_counter++);
    RadioConfig cfg = n.cfg;
    cfg.spreading_factor = se.spreading_factor;
    cfg.channel_index = se.channel_index;
    rec.toa_us = us_from_ms(
        time_on_air_ms(cfg, static_cast<int>(rec.payload.size())));
    switch (sc_.deadline.kind) {
      case DeadlinePolicy::Kind::None: break;
      case DeadlinePolicy::Kind::Implicit:
        rec.deadline_us = rec.intended_global_us + *sc_.schedule.period_ms * 1000;
        break;
      case DeadlinePolicy::Kind::Fixed:
        rec.deadline_us = rec.intended_global_us + sc_.deadline.fixed_ms * 1000;
        break;
    }
    n.attempt = trace_.attempts.size();
    trace_.attempts.push_back(std::move(rec));

    if (m.bus.request(n.node_id, ev.time_us) == BusRequestResult::GrantedNow)
      on_grant(ev.node, ev.time_us);
  }

  void on_grant(int n_idx, std::int64_t now) {
    NodeRt& n = nodes_[n_idx];
    AttemptRecord& rec = trace_.attempts[*n.attempt];
    if (sc_.mac == MacKind::Tdma) {
      const std::int64_t air =
          std::max(now + overhead_us(), rec.intended_global_us);
      push(air, SimEventKind::TxStart, n_idx, n.master);
    } else {
      n.hop_pos = sc_.csma.hop_position(rec.channel_index);
      n.hops_used = 0;
      push(now + overhead_us() + sense_us(), SimEventKind::CsmaSense, n_idx,
           n.master);
    }
  }

  void on_csma_sense(int n_idx, std::int64_t now) {
    NodeRt& n = nodes_[n_idx];
    AttemptRecord& rec = trace_.attempts[*n.attempt];
    const int ch = sc_.csma.hop_order[n.hop_pos];
    bool busy = on_air_per_channel_[static_cast<std::size_t>(ch)] > 0;
    if (busy && sc_.csma.sensing_failure_prob > 0 &&
        rng_sensing_.uniform01() < sc_.csma.sensing_failure_prob)
      busy = false;
    if (!busy) {
      rec.channel_index = ch;
      push(now, SimEventKind::TxStart, n_idx, n.master);
      return;
    }
    if (n.hops_used == sc_.csma.max_hops) {
      rec.outcome = Outcome::Undeliverable;
      finish_attempt(n_idx, now);
      return;
    }
    ++rec.backoffs;
    ++rec.hops;
    ++n.backoffs;
    ++n.hops;
    ++n.hops_used;
    n.hop_pos = (n.hop_pos + 1) % sc_.csma.hop_order.size();
    const double backoff_ms =
        rng_backoff_.uniform(sc_.csma.backoff_min_ms, sc_.csma.backoff_max_ms);
    push(now + us_from_ms(backoff_ms) + sense_us(), SimEventKind::CsmaSense,
         n_idx, n.master);
  }

  void on_tx_start(int n_idx, std::int64_t now) {
    NodeRt& n = nodes_[n_idx];
    MasterRt& m = masters_[n.master];
    AttemptRecord& rec = trace_.attempts[*n.attempt];
    rec.air_start_us = now;

    const double shadow =
        sc_.topology.link_model.shadowing_sigma_db > 0
            ? rng_shadow_.normal(0.0, sc_.topology.link_model.shadowing_sigma_db)
            : 0.0;
    const LinkBudget lb = link_budget(sc_.topology.link_model,
                                      n.cfg.tx_power_dbm, m.gw_distance_m,
                                      shadow);
    rec.rssi_dbm = lb.rssi_dbm;
    rec.snr_db = lb.snr_db;

    ++m.on_air;
    if (m.on_air > m.max_concurrent_tx)
      throw std::logic_error(
          "power budget exceeded on master " +
          std::to_string(sc_.topology.masters[n.master].master_id) + ": " +
          std::to_string(m.on_air) + " concurrent transmitters");
    ++on_air_per_channel_[static_cast<std::size_t>(rec.channel_index)];
    n.tx_time_ms += static_cast<double>(rec.toa_us) / 1000.0;
    push(now + rec.toa_us, SimEventKind::TxEnd, n_idx, n.master);
  }

  void on_tx_end(int n_idx, std::int64_t now) {
    NodeRt& n = nodes_[n_idx];
    MasterRt& m = masters_[n.master];
    AttemptRecord& rec = trace_.attempts[*n.attempt];
    --m.on_air;
    --on_air_per_channel_[static_cast<std::size_t>(rec.channel_index)];
    rec.arrival_us = now;  // propagation delay below timer resolution
    push(now, SimEventKind::GatewayDeliver, n_idx, n.master);
    finish_attempt(n_idx, now);
  }

  // Common tail: give the bus back and line up the node's next release.
  void finish_attempt(int n_idx, std::int64_t now) {
    NodeRt& n = nodes_[n_idx];
    MasterRt& m = masters_[n.master];
    n.attempt.reset();
    if (auto next = m.bus.release(n.node_id, now))
      push(now, SimEventKind::BusGrant,
           static_cast<int>(node_index_.at(*next)), n.master);
    ++n.cursor;
    if (n.cursor < n.events.size())
      push(std::max(now, release_wake_us(n_idx, n.cursor)),
           SimEventKind::Release, n_idx, n.master);
  }

  void on_clock_sync(int m_idx, std::int64_t now) {
    MasterRt& m = masters_[m_idx];
    trace_.max_clock_error_ms = std::max(
        trace_.max_clock_error_ms, m.clock.error_ms_at(static_cast<double>(now)));
    const double bound_us =
        m.clock.model().sync_error_bound_ms * 1000.0;
    m.clock.resync(static_cast<double>(now),
                   rng_clock_.uniform(-bound_us, bound_us));
    const std::int64_t next =
        now + us_from_ms(m.clock.model().sync_period_s * 1000.0);
    if (next <= sc_.horizon_ms * 1000)
      push(next, SimEventKind::ClockSync, -1, m_idx);
  }

  void audit_clocks(std::int64_t now) {
    for (MasterRt& m : masters_)
      trace_.max_clock_error_ms =
          std::max(trace_.max_clock_error_ms,
                   m.clock.error_ms_at(static_cast<double>(now)));
  }

  void finalize(std::int64_t horizon_us) {
    audit_clocks(horizon_us);

    std::vector<FrameOnAir> frames;
    for (const AttemptRecord& a : trace_.attempts)
      if (a.air_start_us)
        frames.push_back({a.seq, a.channel_index, a.spreading_factor,
                          *a.air_start_us, *a.air_start_us + a.toa_us,
                          a.rssi_dbm});
    const auto survives = arbitrate_collisions(
        frames, sc_.topology.link_model.capture_threshold_db);

    for (AttemptRecord& a : trace_.attempts) {
      if (a.outcome) continue;  // undeliverable, already final
      if (!a.air_start_us)
        throw std::logic_error("attempt " + std::to_string(a.seq) +
                               " never resolved");
      if (!survives.at(a.seq)) {
        a.outcome = Outcome::Collided;
      } else if (!decodable(sc_.topology.link_model, a.snr_db,
                            a.spreading_factor)) {
        a.outcome = Outcome::Lost;
      } else {
        a.outcome = Outcome::Received;
        apply_deadline(a);
        // The gateway logs the frame either way; lateness is an analysis
        // overlay, not a reception failure.
        const LinkModel& link = sc_.topology.link_model;
        GatewayReception rx;
        rx.tmst = static_cast<std::uint32_t>(*a.arrival_us);
        rx.channel_index = a.channel_index;
        rx.rf_chain = 0;
        rx.freq_hz = sc_.topology.channel_table.frequencies_hz.at(
            static_cast<std::size_t>(a.channel_index));
        rx.spreading_factor = a.spreading_factor;
        rx.bandwidth_hz = nodes_[node_index_.at(a.node_id)].cfg.bandwidth_hz;
        rx.coding_rate = nodes_[node_index_.at(a.node_id)].cfg.coding_rate;
        rx.lsnr_db =
            std::round((a.snr_db + link.despreading_gain_db(a.spreading_factor)) *
                       10.0) /
            10.0;
        rx.rssi_dbm = static_cast<int>(std::lround(a.rssi_dbm));
        rx.payload = a.payload;
        rx.arrival_us = *a.arrival_us;
        rx.node_id = a.node_id;
        trace_.receptions.push_back(std::move(rx));
      }
    }
    std::stable_sort(trace_.receptions.begin(), trace_.receptions.end(),
                     [](const GatewayReception& x, const GatewayReception& y) {
                       return x.arrival_us < y.arrival_us;
                     });
    for (const NodeRt& n : nodes_)
      trace_.energy.push_back({n.node_id, n.tx_time_ms, n.backoffs, n.hops});

    const int total = trace_.count(Outcome::Received) +
                      trace_.count(Outcome::Collided) +
                      trace_.count(Outcome::Lost) +
                      trace_.count(Outcome::DeadlineMissed) +
                      trace_.count(Outcome::Undeliverable);
    if (total != static_cast<int>(trace_.attempts.size()))
      throw std::logic_error("attempt conservation violated");
  }

  struct EventOrder {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.time_us != b.time_us ? a.time_us > b.time_us : a.seq > b.seq;
    }
  };

  Scenario sc_;
  std::uint64_t seed_;
  RngStream rng_shadow_, rng_backoff_, rng_clock_, rng_sensing_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
  std::int64_t next_seq_ = 0;
  std::vector<NodeRt> nodes_;
  std::vector<MasterRt> masters_;
  std::map<int, std::size_t> node_index_;
  std::vector<int> on_air_per_channel_;
  RunTrace trace_;
};

}  // namespace detail

// Deterministic end to end: identical (scenario, seed) yields an identical
// trace.
inline RunTrace run(const Scenario& scenario, std::uint64_t seed) {
  return detail::Kernel(scenario, seed).run();
}

}  // namespace lorasim
