#include <catch2/catch_amalgamated.hpp>

#include <deque>

#include "lorasim/node.hpp"
#include "lorasim/rng.hpp"

using namespace lorasim;

TEST_CASE("local to global clock mapping") {
  ClockModel c;
  c.drift_ppm = 10.0;
  SECTION("drift accumulates over the time since sync") {
    // 100 s after sync at 10 ppm is 1 ms of offset
    CHECK_THAT(local_to_global_ms(c, 100000.0, 0.0, 0.0) - 100000.0,
               Catch::Matchers::WithinAbs(1.0, 1e-9));
  }
  SECTION("zero drift and residual is the identity") {
    c.drift_ppm = 0.0;
    CHECK(local_to_global_ms(c, 12345.0, 0.0, 0.0) == 12345.0);
  }
  SECTION("right after a sync the offset is the residual") {
    const double g = local_to_global_ms(c, 5000.0, 5000.0, 0.7);
    CHECK_THAT(g - 5000.0, Catch::Matchers::WithinAbs(0.7, 1e-12));
    CHECK(std::abs(g - 5000.0) <= c.sync_error_bound_ms);
  }
  CHECK_THROWS_AS(local_to_global_ms(c, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("drifting clock stays within its bound between syncs") {
  ClockModel model;
  model.drift_ppm = 20.0;
  model.sync_period_s = 64.0;
  model.sync_error_bound_ms = 1.0;
  DriftingClock clock(model);
  RngStream rng(11, "clock-test");
  const double bound_ms = model.sync_error_bound_ms +
                          model.drift_ppm * 1e-6 * model.sync_period_s * 1000.0;
  double t = 0.0;
  for (int sync = 0; sync < 50; ++sync) {
    for (int k = 1; k <= 8; ++k) {
      const double sample = t + k * (model.sync_period_s * 1e6) / 8.0;
      CHECK(clock.error_ms_at(sample) <= bound_ms + 1e-9);
    }
    t += model.sync_period_s * 1e6;
    clock.resync(t, rng.uniform(-1000.0, 1000.0));
  }
}

TEST_CASE("clock model sanity bounds") {
  ClockModel c;
  c.drift_ppm = 1500.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ClockModel{};
  c.sync_error_bound_ms = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("bus grants are exclusive and FIFO") {
  BusState bus;
  SECTION("idle bus grants immediately") {
    CHECK(bus.request(0, 0) == BusRequestResult::GrantedNow);
    CHECK(bus.owner == 0);
  }
  SECTION("owned bus queues, release hands to the head") {
    REQUIRE(bus.request(0, 0) == BusRequestResult::GrantedNow);
    CHECK(bus.request(1, 1) == BusRequestResult::Enqueued);
    CHECK(bus.request(2, 2) == BusRequestResult::Enqueued);
    CHECK(bus.release(0, 10) == 1);
    CHECK(bus.owner == 1);
    CHECK(bus.release(1, 20) == 2);
    CHECK(bus.release(2, 30) == std::nullopt);
    CHECK_FALSE(bus.owner.has_value());
  }
  SECTION("duplicate request and foreign release are errors") {
    REQUIRE(bus.request(0, 0) == BusRequestResult::GrantedNow);
    CHECK_THROWS_AS(bus.request(0, 1), std::logic_error);
    bus.request(1, 1);
    CHECK_THROWS_AS(bus.request(1, 2), std::logic_error);
    CHECK_THROWS_AS(bus.release(1, 3), std::logic_error);
  }
}

TEST_CASE("random acquire/release sequences keep at most one owner") {
  RngStream rng(21, "bus-prop");
  for (int round = 0; round < 50; ++round) {
    BusState bus;
    std::deque<int> fifo;  // oracle: arrival order of waiters
    std::optional<int> owner;
    std::vector<bool> outstanding(6, false);
    for (int step = 0; step < 200; ++step) {
      const int node = static_cast<int>(rng.uniform_int(0, 5));
      if (!outstanding[node]) {
        const auto res = bus.request(node, step);
        outstanding[node] = true;
        if (!owner) {
          owner = node;
          CHECK(res == BusRequestResult::GrantedNow);
        } else {
          fifo.push_back(node);
          CHECK(res == BusRequestResult::Enqueued);
        }
      } else if (owner == node) {
        const auto next = bus.release(node, step);
        outstanding[node] = false;
        if (fifo.empty()) {
          owner.reset();
          CHECK(next == std::nullopt);
        } else {
          owner = fifo.front();
          fifo.pop_front();
          CHECK(next == owner);
        }
      }
      CHECK(bus.owner == owner);
    }
  }
}

TEST_CASE("topology validation") {
  Topology topo;
  topo.channel_table.frequencies_hz = {868100000};
  MasterSpec m;
  m.master_id = 0;
  m.radios.push_back({0, RadioConfig{}});
  topo.masters.push_back(m);
  CHECK_NOTHROW(topo.validate());

  SECTION("duplicate node ids across masters") {
    MasterSpec m2 = m;
    m2.master_id = 1;
    topo.masters.push_back(m2);
    CHECK_THROWS_AS(topo.validate(), ValidationError);
  }
  SECTION("channel index outside the table") {
    topo.masters[0].radios[0].second.channel_index = 3;
    CHECK_THROWS_AS(topo.validate(), ValidationError);
  }
  SECTION("GPIO fan-out cap") {
    for (int i = 1; i < 8; ++i)
      topo.masters[0].radios.push_back({i, RadioConfig{}});
    CHECK_THROWS_AS(topo.validate(), ValidationError);  // 8 > 28/4
  }
  SECTION("empty channel table") {
    topo.channel_table.frequencies_hz.clear();
    CHECK_THROWS_AS(topo.validate(), ValidationError);
  }
}

TEST_CASE("channel table bounds") {
  ChannelTable t;
  t.frequencies_hz = {867200000, 868400000};
  CHECK_NOTHROW(t.validate());
  t.frequencies_hz = {868400000, 867200000};
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t.frequencies_hz = {900000000};
  CHECK_THROWS_AS(t.validate(), ValidationError);
}
