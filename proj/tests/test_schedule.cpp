#include <catch2/catch_amalgamated.hpp>

#include "lorasim/schedule.hpp"

using namespace lorasim;

namespace {
const std::vector<std::int64_t> kPhase0{0};
const std::vector<int> kSf7{7};
const std::vector<int> kCh0{0};
}  // namespace

TEST_CASE("periodic generator lays out an arithmetic progression") {
  const Schedule s = generate_periodic(1, 1000, kPhase0, kSf7, kCh0, 3000);
  REQUIRE(s.events.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(s.events[i].release_ms == static_cast<std::int64_t>(i) * 1000);
  CHECK(s.periodic);
  CHECK(s.period_ms == 1000);
}

TEST_CASE("staggered phases keep pairwise release gaps at the stagger") {
  const std::vector<std::int64_t> phases{0, 90, 180};
  const std::vector<int> sf{7, 7, 7}, ch{0, 1, 2};
  const Schedule s = generate_periodic(3, 270, phases, sf, ch, 60000);
  for (std::size_t i = 1; i < s.events.size(); ++i)
    CHECK(s.events[i].release_ms - s.events[i - 1].release_ms >= 90);
}

TEST_CASE("periodic generator argument errors") {
  CHECK_THROWS_AS(generate_periodic(0, 1000, {}, {}, {}, 3000),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_periodic(1, 0, kPhase0, kSf7, kCh0, 3000),
                  std::invalid_argument);
  const std::vector<std::int64_t> bad_phase{1000};
  CHECK_THROWS_AS(generate_periodic(1, 1000, bad_phase, kSf7, kCh0, 3000),
                  std::invalid_argument);
}

TEST_CASE("aperiodic generator is a pure function of its seed") {
  const std::vector<int> sf{7, 8}, ch{0, 1};
  const Schedule a = generate_aperiodic(2, 206, 60000, 42, sf, ch);
  const Schedule b = generate_aperiodic(2, 206, 60000, 42, sf, ch);
  const Schedule c = generate_aperiodic(2, 206, 60000, 43, sf, ch);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.events.size() == 206);
  CHECK(generate_aperiodic(2, 0, 60000, 1, sf, ch).events.empty());
}

TEST_CASE("minimum period reproduces the serialization floor") {
  const RadioConfig cfg;
  CHECK_THAT(min_period_ms(7, 21, 1, 19.1, cfg),
             Catch::Matchers::WithinAbs(90.012, 1e-9));
  CHECK_THAT(min_period_ms(7, 21, 3, 19.1, cfg),
             Catch::Matchers::WithinAbs(270.036, 1e-9));
  SECTION("exactly linear in the radio count") {
    for (int k = 1; k <= 6; ++k)
      CHECK(min_period_ms(9, 32, k, 12.5, cfg) ==
            k * min_period_ms(9, 32, 1, 12.5, cfg));
  }
  CHECK_THROWS_AS(min_period_ms(7, 21, 0, 19.1, cfg), std::invalid_argument);
}

TEST_CASE("schedule validation reports bus and air conflicts") {
  std::map<int, RadioConfig> cfgs{{0, RadioConfig{}}, {1, RadioConfig{}},
                                  {2, RadioConfig{}}};
  SECTION("a single node at or above the floor is conflict free") {
    const Schedule s = generate_periodic(1, 91, kPhase0, kSf7, kCh0, 9100);
    CHECK(validate_schedule(s, {{0}}, cfgs, 19.1).empty());
  }
  SECTION("three nodes on one bus with simultaneous releases conflict") {
    const std::vector<std::int64_t> phases{0, 0, 0};
    const std::vector<int> sf{7, 7, 7}, ch{0, 1, 2};
    const Schedule s = generate_periodic(3, 200, phases, sf, ch, 1000);
    const auto conflicts = validate_schedule(s, {{0, 1, 2}}, cfgs, 19.1);
    CHECK_FALSE(conflicts.empty());
    for (const auto& c : conflicts)
      CHECK(c.kind == ScheduleConflict::Kind::Bus);
  }
  SECTION("same channel/SF across buses at the same instant is an air conflict") {
    const std::vector<std::int64_t> phases{0, 0};
    const std::vector<int> sf{7, 7}, ch{0, 0};
    const Schedule s = generate_periodic(2, 500, phases, sf, ch, 400);
    const auto conflicts = validate_schedule(s, {{0}, {1}}, cfgs, 19.1);
    REQUIRE(conflicts.size() == 1);
    CHECK(conflicts[0].kind == ScheduleConflict::Kind::Air);
  }
  SECTION("unknown node id") {
    Schedule s = generate_periodic(1, 100, kPhase0, kSf7, kCh0, 100);
    s.events[0].node_id = 9;
    s.events[1].node_id = 9;
    CHECK_THROWS_AS(validate_schedule(s, {{0}}, cfgs, 19.1), ValidationError);
  }
}

TEST_CASE("feasible staggered schedules validate clean") {
  RngStream rng(5, "sched-prop");
  const RadioConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const int nodes = static_cast<int>(rng.uniform_int(1, 4));
    const double per_node = min_period_ms(7, 21, 1, 19.1, cfg);
    const std::int64_t stagger =
        static_cast<std::int64_t>(std::ceil(per_node)) +
        rng.uniform_int(0, 50);
    const std::int64_t period = stagger * nodes + rng.uniform_int(0, 100);
    std::vector<std::int64_t> phases;
    std::vector<int> sf, ch;
    for (int n = 0; n < nodes; ++n) {
      phases.push_back(n * stagger);
      sf.push_back(7);
      ch.push_back(0);
    }
    const Schedule s =
        generate_periodic(nodes, period, phases, sf, ch, period * 5);
    std::map<int, RadioConfig> cfgs;
    std::vector<int> bus;
    for (int n = 0; n < nodes; ++n) {
      cfgs[n] = cfg;
      bus.push_back(n);
    }
    CHECK(validate_schedule(s, {bus}, cfgs, 19.1).empty());
  }
}

TEST_CASE("memory footprint is the product of its factors") {
  CHECK(memory_footprint_bytes(13, 1.0, 10, 86400) == 11232000);
  CHECK(memory_footprint_bytes(13, 1.0, 0, 86400) == 0);
  CHECK(memory_footprint_bytes(13, 1.0, 1, 86400) == 1123200);
  CHECK_THROWS_AS(memory_footprint_bytes(-1, 1.0, 1, 1.0),
                  std::invalid_argument);
}

TEST_CASE("power budget") {
  const CapacityBudget b;  // 2.5 supply, 0.5 board, 0.7 tx
  const PowerReport one = power_budget(b, 1);
  CHECK_THAT(one.headroom_a, Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK(one.feasible);
  CHECK(one.max_concurrent_tx == 2);
  CHECK(power_budget(b, 0).feasible);
  CHECK_FALSE(power_budget(b, 3).feasible);
  CapacityBudget zero = b;
  zero.radio_tx_current_a = 0.0;
  CHECK_THROWS_AS(power_budget(zero, 1), std::invalid_argument);
  CHECK(power_budget(zero, 0).feasible);
}

TEST_CASE("GPIO fan-out planner") {
  CHECK(max_radios_per_master(28, 4) == 7);
  CHECK(max_radios_per_master(28, 28) == 1);
  CHECK(max_radios_per_master(25, 4) == 6);
  CHECK_THROWS_AS(max_radios_per_master(28, 0), std::invalid_argument);
}

TEST_CASE("schedule files round-trip bit-exactly") {
  const std::vector<std::int64_t> phases{0, 90};
  const std::vector<int> sf{7, 9}, ch{1, 0};
  const Schedule s = generate_periodic(2, 270, phases, sf, ch, 2000);
  const std::string text = schedule_to_json(s);
  const Schedule back = schedule_from_json(text);
  CHECK(back == s);
  CHECK(schedule_to_json(back) == text);
  CHECK(text.find("\"t_ms\"") != std::string::npos);
  CHECK(text.find("\"node\"") != std::string::npos);
}

TEST_CASE("schedule parser rejects unsorted input") {
  const std::string text = R"({
    "horizon_ms": 1000,
    "period_ms": null,
    "events": [
      {"node": 0, "t_ms": 500, "sf": 7, "ch": 0},
      {"node": 0, "t_ms": 100, "sf": 7, "ch": 0}
    ]
  })";
  CHECK_THROWS_AS(schedule_from_json(text), ParseError);
  CHECK_THROWS_AS(schedule_from_json("{"), ParseError);
  CHECK_THROWS_AS(schedule_from_json(R"({"horizon_ms": 1})"), ParseError);
}
