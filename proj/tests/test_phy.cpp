#include <catch2/catch_amalgamated.hpp>

#include "lorasim/phy.hpp"
#include "lorasim/rng.hpp"
#include "oracles.hpp"

using namespace lorasim;

static RadioConfig paper_cfg(int sf) {
  RadioConfig cfg;  // BW125, CR 4/7, preamble 8, CRC on, explicit header
  cfg.spreading_factor = sf;
  return cfg;
}

TEST_CASE("time on air matches the frozen reference points") {
  CHECK_THAT(time_on_air_ms(paper_cfg(7), 21),
             Catch::Matchers::WithinAbs(70.912, 1e-9));
  CHECK_THAT(time_on_air_ms(paper_cfg(12), 21),
             Catch::Matchers::WithinAbs(1810.432, 1e-9));
}

TEST_CASE("payload symbol count clamps at zero") {
  RadioConfig cfg = paper_cfg(12);
  cfg.crc_enabled = false;
  cfg.explicit_header = false;
  const double t_sym = symbol_time_ms(12, 125000);
  CHECK_THAT(time_on_air_ms(cfg, 1),
             Catch::Matchers::WithinAbs(12.25 * t_sym + 8 * t_sym, 1e-9));
}

TEST_CASE("payload bounds") {
  CHECK_THROWS_AS(time_on_air_ms(paper_cfg(7), 256), PayloadTooLongError);
  CHECK_THROWS_AS(time_on_air_ms(paper_cfg(7), -1), std::invalid_argument);
  CHECK(time_on_air_ms(paper_cfg(7), 0) > 0);
  CHECK_NOTHROW(time_on_air_ms(paper_cfg(7), 255));
}

TEST_CASE("config validation rejects out-of-range parameters") {
  RadioConfig cfg;
  cfg.spreading_factor = 6;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RadioConfig{};
  cfg.bandwidth_hz = 100000;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RadioConfig{};
  cfg.coding_rate = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("time on air is monotone in payload and SF") {
  RngStream rng(7, "phy-prop");
  const int bws[] = {125000, 250000, 500000};
  for (int i = 0; i < 200; ++i) {
    RadioConfig cfg;
    cfg.spreading_factor = static_cast<int>(rng.uniform_int(7, 12));
    cfg.bandwidth_hz = bws[rng.uniform_int(0, 2)];
    cfg.coding_rate = static_cast<int>(rng.uniform_int(1, 4));
    cfg.preamble_symbols = static_cast<int>(rng.uniform_int(6, 16));
    cfg.crc_enabled = rng.uniform01() < 0.5;
    cfg.explicit_header = rng.uniform01() < 0.5;
    const int pl = static_cast<int>(rng.uniform_int(0, 254));
    CHECK(time_on_air_ms(cfg, pl + 1) >= time_on_air_ms(cfg, pl));
    if (cfg.spreading_factor < 12) {
      RadioConfig up = cfg;
      up.spreading_factor++;
      up.bandwidth_hz = 125000;
      RadioConfig base = cfg;
      base.bandwidth_hz = 125000;
      CHECK(time_on_air_ms(up, pl) > time_on_air_ms(base, pl));
    }
  }
}

TEST_CASE("airtime is an exact whole number of symbols past the preamble") {
  RngStream rng(13, "phy-quant");
  const int bws[] = {125000, 250000, 500000};
  for (int i = 0; i < 100; ++i) {
    RadioConfig cfg;
    cfg.spreading_factor = static_cast<int>(rng.uniform_int(7, 12));
    cfg.bandwidth_hz = bws[rng.uniform_int(0, 2)];
    cfg.coding_rate = static_cast<int>(rng.uniform_int(1, 4));
    const int pl = static_cast<int>(rng.uniform_int(0, 255));
    const double t_sym = symbol_time_ms(cfg.spreading_factor, cfg.bandwidth_hz);
    const double payload_part =
        time_on_air_ms(cfg, pl) - (cfg.preamble_symbols + 4.25) * t_sym;
    const double syms = payload_part / t_sym;
    CHECK_THAT(syms, Catch::Matchers::WithinAbs(std::round(syms), 1e-6));
  }
}

TEST_CASE("low data rate optimization follows the 16 ms symbol rule") {
  CHECK_FALSE(low_data_rate_optimize(10, 125000));
  CHECK(low_data_rate_optimize(11, 125000));  // 16.384 ms
  CHECK(low_data_rate_optimize(12, 125000));
  CHECK(low_data_rate_optimize(12, 250000));  // also 16.384 ms
  CHECK_FALSE(low_data_rate_optimize(11, 250000));
  CHECK_FALSE(low_data_rate_optimize(12, 500000));
}

TEST_CASE("transmit timeout rule") {
  CHECK_THAT(tx_timeout_ms(70.912), Catch::Matchers::WithinAbs(359.56, 1e-9));
  CHECK_THAT(tx_timeout_ms(1.0), Catch::Matchers::WithinAbs(10.0, 1e-12));
  CHECK_THAT(tx_timeout_ms(1810.432), Catch::Matchers::WithinAbs(9057.16, 1e-9));
  CHECK_THROWS_AS(tx_timeout_ms(0.0), std::invalid_argument);
}

TEST_CASE("link budget") {
  LinkModel m;
  m.reference_loss_db = 80.0;
  m.reference_distance_m = 1.0;
  m.path_loss_exponent = 2.0;
  SECTION("log term vanishes at the reference distance") {
    CHECK_THAT(link_budget(m, 0.0, 1.0, 0.0).rssi_dbm,
               Catch::Matchers::WithinAbs(-80.0, 1e-12));
  }
  SECTION("ten times the distance costs 20 dB at exponent 2") {
    CHECK_THAT(link_budget(m, 0.0, 10.0, 0.0).rssi_dbm,
               Catch::Matchers::WithinAbs(-100.0, 1e-9));
  }
  SECTION("snr is rssi minus the noise floor") {
    LinkModel m2;
    m2.noise_floor_dbm = -117.0;
    m2.reference_loss_db = 84.0;
    const LinkBudget lb = link_budget(m2, 0.0, 1.0, 0.0);
    CHECK_THAT(lb.rssi_dbm, Catch::Matchers::WithinAbs(-84.0, 1e-12));
    CHECK_THAT(lb.snr_db, Catch::Matchers::WithinAbs(33.0, 1e-12));
  }
  CHECK_THROWS_AS(link_budget(m, 0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("decodability floors") {
  LinkModel m;
  CHECK_FALSE(decodable(m, -8.0, 7));  // floor -7.5
  CHECK(decodable(m, -8.0, 8));        // floor -10
  CHECK(decodable(m, -7.5, 7));        // boundary is inclusive
  SECTION("monotone in snr") {
    RngStream rng(3, "dec");
    for (int i = 0; i < 200; ++i) {
      const int sf = static_cast<int>(rng.uniform_int(7, 12));
      const double snr = rng.uniform(-30.0, 10.0);
      if (decodable(m, snr, sf)) CHECK(decodable(m, snr + rng.uniform01(), sf));
    }
  }
}

TEST_CASE("collision arbitration: spelled-out cases") {
  const std::vector<FrameOnAir> overlapping = {
      {0, 1, 7, 0, 100, -70.0}, {1, 1, 7, 50, 150, -80.0}};
  SECTION("same channel and SF, capture off: both collide") {
    const auto r = arbitrate_collisions(overlapping, std::nullopt);
    CHECK_FALSE(r.at(0));
    CHECK_FALSE(r.at(1));
  }
  SECTION("same channel, different SF: orthogonal") {
    std::vector<FrameOnAir> frames = overlapping;
    frames[1].spreading_factor = 9;
    const auto r = arbitrate_collisions(frames, std::nullopt);
    CHECK(r.at(0));
    CHECK(r.at(1));
  }
  SECTION("capture at 6 dB: the 10 dB stronger frame survives") {
    const auto r = arbitrate_collisions(overlapping, 6.0);
    CHECK(r.at(0));
    CHECK_FALSE(r.at(1));
  }
  SECTION("touching intervals do not conflict") {
    const std::vector<FrameOnAir> frames = {{0, 1, 7, 0, 100, -70.0},
                                            {1, 1, 7, 100, 200, -70.0}};
    const auto r = arbitrate_collisions(frames, std::nullopt);
    CHECK(r.at(0));
    CHECK(r.at(1));
  }
}

TEST_CASE("collision arbitration agrees with the pairwise oracle") {
  RngStream rng(99, "collision-prop");
  for (int scene = 0; scene < 300; ++scene) {
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    const bool capture = rng.uniform01() < 0.5;
    const double threshold = 6.0;
    std::vector<FrameOnAir> frames;
    std::vector<oracles::Frame> oracle_frames;
    for (int i = 0; i < n; ++i) {
      const std::int64_t start = rng.uniform_int(0, 400);
      const std::int64_t len = rng.uniform_int(1, 200);
      const int ch = static_cast<int>(rng.uniform_int(0, 2));
      const int sf = static_cast<int>(rng.uniform_int(7, 9));
      const double rssi = rng.uniform(-100.0, -60.0);
      frames.push_back({i, ch, sf, start, start + len, rssi});
      oracle_frames.push_back({i, ch, sf, start, start + len, rssi});
    }
    const auto got = arbitrate_collisions(
        frames, capture ? std::optional<double>(threshold) : std::nullopt);
    const auto want = oracles::pairwise_survivors(oracle_frames, capture, threshold);
    REQUIRE(got == want);
  }
}
