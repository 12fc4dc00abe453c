#include "oracles.hpp"

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"
#include "qfl/wireless_net.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace qfl;

namespace {

/// Hand-built instance with the given gains and default physical constants.
NetworkInstance hand_instance(const Eigen::MatrixXd& gains) {
  NetworkInstance inst;
  inst.config.num_devices = static_cast<int>(gains.rows());
  inst.config.num_channels = static_cast<int>(gains.cols());
  inst.device_distances_m = Eigen::VectorXd::Ones(gains.rows());
  inst.link_gain = gains;
  return inst;
}

double mean_fading(double k, int draws, std::uint64_t seed) {
  CounterRng rng(seed);
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += rician_power_gain(k, rng);
  return sum / draws;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  NetworkConfig c;
  c.num_channels = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("num_channels"), ValidationError);
  c = {};
  c.power_range_dbm = {10.0, 5.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.distance_range_m = {0.0, 10.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.rician_k = -1.0;
  CHECK_THROWS_AS(sample_network(c), ValidationError);
}

TEST_CASE("reference distance gives the reference path loss") {
  NetworkConfig c;
  CHECK(pathloss_db(c, 1.0) == doctest::Approx(30.0));
  CHECK(pathloss_db(c, 10.0) == doctest::Approx(60.0));
  CHECK(std::pow(10.0, -pathloss_db(c, 1.0) / 10.0) == doctest::Approx(1e-3));
}

TEST_CASE("line-of-sight limit leaves pure path loss") {
  NetworkConfig c{.num_devices = 5, .num_channels = 3, .rician_k = 1e6, .seed = 4};
  const NetworkInstance inst = sample_network(c);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 3; ++k) {
      const double pl = std::pow(10.0, -pathloss_db(c, inst.device_distances_m[i]) / 10.0);
      CHECK(std::abs(inst.link_gain(i, k) / pl - 1.0) <= 1e-3);
    }
}

TEST_CASE("fading has unit mean power") {
  CHECK(mean_fading(0.0, 100000, 1) == doctest::Approx(1.0).epsilon(0.01));
  for (double k : {1.0, 5.0, 10.0}) CHECK(mean_fading(k, 100000, 2) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("sampling is a pure function of the config") {
  NetworkConfig c{.num_devices = 30, .num_channels = 5, .seed = 99};
  const NetworkInstance a = sample_network(c);
  const NetworkInstance b = sample_network(c);
  CHECK(a.link_gain == b.link_gain);
  CHECK(a.device_distances_m == b.device_distances_m);
  c.seed = 100;
  CHECK(sample_network(c).link_gain != a.link_gain);
  CHECK((a.link_gain.array() > 0.0).all());
  CHECK(a.link_gain.allFinite());
  CHECK(a.device_distances_m.minCoeff() >= 1.0);
  CHECK(a.device_distances_m.maxCoeff() <= 1800.0);
}

TEST_CASE("adding devices leaves earlier devices' draws unchanged") {
  NetworkConfig c{.num_devices = 4, .num_channels = 3, .seed = 12};
  const NetworkInstance small = sample_network(c);
  c.num_devices = 9;
  const NetworkInstance large = sample_network(c);
  CHECK(large.link_gain.topRows(4) == small.link_gain);
}

TEST_CASE("sinr of a lone device has no interference term") {
  Eigen::MatrixXd g(2, 2);
  g << 1e-9, 2e-9, 3e-9, 4e-9;
  const NetworkInstance inst = hand_instance(g);
  const Assignment a{{0, 1}};
  const PowerVector p{Eigen::Vector2d(20.0, 10.0)};
  const double noise = oracle::noise_watts(inst.config);
  CHECK(sinr(inst, a, p, 0) == doctest::Approx(oracle::watts(20.0) * 1e-9 / noise).epsilon(1e-12));
  CHECK(sinr(inst, a, p, 1) == doctest::Approx(oracle::watts(10.0) * 4e-9 / noise).epsilon(1e-12));
}

TEST_CASE("zero-watt sentinel gives zero sinr and zero rate") {
  Eigen::MatrixXd g(2, 1);
  g << 1e-9, 1e-9;
  const NetworkInstance inst = hand_instance(g);
  const double off = -std::numeric_limits<double>::infinity();
  const PowerVector p{Eigen::Vector2d(off, off)};
  CHECK(sinr(inst, Assignment{{0, 0}}, p, 0) == 0.0);
  CHECK(sum_rate(inst, Assignment{{0, 0}}, p) == 0.0);
}

TEST_CASE("sinr matches a hand evaluation on three devices") {
  Eigen::MatrixXd g(3, 2);
  g << 2e-10, 5e-11, 7e-11, 3e-10, 1e-10, 4e-11;
  const NetworkInstance inst = hand_instance(g);
  const Assignment a{{0, 1, 0}};
  const PowerVector p{Eigen::Vector3d(24.0, 12.0, 3.0)};
  const double n0b = std::pow(10.0, (-174.0 - 30.0) / 10.0) * 180e3;
  const double p0 = 0.251188643150958;
  const double p1 = 0.0158489319246111;
  const double p2 = 0.00199526231496888;
  CHECK(sinr(inst, a, p, 0) == doctest::Approx(p0 * 2e-10 / (p2 * 1e-10 + n0b)).epsilon(1e-12));
  CHECK(sinr(inst, a, p, 1) == doctest::Approx(p1 * 3e-10 / n0b).epsilon(1e-12));
  CHECK(sinr(inst, a, p, 2) == doctest::Approx(p2 * 1e-10 / (p0 * 2e-10 + n0b)).epsilon(1e-12));
}

TEST_CASE("unit sinr yields one bit per hertz") {
  const double noise = oracle::noise_watts(NetworkConfig{});
  Eigen::MatrixXd g(1, 1);
  g << noise / oracle::watts(10.0);
  const NetworkInstance inst = hand_instance(g);
  const PowerVector p{Eigen::VectorXd::Constant(1, 10.0)};
  CHECK(sum_rate(inst, Assignment{{0}}, p) == doctest::Approx(180000.0).epsilon(1e-12));
}

TEST_CASE("sum-rate matches direct re-evaluation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    NetworkConfig c{.num_devices = 4 + static_cast<int>(seed), .num_channels = 3, .seed = seed};
    const NetworkInstance inst = sample_network(c);
    CounterRng rng(derive_seed(seed, "test.assign"));
    Assignment a;
    std::vector<double> w;
    PowerVector p{Eigen::VectorXd(c.num_devices)};
    for (int i = 0; i < c.num_devices; ++i) {
      a.channel_of_device.push_back(static_cast<int>(rng() % 3));
      p.power_dbm[i] = 24.0 * rng.uniform();
      w.push_back(oracle::watts(p.power_dbm[i]));
    }
    const double direct = oracle::sum_rate(inst, a.channel_of_device, w);
    CHECK(std::abs(sum_rate(inst, a, p) - direct) <= 1e-9 * direct);
    CHECK(device_rates(inst, a, p).sum() == doctest::Approx(direct).epsilon(1e-12));
    CHECK(sum_rate_watts(inst, a.channel_of_device, power_watts(p)) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("a lone device's rate grows with its own power") {
  NetworkConfig c{.num_devices = 3, .num_channels = 3, .seed = 8};
  const NetworkInstance inst = sample_network(c);
  const Assignment a{{0, 1, 1}};
  PowerVector p = uniform_power(inst, 5.0);
  double last = sum_rate(inst, a, p);
  for (double dbm = 6.0; dbm <= 24.0; dbm += 2.0) {
    p.power_dbm[0] = dbm;
    const double now = sum_rate(inst, a, p);
    CHECK(now >= last);
    last = now;
  }
}

TEST_CASE("joining an occupied channel never raises the incumbent's sinr") {
  NetworkConfig c{.num_devices = 6, .num_channels = 2, .seed = 21};
  const NetworkInstance inst = sample_network(c);
  const PowerVector p = uniform_power(inst, 15.0);
  Assignment a{{0, 1, 1, 1, 1, 1}};
  const double before = sinr(inst, a, p, 0);
  a.channel_of_device[3] = 0;
  CHECK(sinr(inst, a, p, 0) <= before);
}

TEST_CASE("assignment and power validation") {
  NetworkConfig c{.num_devices = 3, .num_channels = 2, .seed = 1};
  const NetworkInstance inst = sample_network(c);
  CHECK_THROWS_AS(validate(inst, Assignment{{0, 2, 1}}), ValidationError);
  CHECK_THROWS_AS(validate(inst, Assignment{{0, 1}}), ValidationError);
  CHECK_THROWS_AS(validate(inst, PowerVector{Eigen::Vector3d(1.0, 25.0, 3.0)}), ValidationError);
  CHECK_NOTHROW(validate(inst, midpoint_power(inst)));
  CHECK(midpoint_power(inst).power_dbm[0] == 12.0);
}

TEST_CASE("greedy assignment picks each device's strongest channel") {
  NetworkConfig c{.num_devices = 10, .num_channels = 4, .seed = 3};
  const NetworkInstance inst = sample_network(c);
  const Assignment a = greedy_assignment(inst);
  for (int i = 0; i < 10; ++i) {
    Eigen::Index best = 0;
    inst.link_gain.row(i).maxCoeff(&best);
    CHECK(a.channel_of_device[static_cast<std::size_t>(i)] == best);
  }
}

TEST_CASE("dbm conversion fixed points") {
  CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0));
  CHECK(dbm_to_watt(0.0) == doctest::Approx(1e-3));
  CHECK(watt_to_dbm(dbm_to_watt(17.5)) == doctest::Approx(17.5));
}
