#include "qfl/wireless_net.hpp"

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

#include <limits>
#include <string>

namespace qfl {

void NetworkConfig::validate() const {
  require(num_devices >= 1, "network.num_devices must be >= 1, got " + std::to_string(num_devices));
  require(num_channels >= 1, "network.num_channels must be >= 1, got " + std::to_string(num_channels));
  require(std::isfinite(channel_bandwidth_hz) && channel_bandwidth_hz > 0.0,
          "network.channel_bandwidth_hz must be positive");
  require(std::isfinite(distance_range_m.lo) && std::isfinite(distance_range_m.hi) &&
              distance_range_m.lo > 0.0 && distance_range_m.lo <= distance_range_m.hi,
          "network.distance_range_m must satisfy 0 < lo <= hi < inf");
  require(std::isfinite(power_range_dbm.lo) && std::isfinite(power_range_dbm.hi) &&
              power_range_dbm.lo <= power_range_dbm.hi,
          "network.power_range_dbm must satisfy lo <= hi");
  require(std::isfinite(noise_psd_dbm_per_hz), "network.noise_psd_dbm_per_hz must be finite");
  require(rician_k >= 0.0, "network.rician_k must be >= 0");
  require(std::isfinite(pathloss_exponent) && pathloss_exponent >= 0.0,
          "network.pathloss_exponent must be finite and >= 0");
  require(std::isfinite(pathloss_ref_db), "network.pathloss_ref_db must be finite");
}

double NetworkConfig::noise_watts() const {
  return dbm_to_watt(noise_psd_dbm_per_hz) * channel_bandwidth_hz;
}

double pathloss_db(const NetworkConfig& config, double distance_m) {
  return config.pathloss_ref_db + 10.0 * config.pathloss_exponent * std::log10(distance_m);
}

NetworkInstance sample_network(const NetworkConfig& config) {
  config.validate();
  NetworkInstance inst;
  inst.config = config;
  const int n = config.num_devices;
  const int k = config.num_channels;
  inst.device_distances_m.resize(n);
  inst.link_gain.resize(n, k);

  // One substream per device: distance first, then one fading draw per channel.
  for (int i = 0; i < n; ++i) {
    CounterRng rng(derive_seed(config.seed, "wireless_net.device", static_cast<std::uint64_t>(i)));
    const double d = config.distance_range_m.lo +
                     (config.distance_range_m.hi - config.distance_range_m.lo) * rng.uniform();
    inst.device_distances_m[i] = d;
    const double path_gain = std::pow(10.0, -pathloss_db(config, d) / 10.0);
    for (int c = 0; c < k; ++c) {
      double fade = rician_power_gain(config.rician_k, rng);
      // A zero draw has probability zero but would break the positive-gain invariant.
      if (!(fade > 0.0)) fade = std::numeric_limits<double>::min();
      inst.link_gain(i, c) = path_gain * fade;
    }
  }
  require(inst.link_gain.allFinite() && (inst.link_gain.array() > 0.0).all(),
          "sampled link gains are not strictly positive and finite; check path-loss parameters");
  return inst;
}

void validate(const NetworkInstance& instance, const Assignment& assignment) {
  require(static_cast<int>(assignment.channel_of_device.size()) == instance.num_devices(),
          "assignment length " + std::to_string(assignment.channel_of_device.size()) +
              " != num_devices " + std::to_string(instance.num_devices()));
  for (int c : assignment.channel_of_device)
    require(c >= 0 && c < instance.num_channels(), "assignment channel index out of range: " + std::to_string(c));
}

void validate(const NetworkInstance& instance, const PowerVector& powers) {
  require(powers.power_dbm.size() == instance.num_devices(), "power vector length != num_devices");
  const auto& range = instance.config.power_range_dbm;
  for (double p : powers.power_dbm) {
    const bool off = std::isinf(p) && p < 0.0;
    require(off || (p >= range.lo - 1e-9 && p <= range.hi + 1e-9),
            "power " + std::to_string(p) + " dBm outside configured range");
  }
}

PowerVector uniform_power(const NetworkInstance& instance, double dbm) {
  return PowerVector{Eigen::VectorXd::Constant(instance.num_devices(), dbm)};
}

PowerVector midpoint_power(const NetworkInstance& instance) {
  const auto& r = instance.config.power_range_dbm;
  return uniform_power(instance, 0.5 * (r.lo + r.hi));
}

Eigen::VectorXd power_watts(const PowerVector& powers) {
  return powers.power_dbm.unaryExpr([](double dbm) { return dbm_to_watt(dbm); });
}

double sinr(const NetworkInstance& instance, const Assignment& assignment, const PowerVector& powers,
            int device) {
  validate(instance, assignment);
  validate(instance, powers);
  require(device >= 0 && device < instance.num_devices(), "device index out of range");
  const Eigen::VectorXd w = power_watts(powers);
  const int ch = assignment.channel_of_device[device];
  double interference = 0.0;
  for (int j = 0; j < instance.num_devices(); ++j)
    if (j != device && assignment.channel_of_device[j] == ch) interference += w[j] * instance.link_gain(j, ch);
  return w[device] * instance.link_gain(device, ch) / (interference + instance.config.noise_watts());
}

namespace {

Eigen::VectorXd rates_unchecked(const NetworkInstance& instance, const std::vector<int>& channel_of_device,
                                const Eigen::VectorXd& watts) {
  const int n = instance.num_devices();
  const double noise = instance.config.noise_watts();
  const double bw = instance.bandwidth();
  // Group by channel so interference is summed directly (no total-minus-self cancellation).
  std::vector<std::vector<int>> members(static_cast<std::size_t>(instance.num_channels()));
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(channel_of_device[i])].push_back(i);
  Eigen::VectorXd rates(n);
  for (const auto& group : members) {
    for (int i : group) {
      const int ch = channel_of_device[i];
      double interference = 0.0;
      for (int j : group)
        if (j != i) interference += watts[j] * instance.link_gain(j, ch);
      const double s = watts[i] * instance.link_gain(i, ch) / (interference + noise);
      rates[i] = bw * std::log2(1.0 + s);
    }
  }
  return rates;
}

}  // namespace

Eigen::VectorXd device_rates(const NetworkInstance& instance, const Assignment& assignment,
                             const PowerVector& powers) {
  validate(instance, assignment);
  validate(instance, powers);
  return rates_unchecked(instance, assignment.channel_of_device, power_watts(powers));
}

double sum_rate(const NetworkInstance& instance, const Assignment& assignment, const PowerVector& powers) {
  return device_rates(instance, assignment, powers).sum();
}

double sum_rate_watts(const NetworkInstance& instance, const std::vector<int>& channel_of_device,
                      const Eigen::VectorXd& watts) {
  return rates_unchecked(instance, channel_of_device, watts).sum();
}

Assignment greedy_assignment(const NetworkInstance& instance) {
  Assignment a;
  a.channel_of_device.resize(static_cast<std::size_t>(instance.num_devices()));
  for (int i = 0; i < instance.num_devices(); ++i) {
    Eigen::Index best = 0;
    instance.link_gain.row(i).maxCoeff(&best);
    a.channel_of_device[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return a;
}

}  // namespace qfl
