#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace qfl {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Uplink scenario parameters. Defaults reproduce the 200-device, 20x180 kHz
/// case; the channel-model constants (noise, path loss, K-factor) are free
/// parameters.
struct NetworkConfig {
  int num_devices = 200;
  int num_channels = 20;
  double channel_bandwidth_hz = 180e3;
  Interval distance_range_m{1.0, 1800.0};
  Interval power_range_dbm{0.0, 24.0};
  double noise_psd_dbm_per_hz = -174.0;
  double rician_k = 3.0;
  double pathloss_exponent = 3.0;
  double pathloss_ref_db = 30.0;
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the offending field.
  void validate() const;

  /// Noise power over one sub-channel, in watts.
  double noise_watts() const;
};

/// K-factor at or above which the fading is the deterministic LoS limit.
inline constexpr double kRicianLosLimit = 1e6;

/// Sampled network: distances and per-(device, channel) linear power gain.
struct NetworkInstance {
  NetworkConfig config;
  Eigen::VectorXd device_distances_m;
  Eigen::MatrixXd link_gain;  // num_devices x num_channels

  int num_devices() const { return config.num_devices; }
  int num_channels() const { return config.num_channels; }
  double bandwidth() const { return config.channel_bandwidth_hz; }
};

/// One channel index per device.
struct Assignment {
  std::vector<int> channel_of_device;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Transmit power per device in dBm. -infinity dBm is the 0 W sentinel.
struct PowerVector {
  Eigen::VectorXd power_dbm;
};

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

/// Log-distance path loss in dB.
double pathloss_db(const NetworkConfig& config, double distance_m);

/// |h|^2 of one unit-mean-power Rician draw with factor k.
template <typename Rng>
double rician_power_gain(double k, Rng& rng);

NetworkInstance sample_network(const NetworkConfig& config);

void validate(const NetworkInstance& instance, const Assignment& assignment);
void validate(const NetworkInstance& instance, const PowerVector& powers);

PowerVector uniform_power(const NetworkInstance& instance, double dbm);
PowerVector midpoint_power(const NetworkInstance& instance);

/// Device watts from a PowerVector (0 W for -inf dBm).
Eigen::VectorXd power_watts(const PowerVector& powers);

double sinr(const NetworkInstance& instance, const Assignment& assignment,
            const PowerVector& powers, int device);

/// Shannon rate of every device, bit/s.
Eigen::VectorXd device_rates(const NetworkInstance& instance, const Assignment& assignment,
                             const PowerVector& powers);

double sum_rate(const NetworkInstance& instance, const Assignment& assignment,
                const PowerVector& powers);

/// Unchecked sum-rate over watts; the solvers' inner-loop evaluation.
double sum_rate_watts(const NetworkInstance& instance, const std::vector<int>& channel_of_device,
                      const Eigen::VectorXd& watts);

/// Each device on its highest-gain channel.
Assignment greedy_assignment(const NetworkInstance& instance);

template <typename Rng>
double rician_power_gain(double k, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double los_phase = phase(rng);
  if (k >= kRicianLosLimit) return 1.0;
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  const double los = std::sqrt(k / (k + 1.0));
  const double nlos = std::sqrt(1.0 / (k + 1.0));
  const double re = los * std::cos(los_phase) + nlos * normal(rng);
  const double im = los * std::sin(los_phase) + nlos * normal(rng);
  return re * re + im * im;
}

}  // namespace qfl
