#pragma once

// Reference implementations used only by the tests. They recompute from the
// raw formulas and share no code paths with the library beyond plain data.

#include "qfl/qubo.hpp"
#include "qfl/wireless_net.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

inline double watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double noise_watts(const qfl::NetworkConfig& c) {
  return watts(c.noise_psd_dbm_per_hz) * c.channel_bandwidth_hz;
}

/// Term-by-term sum over the stored coefficients.
inline double qubo_energy(const qfl::Qubo& q, std::uint64_t bits) {
  double e = q.offset();
  for (int i = 0; i < q.size(); ++i) {
    const bool xi = (bits >> i) & 1U;
    e += q.linear()[i] * xi;
    for (int j = 0; j < q.size(); ++j)
      if (j > i) e += q.upper()(i, j) * xi * ((bits >> j) & 1U);
  }
  return e;
}

struct Extremes {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::uint64_t argmin = 0;
};

inline Extremes qubo_extremes(const qfl::Qubo& q) {
  Extremes out;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << q.size()); ++b) {
    const double e = qubo_energy(q, b);
    if (e < out.min) {
      out.min = e;
      out.argmin = b;
    }
    out.max = std::max(out.max, e);
  }
  return out;
}

/// sum_i B log2(1 + p_i g_ik / (N0 B + sum_{j != i, same k} p_j g_jk)).
inline double sum_rate(const qfl::NetworkInstance& inst, const std::vector<int>& channel,
                       const std::vector<double>& power_w) {
  const double noise = noise_watts(inst.config);
  double total = 0.0;
  for (std::size_t i = 0; i < channel.size(); ++i) {
    const int k = channel[i];
    double interference = 0.0;
    for (std::size_t j = 0; j < channel.size(); ++j)
      if (j != i && channel[j] == k) interference += power_w[j] * inst.link_gain(static_cast<int>(j), k);
    const double s = power_w[i] * inst.link_gain(static_cast<int>(i), k) / (noise + interference);
    total += inst.config.channel_bandwidth_hz * std::log2(1.0 + s);
  }
  return total;
}

/// Exhaustive joint optimum over every assignment and a `grid`-point dBm
/// power grid per device. Channels do not interact, so each assignment's
/// power search runs per channel.
inline double minlp_optimum(const qfl::NetworkInstance& inst, int grid = 32) {
  const int n = inst.num_devices();
  const int k = inst.num_channels();
  const auto& range = inst.config.power_range_dbm;
  std::vector<double> levels;
  for (int g = 0; g < grid; ++g) levels.push_back(watts(range.lo + (range.hi - range.lo) * g / (grid - 1)));

  const double noise = noise_watts(inst.config);
  const double bw = inst.config.channel_bandwidth_hz;
  auto best_channel = [&](const std::vector<int>& members, int ch) {
    double best = 0.0;
    std::vector<int> idx(members.size(), 0);
    while (true) {
      double total = noise;
      for (std::size_t m = 0; m < members.size(); ++m) total += levels[idx[m]] * inst.link_gain(members[m], ch);
      double rate = 0.0;
      for (std::size_t m = 0; m < members.size(); ++m) {
        const double s = levels[idx[m]] * inst.link_gain(members[m], ch);
        rate += bw * std::log2(1.0 + s / (total - s));
      }
      best = std::max(best, rate);
      std::size_t pos = 0;
      while (pos < idx.size() && ++idx[pos] == grid) idx[pos++] = 0;
      if (pos == idx.size()) break;
    }
    return best;
  };

  double best = 0.0;
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  while (true) {
    double total = 0.0;
    for (int ch = 0; ch < k; ++ch) {
      std::vector<int> members;
      for (int d = 0; d < n; ++d)
        if (assign[static_cast<std::size_t>(d)] == ch) members.push_back(d);
      if (!members.empty()) total += best_channel(members, ch);
    }
    best = std::max(best, total);
    std::size_t pos = 0;
    while (pos < assign.size() && ++assign[pos] == k) assign[pos++] = 0;
    if (pos == assign.size()) break;
  }
  return best;
}

/// Central finite difference of f at x along coordinate i.
template <typename F>
double central_difference(F&& f, std::vector<double> x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

}  // namespace oracle
