#include "qfl/qubo.hpp"

#include "qfl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numeric>

namespace qfl {

BitString bits_from_index(std::uint64_t bits, int n) {
  BitString x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((bits >> i) & 1U);
  return x;
}

std::uint64_t index_from_bits(std::span<const std::uint8_t> x) {
  require(x.size() <= 64, "bitstring longer than 64 bits has no index form");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i]) bits |= std::uint64_t{1} << i;
  return bits;
}

double flip_scale(const Qubo& q) {
  double scale = 0.0;
  for (int i = 0; i < q.size(); ++i) {
    double s = std::abs(q.linear(i));
    for (int j = 0; j < q.size(); ++j)
      if (j != i) s += std::abs(q.quadratic(i, j));
    scale = std::max(scale, s);
  }
  return scale;
}

bool better_solution(const QuboSolution& a, const QuboSolution& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.x < b.x;
}

namespace {

// Depth-first enumeration in lexicographic order (x[0] = 0 branch first).
// `fields[d]` holds linear_d + sum_{i<d, x_i=1} quad_id for the current prefix.
template <typename Visit>
void enumerate_lex(const Qubo& q, Visit&& visit) {
  const int n = q.size();
  BitString x(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd fields = q.linear();
  const Eigen::MatrixXd& up = q.upper();

  auto rec = [&](auto&& self, int depth, double partial) -> void {
    if (depth == n) {
      visit(x, partial);
      return;
    }
    x[static_cast<std::size_t>(depth)] = 0;
    self(self, depth + 1, partial);
    x[static_cast<std::size_t>(depth)] = 1;
    for (int j = depth + 1; j < n; ++j) fields[j] += up(depth, j);
    self(self, depth + 1, partial + fields[depth]);
    for (int j = depth + 1; j < n; ++j) fields[j] -= up(depth, j);
    x[static_cast<std::size_t>(depth)] = 0;
  };
  rec(rec, 0, q.offset());
}

double abs_sum(const Qubo& q) {
  return std::abs(q.offset()) + q.linear().cwiseAbs().sum() + q.upper().cwiseAbs().sum();
}

}  // namespace

QuboSolution brute_force_min(const Qubo& q) {
  require(q.size() <= kBruteForceMaxVars,
          "brute_force_min supports at most " + std::to_string(kBruteForceMaxVars) + " variables, got " +
              std::to_string(q.size()));
  // Path sums differ from energy() only by rounding; a candidate must beat the
  // incumbent by more than that to displace a lexicographically earlier x.
  const double tol = 1e-12 * (1.0 + abs_sum(q));
  QuboSolution best;
  best.value = std::numeric_limits<double>::infinity();
  enumerate_lex(q, [&](const BitString& x, double e) {
    if (e < best.value - tol) {
      best.x = x;
      best.value = e;
    }
  });
  best.value = energy(q, std::span<const std::uint8_t>(best.x));
  return best;
}

double brute_force_max(const Qubo& q) {
  require(q.size() <= kBruteForceMaxVars, "brute_force_max: too many variables");
  double hi = -std::numeric_limits<double>::infinity();
  enumerate_lex(q, [&](const BitString&, double e) { hi = std::max(hi, e); });
  return hi;
}

QuboSolution anneal_min(const Qubo& q, const AnnealConfig& cfg) {
  require(cfg.sweeps >= 1, "anneal_min: sweeps must be >= 1");
  require(cfg.restarts >= 1, "anneal_min: restarts must be >= 1");
  require(cfg.t_start > 0.0 && cfg.t_end > 0.0, "anneal_min: temperatures must be positive");
  const int n = q.size();
  QuboSolution best{BitString(static_cast<std::size_t>(n), 0), q.offset()};
  if (n == 0) return best;

  const Eigen::MatrixXd sym = q.upper() + q.upper().transpose();
  const double scale = std::max(flip_scale(q), 1e-300);
  const double t0 = cfg.t_start * scale;
  const double t1 = cfg.t_end * scale;
  const double ratio = cfg.sweeps > 1 ? std::pow(t1 / t0, 1.0 / (cfg.sweeps - 1)) : 1.0;

  for (int r = 0; r < cfg.restarts; ++r) {
    CounterRng rng(derive_seed(cfg.seed, "qubo.anneal.restart", static_cast<std::uint64_t>(r)));
    BitString x(static_cast<std::size_t>(n));
    for (auto& b : x) b = static_cast<std::uint8_t>(rng() & 1U);
    Eigen::VectorXd field = q.linear();
    for (int i = 0; i < n; ++i)
      if (x[static_cast<std::size_t>(i)]) field += sym.col(i);
    double e = energy(q, std::span<const std::uint8_t>(x));
    QuboSolution local{x, e};

    double t = t0;
    for (int s = 0; s < cfg.sweeps; ++s, t *= ratio) {
      for (int i = 0; i < n; ++i) {
        const bool on = x[static_cast<std::size_t>(i)] != 0;
        const double delta = on ? -field[i] : field[i];
        if (delta <= 0.0 || rng.uniform() < std::exp(-delta / t)) {
          x[static_cast<std::size_t>(i)] = on ? 0 : 1;
          if (on) {
            field -= sym.col(i);
          } else {
            field += sym.col(i);
          }
          e += delta;
          if (e < local.value) local = {x, e};
        }
      }
    }
    local.value = energy(q, std::span<const std::uint8_t>(local.x));
    if (better_solution(local, best) || r == 0) best = local;
  }
  return best;
}

Qubo random_qubo(int n, std::uint64_t seed) {
  Qubo q(n);
  CounterRng rng(derive_seed(seed, "random_qubo"));
  auto coeff = [&] { return 2.0 * rng.uniform() - 1.0; };
  for (int i = 0; i < n; ++i) {
    q.add_linear(i, coeff());
    for (int j = i + 1; j < n; ++j) q.add_quadratic(i, j, coeff());
  }
  return q;
}

nlohmann::json to_json(const Qubo& q) {
  nlohmann::json quad = nlohmann::json::array();
  for (const auto& t : q.quad_terms()) quad.push_back({t.i, t.j, t.coeff});
  return {{"n", q.size()},
          {"linear", std::vector<double>(q.linear().data(), q.linear().data() + q.size())},
          {"quad", quad},
          {"offset", q.offset()}};
}

Qubo qubo_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    Qubo q(n, j.value("offset", 0.0));
    const auto lin = j.at("linear").get<std::vector<double>>();
    require(static_cast<int>(lin.size()) == n, "qubo json: linear length != n");
    for (int i = 0; i < n; ++i) q.add_linear(i, lin[static_cast<std::size_t>(i)]);
    for (const auto& t : j.at("quad")) {
      const int a = t.at(0).get<int>();
      const int b = t.at(1).get<int>();
      require(a < b, "qubo json: quad term must have i < j");
      q.add_quadratic(a, b, t.at(2).get<double>());
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("qubo json: ") + e.what());
  }
}

// --- channel-assignment encoding ---------------------------------------------

std::vector<int> AssignmentQubo::vars_of(int active_pos) const {
  const int device = active_devices[static_cast<std::size_t>(active_pos)];
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(vars.size()); ++v)
    if (vars[static_cast<std::size_t>(v)].device == device) out.push_back(v);
  return out;
}

std::vector<int> top_channels(const NetworkInstance& instance, int device, int count) {
  require(device >= 0 && device < instance.num_devices(), "top_channels: device out of range");
  std::vector<int> order(static_cast<std::size_t>(instance.num_channels()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return instance.link_gain(device, a) > instance.link_gain(device, b); });
  order.resize(static_cast<std::size_t>(std::clamp(count, 1, instance.num_channels())));
  return order;
}

namespace {

// Signals (p_j g_jk) of the devices outside `active`, grouped by channel.
std::vector<std::vector<double>> fixed_signals(const NetworkInstance& instance, const Eigen::VectorXd& w,
                                               const Assignment& context, const std::vector<char>& is_active) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(instance.num_channels()));
  for (int j = 0; j < instance.num_devices(); ++j) {
    if (is_active[static_cast<std::size_t>(j)]) continue;
    const int ch = context.channel_of_device[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(ch)].push_back(w[j] * instance.link_gain(j, ch));
  }
  return out;
}

double channel_rate(const std::vector<double>& signals, std::initializer_list<double> extra, double noise,
                    double bw) {
  double total = noise;
  for (double s : signals) total += s;
  for (double s : extra) total += s;
  double rate = 0.0;
  for (double s : signals) rate += std::log2(1.0 + s / (total - s));
  for (double s : extra) rate += std::log2(1.0 + s / (total - s));
  return bw * rate;
}

}  // namespace

std::vector<int> top_marginal_channels(const NetworkInstance& instance, const PowerVector& powers,
                                       const Assignment& context, const std::vector<int>& block, int device,
                                       int count) {
  validate(instance, context);
  validate(instance, powers);
  require(device >= 0 && device < instance.num_devices(), "top_marginal_channels: device out of range");
  std::vector<char> is_active(static_cast<std::size_t>(instance.num_devices()), 0);
  for (int d : block) {
    require(d >= 0 && d < instance.num_devices(), "block device out of range");
    is_active[static_cast<std::size_t>(d)] = 1;
  }
  is_active[static_cast<std::size_t>(device)] = 1;
  const Eigen::VectorXd w = power_watts(powers);
  const auto fixed = fixed_signals(instance, w, context, is_active);
  const double noise = instance.config.noise_watts();
  std::vector<double> gain(static_cast<std::size_t>(instance.num_channels()));
  for (int k = 0; k < instance.num_channels(); ++k) {
    const auto& f = fixed[static_cast<std::size_t>(k)];
    gain[static_cast<std::size_t>(k)] =
        channel_rate(f, {w[device] * instance.link_gain(device, k)}, noise, 1.0) - channel_rate(f, {}, noise, 1.0);
  }
  std::vector<int> order(gain.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gain[static_cast<std::size_t>(a)] > gain[static_cast<std::size_t>(b)]; });
  order.resize(static_cast<std::size_t>(std::clamp(count, 1, instance.num_channels())));
  return order;
}

AssignmentQubo build_assignment_qubo(const NetworkInstance& instance, const PowerVector& powers,
                                     const Assignment& context, const std::vector<int>& active_devices,
                                     const std::vector<std::vector<int>>& candidates,
                                     const AssignmentQuboWeights& weights) {
  validate(instance, context);
  validate(instance, powers);
  require(candidates.size() == active_devices.size(), "candidates must list one shortlist per active device");
  std::vector<char> is_active(static_cast<std::size_t>(instance.num_devices()), 0);
  for (std::size_t a = 0; a < active_devices.size(); ++a) {
    const int d = active_devices[a];
    require(d >= 0 && d < instance.num_devices(), "active device out of range");
    require(!is_active[static_cast<std::size_t>(d)], "active device listed twice");
    require(!candidates[a].empty(), "active device " + std::to_string(d) + " has an empty candidate list");
    for (int c : candidates[a]) require(c >= 0 && c < instance.num_channels(), "candidate channel out of range");
    is_active[static_cast<std::size_t>(d)] = 1;
  }

  const Eigen::VectorXd w = power_watts(powers);
  const double noise = instance.config.noise_watts();
  const double bw = instance.bandwidth();

  // Devices outside the block stay at their current channels.
  const auto fixed = fixed_signals(instance, w, context, is_active);
  Eigen::VectorXd fixed_interference = Eigen::VectorXd::Zero(instance.num_channels());
  Eigen::VectorXd fixed_rate = Eigen::VectorXd::Zero(instance.num_channels());
  for (int k = 0; k < instance.num_channels(); ++k) {
    for (double s : fixed[static_cast<std::size_t>(k)]) fixed_interference[k] += s;
    fixed_rate[k] = channel_rate(fixed[static_cast<std::size_t>(k)], {}, noise, bw);
  }
  const bool marginal = weights.proxy == InterferenceProxy::MarginalSumRate;

  AssignmentQubo out;
  out.active_devices = active_devices;
  for (std::size_t a = 0; a < active_devices.size(); ++a)
    for (int c : candidates[a]) out.vars.push_back({active_devices[a], c});
  const int n = static_cast<int>(out.vars.size());
  out.reward.resize(n);
  for (int v = 0; v < n; ++v) {
    const auto [d, c] = out.vars[static_cast<std::size_t>(v)];
    const double s = w[d] * instance.link_gain(d, c);
    out.reward[v] = marginal ? channel_rate(fixed[static_cast<std::size_t>(c)], {s}, noise, bw) - fixed_rate[c]
                             : bw * std::log2(1.0 + s / (noise + fixed_interference[c]));
  }

  struct Pair {
    int u, v;
    double proxy;
  };
  std::vector<Pair> pairs;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const auto& a = out.vars[static_cast<std::size_t>(u)];
      const auto& b = out.vars[static_cast<std::size_t>(v)];
      if (a.channel != b.channel || a.device == b.device) continue;
      const double sa = w[a.device] * instance.link_gain(a.device, a.channel);
      const double sb = w[b.device] * instance.link_gain(b.device, b.channel);
      double proxy = 0.0;
      if (weights.proxy == InterferenceProxy::ReceivedPower) {
        proxy = sa + sb;
      } else if (marginal) {
        const double both = channel_rate(fixed[static_cast<std::size_t>(a.channel)], {sa, sb}, noise, bw) -
                            fixed_rate[a.channel];
        proxy = out.reward[u] + out.reward[v] - both;
      } else {
        const double base = noise + fixed_interference[a.channel];
        const double shared = bw * (std::log2(1.0 + sa / (base + sb)) + std::log2(1.0 + sb / (base + sa)));
        proxy = std::max(0.0, out.reward[u] + out.reward[v] - shared);
      }
      pairs.push_back({u, v, proxy});
    }
  }

  const double mean_reward = n > 0 ? out.reward.cwiseAbs().mean() : 0.0;
  if (weights.lambda_int >= 0.0) {
    out.lambda_int = weights.lambda_int;
  } else if (weights.proxy != InterferenceProxy::ReceivedPower) {
    out.lambda_int = 1.0;
  } else {
    double mean_proxy = 0.0;
    for (const auto& p : pairs) mean_proxy += p.proxy;
    if (!pairs.empty()) mean_proxy /= static_cast<double>(pairs.size());
    out.lambda_int = mean_proxy > 0.0 ? mean_reward / mean_proxy : 0.0;
  }
  // Twice the largest energy change a single variable can cause, so any
  // non-one-hot state has a strictly better one-hot neighbour.
  Eigen::VectorXd reach = out.reward.cwiseAbs();
  for (const auto& p : pairs) {
    reach[p.u] += std::abs(out.lambda_int * p.proxy);
    reach[p.v] += std::abs(out.lambda_int * p.proxy);
  }
  const double max_reach = n > 0 ? reach.maxCoeff() : 0.0;
  out.lambda_onehot = weights.lambda_onehot > 0.0 ? weights.lambda_onehot : 2.0 * std::max(max_reach, 1e-12);

  Qubo q(n);
  for (int v = 0; v < n; ++v) q.add_linear(v, -out.reward[v]);
  for (const auto& p : pairs) q.add_quadratic(p.u, p.v, out.lambda_int * p.proxy);
  // lambda (sum_k x_k - 1)^2 = lambda (1 - sum_k x_k + 2 sum_{k<l} x_k x_l) using x^2 = x.
  for (std::size_t a = 0; a < active_devices.size(); ++a) {
    const auto idx = out.vars_of(static_cast<int>(a));
    q.add_offset(out.lambda_onehot);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      q.add_linear(idx[s], -out.lambda_onehot);
      for (std::size_t t = s + 1; t < idx.size(); ++t) q.add_quadratic(idx[s], idx[t], 2.0 * out.lambda_onehot);
    }
  }
  out.qubo = std::move(q);
  return out;
}

Assignment decode_assignment(std::span<const std::uint8_t> x, const AssignmentQubo& map, const Assignment& prior) {
  require(x.size() == map.vars.size(), "decode_assignment: bitstring length != variable count");
  Assignment out = prior;
  for (std::size_t a = 0; a < map.active_devices.size(); ++a) {
    const auto idx = map.vars_of(static_cast<int>(a));
    std::vector<int> set;
    for (int v : idx)
      if (x[static_cast<std::size_t>(v)]) set.push_back(v);
    const std::vector<int>& pool = set.empty() ? idx : set;
    int chosen = pool.front();
    for (int v : pool)
      if (map.reward[v] > map.reward[chosen]) chosen = v;
    out.channel_of_device[static_cast<std::size_t>(map.active_devices[a])] =
        map.vars[static_cast<std::size_t>(chosen)].channel;
  }
  return out;
}

}  // namespace qfl
