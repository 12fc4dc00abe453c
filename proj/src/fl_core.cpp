#include "qfl/fl_core.hpp"

#include "qfl/errors.hpp"
#include "qfl/parallel.hpp"
#include "qfl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace qfl {

void LabeledDataset::validate() const {
  require(!labels.empty(), "dataset is empty");
  require(features.rows() == static_cast<Eigen::Index>(labels.size()), "feature rows != label count");
  require(num_classes >= 1, "dataset needs at least one class");
  for (int l : labels) require(l >= 0 && l < num_classes, "label " + std::to_string(l) + " outside [0, num_classes)");
  require((features.array() >= 0.0).all() && (features.array() <= 1.0).all(), "features must lie in [0, 1]");
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& rows) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(rows[r]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[r])]);
  }
  return out;
}

int ModelParams::expected_size() const {
  return kind == ModelKind::Vqc ? vqc.num_params() : linear.num_params();
}

void ModelParams::validate() const {
  require(values.size() == expected_size(), "model parameter count " + std::to_string(values.size()) +
                                                " does not match its shape (" + std::to_string(expected_size()) + ")");
  require(values.allFinite(), "model parameters must be finite");
  if (kind == ModelKind::Vqc)
    require(num_classes <= vqc.qubits, "vqc readout needs num_classes <= qubits (" + std::to_string(num_classes) +
                                           " > " + std::to_string(vqc.qubits) + ")");
}

bool ModelParams::same_shape(const ModelParams& o) const {
  if (kind != o.kind || num_classes != o.num_classes || values.size() != o.values.size()) return false;
  if (kind == ModelKind::Vqc)
    return vqc.qubits == o.vqc.qubits && vqc.encode_layers == o.vqc.encode_layers &&
           vqc.variational_layers == o.vqc.variational_layers;
  return linear.feature_dim == o.linear.feature_dim && linear.classes == o.linear.classes;
}

ModelParams init_model(ModelKind kind, int feature_dim, int num_classes, const VqcShape& vqc, std::uint64_t seed) {
  ModelParams m;
  m.kind = kind;
  m.num_classes = num_classes;
  m.vqc = vqc;
  m.linear = {feature_dim, num_classes};
  if (kind == ModelKind::Vqc)
    require(feature_dim == vqc.feature_dim(), "vqc expects " + std::to_string(vqc.feature_dim()) +
                                                  " features (qubits x encode_layers), got " +
                                                  std::to_string(feature_dim));
  CounterRng rng(derive_seed(seed, "fl.init_model"));
  m.values.resize(m.expected_size());
  const double scale = kind == ModelKind::Vqc ? 0.1 * std::numbers::pi : 0.01;
  for (auto& v : m.values) v = scale * (2.0 * rng.uniform() - 1.0);
  m.validate();
  return m;
}

std::vector<std::vector<int>> partition_noniid_rows(const LabeledDataset& data, int num_devices, std::uint64_t seed) {
  data.validate();
  require(num_devices >= 1, "partition_noniid: num_devices must be >= 1");
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(data.num_classes));
  for (int r = 0; r < data.size(); ++r) by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(r)])].push_back(r);

  std::vector<std::vector<int>> shards(static_cast<std::size_t>(num_devices));
  for (int c = 0; c < data.num_classes; ++c) {
    std::vector<int> owners;
    for (int d = c; d < num_devices; d += data.num_classes) owners.push_back(d);
    if (owners.empty()) continue;
    auto rows = by_class[static_cast<std::size_t>(c)];
    require(!rows.empty(), "partition_noniid: class " + std::to_string(c) + " has no samples");
    CounterRng rng(derive_seed(seed, "fl.partition.class", static_cast<std::uint64_t>(c)));
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t base = rows.size() / owners.size();
    const std::size_t extra = rows.size() % owners.size();
    std::size_t pos = 0;
    for (std::size_t o = 0; o < owners.size(); ++o) {
      const std::size_t take = base + (o < extra ? 1 : 0);
      auto& shard = shards[static_cast<std::size_t>(owners[o])];
      shard.assign(rows.begin() + static_cast<long>(pos), rows.begin() + static_cast<long>(pos + take));
      std::sort(shard.begin(), shard.end());
      pos += take;
    }
  }
  return shards;
}

std::vector<LabeledDataset> partition_noniid(const LabeledDataset& data, int num_devices, std::uint64_t seed) {
  std::vector<LabeledDataset> out;
  for (const auto& rows : partition_noniid_rows(data, num_devices, seed)) out.push_back(data.subset(rows));
  return out;
}

// --- models ------------------------------------------------------------------

Circuit vqc_circuit(const VqcShape& shape, std::span<const double> features) {
  require(static_cast<int>(features.size()) == shape.feature_dim(),
          "vqc expects " + std::to_string(shape.feature_dim()) + " features, got " + std::to_string(features.size()));
  Circuit c(shape.qubits);
  for (int l = 0; l < shape.encode_layers; ++l)
    for (int q = 0; q < shape.qubits; ++q)
      c.fixed_rotation(GateKind::RY, q, std::numbers::pi * features[static_cast<std::size_t>(l * shape.qubits + q)]);
  int slot = 0;
  for (int l = 0; l < shape.variational_layers; ++l) {
    for (int q = 0; q < shape.qubits; ++q) c.rotation(GateKind::RY, q, slot++);
    if (shape.qubits == 2) {
      c.cz(0, 1);
    } else if (shape.qubits > 2) {
      for (int q = 0; q < shape.qubits; ++q) c.cz(q, (q + 1) % shape.qubits);
    }
  }
  return c;
}

namespace {

std::vector<ZObservable> readout(int num_classes) {
  std::vector<ZObservable> obs;
  for (int c = 0; c < num_classes; ++c) obs.push_back({{c}});
  return obs;
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

Eigen::VectorXd vqc_scores(const ModelParams& params, std::span<const double> features) {
  require(params.kind == ModelKind::Vqc, "vqc_scores needs a vqc model");
  params.validate();
  const Circuit circuit = vqc_circuit(params.vqc, features);
  const StateVector out = apply(StateVector(params.vqc.qubits), circuit, as_span(params.values));
  Eigen::VectorXd scores(params.num_classes);
  for (int c = 0; c < params.num_classes; ++c) scores[c] = expect_z(out, {{c}});
  return scores;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const Eigen::ArrayXd e = (scores.array() - scores.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::VectorXd model_scores(const ModelParams& params, std::span<const double> features) {
  if (params.kind == ModelKind::Vqc) return vqc_scores(params, features);
  params.validate();
  const int d = params.linear.feature_dim;
  const int k = params.linear.classes;
  require(static_cast<int>(features.size()) == d, "linear model expects " + std::to_string(d) + " features");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      params.values.data(), k, d);
  const Eigen::Map<const Eigen::VectorXd> x(features.data(), d);
  return w * x + params.values.tail(k);
}

double cross_entropy(const ModelParams& params, std::span<const double> features, int label) {
  const Eigen::VectorXd p = softmax(model_scores(params, features));
  return -std::log(std::max(p[label], 1e-300));
}

Eigen::VectorXd sample_gradient(const ModelParams& params, std::span<const double> features, int label) {
  require(label >= 0 && label < params.num_classes, "label out of range");
  Eigen::VectorXd residual = softmax(model_scores(params, features));
  residual[label] -= 1.0;  // dL/dscore = p - onehot
  if (params.kind == ModelKind::Linear) {
    const int d = params.linear.feature_dim;
    const int k = params.linear.classes;
    Eigen::VectorXd grad(params.values.size());
    const Eigen::Map<const Eigen::VectorXd> x(features.data(), d);
    for (int c = 0; c < k; ++c) grad.segment(static_cast<Eigen::Index>(c) * d, d) = residual[c] * x;
    grad.tail(k) = residual;
    return grad;
  }
  const Circuit circuit = vqc_circuit(params.vqc, features);
  const Eigen::MatrixXd jac =
      parameter_shift_jacobian(circuit, as_span(params.values), readout(params.num_classes), StateVector(params.vqc.qubits));
  return jac.transpose() * residual;
}

Evaluation evaluate(const ModelParams& params, const LabeledDataset& data) {
  Evaluation ev;
  if (data.size() == 0) return ev;
  int correct = 0;
  for (int r = 0; r < data.size(); ++r) {
    const Eigen::VectorXd row = data.features.row(r).transpose();
    const Eigen::VectorXd s = model_scores(params, as_span(row));
    Eigen::Index pred = 0;
    s.maxCoeff(&pred);
    const int label = data.labels[static_cast<std::size_t>(r)];
    if (pred == label) ++correct;
    ev.loss -= std::log(std::max(softmax(s)[label], 1e-300));
  }
  ev.accuracy = static_cast<double>(correct) / data.size();
  ev.loss /= data.size();
  return ev;
}

LocalUpdate local_train(const ModelParams& params, const LabeledDataset& shard, int epochs, double learning_rate,
                        int batch_size, std::uint64_t seed) {
  require(shard.size() > 0, "local_train: shard is empty");
  require(epochs >= 0, "local_train: epochs must be >= 0");
  require(batch_size >= 1, "local_train: batch_size must be >= 1");
  params.validate();
  LocalUpdate out{params, shard.size()};
  std::vector<int> order(static_cast<std::size_t>(shard.size()));
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(derive_seed(seed, "fl.local_train.epoch", static_cast<std::uint64_t>(e)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(out.params.values.size());
      for (std::size_t k = start; k < stop; ++k) {
        const Eigen::VectorXd row = shard.features.row(order[k]).transpose();
        grad += sample_gradient(out.params, as_span(row), shard.labels[static_cast<std::size_t>(order[k])]);
      }
      out.params.values -= (learning_rate / static_cast<double>(stop - start)) * grad;
    }
  }
  return out;
}

ModelParams aggregate(const std::vector<ModelParams>& models, const std::vector<int>& counts) {
  require(!models.empty(), "aggregate: no models");
  require(models.size() == counts.size(), "aggregate: one count per model required");
  long long total = 0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    require(models[m].same_shape(models.front()), "aggregate: model shapes differ");
    require(counts[m] > 0, "aggregate: sample counts must be positive");
    total += counts[m];
  }
  require(total > 0, "aggregate: zero total sample count");
  ModelParams out = models.front();
  out.values.setZero();
  for (std::size_t m = 0; m < models.size(); ++m)
    out.values += (static_cast<double>(counts[m]) / static_cast<double>(total)) * models[m].values;
  return out;
}

double round_latency(const std::vector<double>& rates_bps, double model_bits, const std::vector<int>& participants,
                     double compute_s) {
  double upload = 0.0;
  for (int d : participants) {
    require(d >= 0 && d < static_cast<int>(rates_bps.size()), "round_latency: participant out of range");
    const double rate = rates_bps[static_cast<std::size_t>(d)];
    require(rate > 0.0, "round_latency: device " + std::to_string(d) + " has zero rate");
    upload = std::max(upload, model_bits / rate);
  }
  return upload + compute_s;
}

void FederationConfig::validate() const {
  require(num_devices >= 1, "fl.num_devices must be >= 1");
  require(rounds >= 0, "fl.rounds must be >= 0");
  require(local_epochs >= 0, "fl.local_epochs must be >= 0");
  require(batch_size >= 1, "fl.batch_size must be >= 1");
  require(learning_rate >= 0.0, "fl.learning_rate must be >= 0");
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, "fl.holdout_fraction must be in (0, 1)");
  require(latency.bits_per_param >= 1, "fl.bits_per_param must be >= 1");
}

namespace {

/// Stratified train/test split.
void holdout_split(const LabeledDataset& data, double fraction, std::uint64_t seed, LabeledDataset& train,
                   LabeledDataset& test) {
  std::vector<int> train_rows;
  std::vector<int> test_rows;
  for (int c = 0; c < data.num_classes; ++c) {
    std::vector<int> rows;
    for (int r = 0; r < data.size(); ++r)
      if (data.labels[static_cast<std::size_t>(r)] == c) rows.push_back(r);
    CounterRng rng(derive_seed(seed, "fl.holdout.class", static_cast<std::uint64_t>(c)));
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<long>(n_test));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<long>(n_test), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  train = data.subset(train_rows);
  test = data.subset(test_rows);
}

std::vector<RoundRecord> run_arm(const std::vector<LabeledDataset>& shards, const LabeledDataset& test,
                                 const FederationConfig& cfg, ModelKind kind, int feature_dim, int num_classes,
                                 const std::vector<double>& rates) {
  ModelParams global = init_model(kind, feature_dim, num_classes, cfg.vqc, derive_seed(cfg.seed, "fl.init"));
  const double model_bits = static_cast<double>(cfg.latency.bits_per_param) * static_cast<double>(global.values.size());
  const double compute = kind == ModelKind::Vqc ? cfg.latency.compute_vqc_s : cfg.latency.compute_linear_s;

  std::vector<int> participants;
  for (int d = 0; d < cfg.num_devices; ++d)
    if (shards[static_cast<std::size_t>(d)].size() > 0) participants.push_back(d);

  std::vector<RoundRecord> records;
  const Evaluation ev0 = evaluate(global, test);
  records.push_back({0, ev0.accuracy, ev0.loss, 0.0, 0.0, 0});
  double clock = 0.0;
  for (int round = 1; round <= cfg.rounds; ++round) {
    std::vector<LocalUpdate> updates(participants.size());
    parallel_for(participants.size(), [&](std::size_t k) {
      const int d = participants[k];
      const auto stream = static_cast<std::uint64_t>(round) * static_cast<std::uint64_t>(cfg.num_devices) +
                          static_cast<std::uint64_t>(d);
      updates[k] = local_train(global, shards[static_cast<std::size_t>(d)], cfg.local_epochs, cfg.learning_rate,
                               cfg.batch_size, derive_seed(cfg.seed, "fl.local", stream));
    });
    std::vector<ModelParams> models;
    std::vector<int> counts;
    for (auto& u : updates) {
      models.push_back(std::move(u.params));
      counts.push_back(u.sample_count);
    }
    global = aggregate(models, counts);
    const double latency = round_latency(rates, model_bits, participants, compute);
    clock += latency;
    const Evaluation ev = evaluate(global, test);
    records.push_back({round, ev.accuracy, ev.loss, latency, clock, static_cast<int>(participants.size())});
  }
  return records;
}

}  // namespace

FederationResult run_federation(const LabeledDataset& data, const FederationConfig& cfg,
                                const std::vector<double>& rates_qfl, const std::vector<double>& rates_fl) {
  cfg.validate();
  data.validate();
  require(static_cast<int>(rates_qfl.size()) == cfg.num_devices && static_cast<int>(rates_fl.size()) == cfg.num_devices,
          "run_federation: each rate vector needs one entry per device");
  LabeledDataset train;
  LabeledDataset test;
  holdout_split(data, cfg.holdout_fraction, derive_seed(cfg.seed, "fl.holdout"), train, test);
  const auto shards = partition_noniid(train, cfg.num_devices, derive_seed(cfg.seed, "fl.partition"));

  FederationResult out;
  out.qfl = run_arm(shards, test, cfg, cfg.qfl_model, data.feature_dim(), data.num_classes, rates_qfl);
  out.fl = run_arm(shards, test, cfg, cfg.fl_model, data.feature_dim(), data.num_classes, rates_fl);
  return out;
}

double accuracy_at_time(const std::vector<RoundRecord>& records, double budget_s) {
  double acc = records.empty() ? 0.0 : records.front().accuracy;
  for (const auto& r : records) {
    if (r.cumulative_time_s > budget_s) break;
    acc = r.accuracy;
  }
  return acc;
}

}  // namespace qfl
