#pragma once

#include "qfl/quantum_sim.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace qfl {

/// Rows are samples; features lie in [0, 1].
struct LabeledDataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  void validate() const;
  LabeledDataset subset(const std::vector<int>& rows) const;
};

enum class ModelKind { Vqc, Linear };

struct VqcShape {
  int qubits = 8;
  int encode_layers = 2;
  int variational_layers = 3;

  int feature_dim() const { return qubits * encode_layers; }
  int num_params() const { return qubits * variational_layers; }
};

struct LinearShape {
  int feature_dim = 16;
  int classes = 2;

  int num_params() const { return classes * (feature_dim + 1); }
};

/// Flat parameters plus their shape. Linear layout: row-major weights
/// (classes x feature_dim) followed by the bias vector.
struct ModelParams {
  ModelKind kind = ModelKind::Linear;
  VqcShape vqc;
  LinearShape linear;
  int num_classes = 2;
  Eigen::VectorXd values;

  int expected_size() const;
  void validate() const;
  bool same_shape(const ModelParams& other) const;
};

ModelParams init_model(ModelKind kind, int feature_dim, int num_classes, const VqcShape& vqc, std::uint64_t seed);

/// Per-device shards holding exactly one label each.
std::vector<LabeledDataset> partition_noniid(const LabeledDataset& data, int num_devices, std::uint64_t seed);

/// Row indices of each shard into `data` (the partition itself).
std::vector<std::vector<int>> partition_noniid_rows(const LabeledDataset& data, int num_devices,
                                                    std::uint64_t seed);

/// Encoder RY(pi x_j) per qubit and layer, then RY(theta) + CZ ring per
/// variational layer. Slots are the variational angles.
Circuit vqc_circuit(const VqcShape& shape, std::span<const double> features);

/// Raw class scores: <Z_c> for class c.
Eigen::VectorXd vqc_scores(const ModelParams& params, std::span<const double> features);

Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// Raw scores for any model kind (logits for the linear model).
Eigen::VectorXd model_scores(const ModelParams& params, std::span<const double> features);

double cross_entropy(const ModelParams& params, std::span<const double> features, int label);

/// Gradient of the cross-entropy of one sample; parameter shift for the VQC.
Eigen::VectorXd sample_gradient(const ModelParams& params, std::span<const double> features, int label);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

Evaluation evaluate(const ModelParams& params, const LabeledDataset& data);

struct LocalUpdate {
  ModelParams params;
  int sample_count = 0;
};

/// Mini-batch SGD on the cross-entropy.
LocalUpdate local_train(const ModelParams& params, const LabeledDataset& shard, int epochs, double learning_rate,
                        int batch_size, std::uint64_t seed);

/// sum_i n_i theta_i / sum_i n_i.
ModelParams aggregate(const std::vector<ModelParams>& models, const std::vector<int>& counts);

struct LatencyModel {
  int bits_per_param = 32;
  double compute_linear_s = 0.05;
  double compute_vqc_s = 0.10;
};

/// Synchronous round time: slowest upload plus the per-kind compute constant.
double round_latency(const std::vector<double>& rates_bps, double model_bits, const std::vector<int>& participants,
                     double compute_s);

struct FederationConfig {
  int num_devices = 10;
  int rounds = 30;
  ModelKind qfl_model = ModelKind::Vqc;
  ModelKind fl_model = ModelKind::Vqc;
  VqcShape vqc{};
  int local_epochs = 1;
  double learning_rate = 0.5;
  int batch_size = 20;
  double holdout_fraction = 0.2;
  LatencyModel latency{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  double round_latency_s = 0.0;
  double cumulative_time_s = 0.0;
  int participants = 0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct FederationResult {
  std::vector<RoundRecord> qfl;
  std::vector<RoundRecord> fl;
};

/// Two arms over the same data, partition, initialization and seeds; only the
/// rate vectors (and optionally the model kinds) differ. Record 0 is the
/// initial model at time 0.
FederationResult run_federation(const LabeledDataset& data, const FederationConfig& cfg,
                                const std::vector<double>& rates_qfl, const std::vector<double>& rates_fl);

/// Accuracy of the last round completed by `budget_s` (record 0 if none).
double accuracy_at_time(const std::vector<RoundRecord>& records, double budget_s);

}  // namespace qfl
